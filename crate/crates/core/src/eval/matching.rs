//! Assignment kernels, generic over the scalar type.
//!
//! `max_weight_matching` is the Hungarian algorithm on the padded square
//! matrix; `max_weight_matching_monotone` is the non-crossing variant via
//! dynamic programming. Weights must be non-negative (unmatched rows
//! contribute zero).

use crate::scalar::Scalar;

/// Maximum-weight one-to-one matching value over a rectangular weight matrix.
pub fn max_weight_matching<S: Scalar>(w: &[Vec<S>]) -> S {
    let n = w.len();
    if n == 0 {
        return S::zero();
    }
    let m = w[0].len();
    if m == 0 {
        return S::zero();
    }
    let size = n.max(m);
    // Pad to square; minimize negated weights.
    let cost = |i: usize, j: usize| -> S {
        if i < n && j < m {
            -w[i][j]
        } else {
            S::zero()
        }
    };

    let inf = S::infinity();
    let mut u = vec![S::zero(); size + 1];
    let mut v = vec![S::zero(); size + 1];
    let mut assigned_row = vec![0usize; size + 1]; // column -> row (1-based)
    let mut way = vec![0usize; size + 1];

    for i in 1..=size {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=size {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[assigned_row[j]] = u[assigned_row[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut total = S::zero();
    for j in 1..=size {
        let i = assigned_row[j];
        if i >= 1 && i <= n && j <= m {
            total = total + w[i - 1][j - 1];
        }
    }
    total
}

/// Maximum total weight over matchings with strictly increasing index pairs
/// (no crossings): DP(i,j) = max(DP(i-1,j), DP(i,j-1), DP(i-1,j-1) + w[i][j]).
pub fn max_weight_matching_monotone<S: Scalar>(w: &[Vec<S>]) -> S {
    let n = w.len();
    if n == 0 {
        return S::zero();
    }
    let m = w[0].len();
    let mut prev = vec![S::zero(); m + 1];
    let mut cur = vec![S::zero(); m + 1];
    for i in 1..=n {
        for j in 1..=m {
            let take = prev[j - 1] + w[i - 1][j - 1];
            cur[j] = prev[j].max(cur[j - 1]).max(take);
        }
        std::mem::swap(&mut prev, &mut cur);
        cur[0] = S::zero();
    }
    prev[m]
}

/// Exhaustive oracles for small matrices (tests and the acceptance suite).
pub mod oracle {
    use crate::scalar::Scalar;

    /// Brute-force maximum over all injective row->column assignments.
    pub fn assignment_brute_force<S: Scalar>(w: &[Vec<S>]) -> S {
        let n = w.len();
        if n == 0 || w[0].is_empty() {
            return S::zero();
        }
        let m = w[0].len();
        let mut used = vec![false; m];
        fn rec<S: Scalar>(w: &[Vec<S>], row: usize, used: &mut [bool]) -> S {
            if row == w.len() {
                return S::zero();
            }
            // Leave this row unmatched.
            let mut best = rec(w, row + 1, used);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    let cand = w[row][j] + rec(w, row + 1, used);
                    used[j] = false;
                    best = best.max(cand);
                }
            }
            best
        }
        rec(w, 0, &mut used)
    }

    /// Brute-force maximum over all monotone (non-crossing) matchings.
    pub fn monotone_brute_force<S: Scalar>(w: &[Vec<S>]) -> S {
        let n = w.len();
        if n == 0 || w[0].is_empty() {
            return S::zero();
        }
        let m = w[0].len();
        fn rec<S: Scalar>(w: &[Vec<S>], i: usize, j: usize, m: usize) -> S {
            if i == w.len() || j == m {
                return S::zero();
            }
            let skip_i = rec(w, i + 1, j, m);
            let skip_j = rec(w, i, j + 1, m);
            let take = w[i][j] + rec(w, i + 1, j + 1, m);
            skip_i.max(skip_j).max(take)
        }
        rec(w, 0, 0, m)
    }
}
