//! Execution-result evaluation: exact execution accuracy and the bipartite
//! F-beta score with Hungarian matching (unordered results) or non-crossing
//! DP matching (ordered results).

pub mod batch;
pub mod cell;
pub mod matching;

pub use cell::{cell_equal, Cell};
pub use matching::{max_weight_matching, max_weight_matching_monotone};

use crate::ukf::hash::sha256_hex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("rows must be non-empty")]
    EmptyRow,
    #[error("all rows must share one arity (expected {expected}, got {got})")]
    ArityMismatch { expected: usize, got: usize },
}

/// Ordered list of rows with column names carried separately; names are
/// stripped before scoring.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionResult {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ExecutionResult {
    pub fn new(column_names: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self, EvalError> {
        let expected = column_names.len();
        for row in &rows {
            if row.len() != expected {
                return Err(EvalError::ArityMismatch {
                    expected,
                    got: row.len(),
                });
            }
        }
        Ok(Self { column_names, rows })
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Canonical digest of the result. Row order is folded away unless
    /// `order_sensitive`; cells use their canonical tokens, so `"3.50"` and
    /// `3.5` fingerprint identically.
    pub fn fingerprint(&self, order_sensitive: bool) -> String {
        let mut row_keys: Vec<String> = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| {
                        let t = c.canonical_token();
                        format!("{}:{}", t.len(), t)
                    })
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect();
        if !order_sensitive {
            row_keys.sort();
        }
        sha256_hex(row_keys.join("\n").as_bytes())
    }
}

/// Row-pair weight matrix `w[i][j] = row_fbeta(p_i, g_j, beta)`.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    pub w: Vec<Vec<f64>>,
    pub beta: f64,
}

impl WeightMatrix {
    pub fn build(pred: &[Vec<Cell>], gold: &[Vec<Cell>], beta: f64) -> Result<Self, EvalError> {
        let mut w = Vec::with_capacity(pred.len());
        for p in pred {
            let mut row = Vec::with_capacity(gold.len());
            for g in gold {
                row.push(row_fbeta(p, g, beta)?);
            }
            w.push(row);
        }
        Ok(Self { w, beta })
    }
}

/// Row-wise F-beta between two rows seen as cell sets:
/// precision is the fraction of predicted cells found in the gold row,
/// recall the fraction of gold cells found in the predicted row.
pub fn row_fbeta(p: &[Cell], g: &[Cell], beta: f64) -> Result<f64, EvalError> {
    assert!(beta > 0.0, "beta must be positive");
    if p.is_empty() || g.is_empty() {
        return Err(EvalError::EmptyRow);
    }
    let hits_in = |cells: &[Cell], other: &[Cell]| -> f64 {
        cells
            .iter()
            .filter(|c| other.iter().any(|o| cell_equal(c, o)))
            .count() as f64
    };
    let pre = hits_in(p, g) / p.len() as f64;
    let rec = hits_in(g, p) / g.len() as f64;
    let b2 = beta * beta;
    let denom = b2 * pre + rec;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 + b2) * pre * rec / denom)
}

/// Maximum-weight bipartite matching value (Hungarian).
pub fn wbm(w: &WeightMatrix) -> f64 {
    max_weight_matching(&w.w)
}

/// Non-intersecting maximum-weight matching value (DP over index pairs).
pub fn wbm_ni(w: &WeightMatrix) -> f64 {
    max_weight_matching_monotone(&w.w)
}

/// Bipartite F-beta score between a predicted and a gold execution result.
/// Ordered gold SQL (top-level ORDER BY) switches to the non-crossing
/// matching; the matching value is normalized by `max(|P|, |G|)`.
pub fn bfbeta_score(
    pred: &ExecutionResult,
    gold: &ExecutionResult,
    gold_sql: &str,
    beta: f64,
) -> Result<f64, EvalError> {
    bfbeta_score_with_order(pred, gold, detect_ordered(gold_sql), beta)
}

pub fn bfbeta_score_with_order(
    pred: &ExecutionResult,
    gold: &ExecutionResult,
    ordered: bool,
    beta: f64,
) -> Result<f64, EvalError> {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let w = WeightMatrix::build(&pred.rows, &gold.rows, beta)?;
    let value = if ordered { wbm_ni(&w) } else { wbm(&w) };
    Ok(value / pred.rows.len().max(gold.rows.len()) as f64)
}

/// True iff the outermost query carries an ORDER BY clause. Detection is a
/// lightweight tokenizer tracking parenthesis depth; text that cannot be
/// tokenized (unterminated strings or comments) conservatively counts as
/// ordered.
pub fn detect_ordered(sql: &str) -> bool {
    let chars: Vec<char> = sql.chars().collect();
    let n = chars.len();
    let mut i = 0usize;
    let mut depth: i64 = 0;
    let mut last_top_word: Option<String> = None;
    while i < n {
        let c = chars[i];
        match c {
            '\'' | '"' | '`' => {
                let quote = c;
                i += 1;
                loop {
                    if i >= n {
                        return true; // unterminated string
                    }
                    if chars[i] == quote {
                        // doubled quote escapes itself
                        if i + 1 < n && chars[i + 1] == quote {
                            i += 2;
                            continue;
                        }
                        break;
                    }
                    i += 1;
                }
                i += 1;
            }
            '-' if i + 1 < n && chars[i + 1] == '-' => {
                while i < n && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if i + 1 < n && chars[i + 1] == '*' => {
                i += 2;
                loop {
                    if i + 1 >= n {
                        return true; // unterminated comment
                    }
                    if chars[i] == '*' && chars[i + 1] == '/' {
                        i += 2;
                        break;
                    }
                    i += 1;
                }
            }
            '(' => {
                depth += 1;
                i += 1;
            }
            ')' => {
                depth -= 1;
                i += 1;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < n && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                if depth == 0 {
                    let word: String = chars[start..i].iter().collect::<String>().to_uppercase();
                    if word == "BY" && last_top_word.as_deref() == Some("ORDER") {
                        return true;
                    }
                    last_top_word = Some(word);
                }
            }
            _ => i += 1,
        }
    }
    false
}

/// Exact execution accuracy: multiset equality of canonicalized rows,
/// sequence equality when the gold SQL is ordered.
pub fn exact_ex(pred: &ExecutionResult, gold: &ExecutionResult, ordered: bool) -> bool {
    if pred.rows.len() != gold.rows.len() {
        return false;
    }
    let row_equal = |a: &Vec<Cell>, b: &Vec<Cell>| {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| cell_equal(x, y))
    };
    if ordered {
        pred.rows.iter().zip(&gold.rows).all(|(a, b)| row_equal(a, b))
    } else {
        fn sort_rows(rows: &[Vec<Cell>]) -> Vec<&Vec<Cell>> {
            let mut sorted: Vec<&Vec<Cell>> = rows.iter().collect();
            sorted.sort_by(|a, b| {
                let mut ord = std::cmp::Ordering::Equal;
                for (x, y) in a.iter().zip(b.iter()) {
                    ord = x.sort_cmp(y);
                    if ord != std::cmp::Ordering::Equal {
                        break;
                    }
                }
                ord.then(a.len().cmp(&b.len()))
            });
            sorted
        }
        let pa = sort_rows(&pred.rows);
        let ga = sort_rows(&gold.rows);
        pa.iter().zip(&ga).all(|(a, b)| row_equal(a, b))
    }
}
