//! Test-time scaling: execution-verified majority voting and the cascading
//! ladder that returns as soon as two execution results agree.

use super::{generate_sql, execute_candidate, AgentError, SqlCandidate};
use crate::fusion::KnowledgeBundle;
use crate::llm::{ChatMessage, GenParams, LlmClient};
use crate::profiler::driver::DriverFactory;
use crate::ukf::Context;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Tie policy when several fingerprint groups share the top vote count.
pub enum TieBreaker<'a> {
    /// The group holding the earliest-completed (lowest-latency) candidate.
    FirstCompleted,
    /// An LLM compares the tied SQL texts.
    LlmJudge(&'a dyn LlmClient),
    /// User-supplied preference over candidates (higher ranks win).
    UserPref(&'a dyn Fn(&SqlCandidate) -> i64),
}

/// Group compiling candidates by execution fingerprint and return a
/// representative of the largest group (earliest by latency within a group).
pub fn majority_vote(
    candidates: &[SqlCandidate],
    tie_breaker: TieBreaker,
) -> Result<SqlCandidate, AgentError> {
    assert!(!candidates.is_empty(), "candidates must be non-empty");
    let mut groups: BTreeMap<&str, Vec<&SqlCandidate>> = BTreeMap::new();
    for cand in candidates {
        if let Some(fp) = cand.exec_fingerprint.as_deref() {
            groups.entry(fp).or_default().push(cand);
        }
    }
    if groups.is_empty() {
        return Err(AgentError::AllCandidatesFailed);
    }
    let top_size = groups.values().map(Vec::len).max().unwrap();
    let mut tied: Vec<&Vec<&SqlCandidate>> = groups
        .values()
        .filter(|g| g.len() == top_size)
        .collect();

    let winner: &Vec<&SqlCandidate> = if tied.len() == 1 {
        tied[0]
    } else {
        match tie_breaker {
            TieBreaker::FirstCompleted => {
                let tied_fps: std::collections::BTreeSet<&str> = tied
                    .iter()
                    .map(|g| g[0].exec_fingerprint.as_deref().unwrap())
                    .collect();
                // Lowest-latency member across tied groups, stable on ties.
                let mut best: Option<&SqlCandidate> = None;
                for c in candidates {
                    if let Some(fp) = c.exec_fingerprint.as_deref() {
                        if tied_fps.contains(fp)
                            && best.map_or(true, |b| c.latency_ms < b.latency_ms)
                        {
                            best = Some(c);
                        }
                    }
                }
                let fp = best.expect("tied groups are non-empty").exec_fingerprint.as_deref();
                tied.iter()
                    .find(|g| g[0].exec_fingerprint.as_deref() == fp)
                    .unwrap()
            }
            TieBreaker::LlmJudge(judge) => {
                let listing: Vec<String> = tied
                    .iter()
                    .enumerate()
                    .map(|(i, g)| format!("Option {i}:\n```sql\n{}\n```", g[0].sql))
                    .collect();
                let prompt = format!(
                    "Several SQL candidates tie on execution-result votes. Pick the best one. \
                     Reply with only the option number.\n\n{}",
                    listing.join("\n\n")
                );
                let choice = judge
                    .complete(&[ChatMessage::user(prompt)], &GenParams::default())
                    .ok()
                    .and_then(|r| r.trim().parse::<usize>().ok())
                    .filter(|i| *i < tied.len())
                    .unwrap_or(0);
                tied[choice]
            }
            TieBreaker::UserPref(rank) => {
                tied.sort_by_key(|g| std::cmp::Reverse(rank(g[0])));
                tied[0]
            }
        }
    };
    let representative = winner
        .iter()
        .min_by_key(|c| c.latency_ms)
        .expect("non-empty group");
    Ok((*representative).clone())
}

#[derive(Debug, Clone)]
pub struct CascadeRung {
    pub model: String,
    pub n_samples: usize,
}

/// Resolve model names to clients for cascade rungs.
pub trait ModelRegistry: Send + Sync {
    fn client(&self, model: &str) -> Option<Arc<dyn LlmClient>>;
}

impl ModelRegistry for BTreeMap<String, Arc<dyn LlmClient>> {
    fn client(&self, model: &str) -> Option<Arc<dyn LlmClient>> {
        self.get(model).cloned()
    }
}

/// Run every rung concurrently; the first pair of agreeing execution
/// fingerprints anywhere wins. Losing workers receive a cooperative
/// cancellation signal (polled between tool calls) and are left to wind
/// down without blocking the caller. A single-rung ladder degenerates to
/// majority voting over its samples. On deadline, falls back to a
/// best-effort majority over the candidates completed so far.
pub fn cascade(
    ladder: &[CascadeRung],
    query: &str,
    bundle: &KnowledgeBundle,
    db_factory: Arc<dyn DriverFactory>,
    models: Arc<dyn ModelRegistry>,
    deadline_ms: u64,
    ctx: &Context,
) -> Result<SqlCandidate, AgentError> {
    assert!(!ladder.is_empty(), "ladder must be non-empty");
    for rung in ladder {
        assert!(rung.n_samples >= 2, "each rung needs n >= 2 samples");
    }

    let cancel = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel::<SqlCandidate>();
    let started = Instant::now();
    let mut spawned = 0usize;

    for rung in ladder {
        let Some(llm) = models.client(&rung.model) else {
            continue;
        };
        for sample in 0..rung.n_samples {
            spawned += 1;
            let tx = tx.clone();
            let cancel = Arc::clone(&cancel);
            let llm = Arc::clone(&llm);
            let bundle = bundle.clone();
            let ctx = ctx.clone();
            let query = query.to_string();
            let factory = Arc::clone(&db_factory);
            std::thread::spawn(move || {
                if cancel.load(Ordering::SeqCst) {
                    return;
                }
                let params = GenParams {
                    sample_index: sample,
                    ..Default::default()
                };
                let Ok(db) = factory.connect() else { return };
                let Ok(mut cand) = generate_sql(
                    &query,
                    &bundle,
                    llm.as_ref(),
                    &params,
                    Some(db.as_ref()),
                    &[],
                    &ctx,
                ) else {
                    return;
                };
                if cancel.load(Ordering::SeqCst) {
                    return;
                }
                if cand.compile_ok {
                    execute_candidate(&mut cand, db.as_ref());
                }
                let _ = tx.send(cand);
            });
        }
    }
    drop(tx);
    if spawned == 0 {
        return Err(AgentError::AllCandidatesFailed);
    }

    let single_rung = ladder.len() == 1;
    let mut completed: Vec<SqlCandidate> = Vec::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let deadline = Duration::from_millis(deadline_ms);
    loop {
        let elapsed = started.elapsed();
        if elapsed >= deadline {
            cancel.store(true, Ordering::SeqCst);
            if completed.is_empty() {
                return Err(AgentError::DeadlineWithNoCandidate);
            }
            return majority_vote(&completed, TieBreaker::FirstCompleted);
        }
        match rx.recv_timeout(deadline - elapsed) {
            Ok(cand) => {
                if let Some(fp) = cand.exec_fingerprint.clone() {
                    let count = counts.entry(fp.clone()).or_insert(0);
                    *count += 1;
                    if *count >= 2 && !single_rung {
                        cancel.store(true, Ordering::SeqCst);
                        // Earliest completion holding the agreeing result.
                        let winner = completed
                            .iter()
                            .find(|c| c.exec_fingerprint.as_deref() == Some(fp.as_str()))
                            .cloned()
                            .unwrap_or(cand);
                        return Ok(winner);
                    }
                }
                completed.push(cand);
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                if completed.is_empty() {
                    return Err(AgentError::AllCandidatesFailed);
                }
                return majority_vote(&completed, TieBreaker::FirstCompleted);
            }
            Err(mpsc::RecvTimeoutError::Timeout) => {
                cancel.store(true, Ordering::SeqCst);
                if completed.is_empty() {
                    return Err(AgentError::DeadlineWithNoCandidate);
                }
                return majority_vote(&completed, TieBreaker::FirstCompleted);
            }
        }
    }
}
