//! SQL generation workflow: RAG retrieval, candidate generation, refinement,
//! and test-time-scaling policies. Everything here reads the knowledge base,
//! never writes it.

pub mod rag;
pub mod tts;

pub use rag::{rag_retrieve, IndexSet, RagConfig, RagMode};
pub use tts::{cascade, majority_vote, CascadeRung, TieBreaker};

use crate::eval::batch::execute_to_result;
use crate::eval::detect_ordered;
use crate::fusion::KnowledgeBundle;
use crate::llm::{ChatMessage, GenParams, LlmClient, LlmError};
use crate::profiler::driver::{DriverError, SqlDriver};
use crate::profiler::tool::execute_sql_tool;
use crate::ukf::Context;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("response contains no SQL block")]
    NoSqlInResponse,
    #[error("all candidates failed to compile or execute")]
    AllCandidatesFailed,
    #[error("deadline exceeded with no completed candidate")]
    DeadlineWithNoCandidate,
    #[error("index unavailable: {0}")]
    IndexUnavailable(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Driver(#[from] DriverError),
}

/// One sampled SQL candidate.
#[derive(Debug, Clone)]
pub struct SqlCandidate {
    pub sql: String,
    pub cot: Option<String>,
    pub model: String,
    pub compile_ok: bool,
    /// Canonical digest of the canonicalized execution result; present iff
    /// the candidate compiled and executed successfully.
    pub exec_fingerprint: Option<String>,
    pub latency_ms: u64,
}

/// Extract the final fenced SQL block and the reasoning text before it.
pub fn parse_sql_response(response: &str) -> Result<(Option<String>, String), AgentError> {
    let mut last: Option<(usize, usize, usize)> = None; // (fence_start, sql_start, sql_end)
    let bytes = response.as_bytes();
    let mut i = 0;
    while let Some(open) = response[i..].find("```") {
        let fence_start = i + open;
        let mut body_start = fence_start + 3;
        // Optional language tag up to end of line.
        if let Some(nl) = response[body_start..].find('\n') {
            let tag = &response[body_start..body_start + nl];
            if tag.trim().chars().all(|c| c.is_ascii_alphanumeric()) {
                body_start += nl + 1;
            }
        }
        match response[body_start..].find("```") {
            Some(close) => {
                let body_end = body_start + close;
                last = Some((fence_start, body_start, body_end));
                i = body_end + 3;
            }
            None => break,
        }
        if i >= bytes.len() {
            break;
        }
    }
    let (fence_start, sql_start, sql_end) = last.ok_or(AgentError::NoSqlInResponse)?;
    let sql = response[sql_start..sql_end].trim().to_string();
    if sql.is_empty() {
        return Err(AgentError::NoSqlInResponse);
    }
    let cot = response[..fence_start].trim().to_string();
    Ok(((!cot.is_empty()).then_some(cot), sql))
}

/// Assemble the generation prompt: question, composed knowledge in bundle
/// order, then profile snippets.
pub fn build_gen_prompt(
    query: &str,
    bundle: &KnowledgeBundle,
    profile_snippets: &[String],
    ctx: &Context,
) -> Vec<ChatMessage> {
    let mut user = format!("Question: {query}\n");
    let knowledge = bundle.compose_all(ctx);
    if !knowledge.is_empty() {
        user.push_str("\nKnowledge:\n");
        for line in &knowledge {
            user.push_str(line);
            user.push('\n');
        }
    }
    if let Some(summary) = &bundle.summary {
        user.push_str("\nKnowledge summary:\n");
        user.push_str(summary);
        user.push('\n');
    }
    if !profile_snippets.is_empty() {
        user.push_str("\nDatabase profile:\n");
        for snippet in profile_snippets {
            user.push_str(snippet);
            user.push('\n');
        }
    }
    user.push_str("\nThink step by step, then output the final SQL in a ```sql fenced block.");
    vec![
        ChatMessage::system(
            "You are a SQL generation agent. Use the supplied knowledge verbatim where it \
             applies. End with exactly one fenced SQL block.",
        ),
        ChatMessage::user(user),
    ]
}

/// Dry-run compile check: EXPLAIN where the engine supports it, otherwise a
/// zero-row wrapper execution.
pub fn compile_check(db: &dyn SqlDriver, sql: &str) -> bool {
    let probe = if db.supports_explain() {
        format!("EXPLAIN {sql}")
    } else {
        format!("SELECT * FROM ({sql}) LIMIT 0")
    };
    db.query(&probe).is_ok()
}

/// Execute the candidate and fill in its fingerprint (order-sensitive only
/// when the candidate's own SQL orders its result).
pub fn execute_candidate(candidate: &mut SqlCandidate, db: &dyn SqlDriver) {
    match execute_to_result(db, &candidate.sql) {
        Ok(result) => {
            candidate.compile_ok = true;
            candidate.exec_fingerprint =
                Some(result.fingerprint(detect_ordered(&candidate.sql)));
        }
        Err(_) => {
            candidate.exec_fingerprint = None;
        }
    }
}

/// Generate one candidate from the query and retrieved bundle.
pub fn generate_sql(
    query: &str,
    bundle: &KnowledgeBundle,
    llm: &dyn LlmClient,
    params: &GenParams,
    db: Option<&dyn SqlDriver>,
    profile_snippets: &[String],
    ctx: &Context,
) -> Result<SqlCandidate, AgentError> {
    let messages = build_gen_prompt(query, bundle, profile_snippets, ctx);
    let t0 = std::time::Instant::now();
    let response = llm.complete(&messages, params)?;
    let latency_ms = t0.elapsed().as_millis() as u64;
    let (cot, sql) = parse_sql_response(&response)?;
    let compile_ok = match db {
        Some(db) => compile_check(db, &sql),
        None => false,
    };
    Ok(SqlCandidate {
        sql,
        cot,
        model: llm.name().to_string(),
        compile_ok,
        exec_fingerprint: None,
        latency_ms,
    })
}

/// Sample n candidates (distinct sample indices) and execute each.
pub fn sample_candidates(
    query: &str,
    bundle: &KnowledgeBundle,
    llm: &dyn LlmClient,
    db: &dyn SqlDriver,
    n: usize,
    base_params: &GenParams,
    ctx: &Context,
) -> Vec<SqlCandidate> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let params = GenParams {
            sample_index: i,
            ..base_params.clone()
        };
        match generate_sql(query, bundle, llm, &params, Some(db), &[], ctx) {
            Ok(mut cand) => {
                if cand.compile_ok {
                    execute_candidate(&mut cand, db);
                }
                out.push(cand);
            }
            Err(_) => out.push(SqlCandidate {
                sql: String::new(),
                cot: None,
                model: llm.name().to_string(),
                compile_ok: false,
                exec_fingerprint: None,
                latency_ms: 0,
            }),
        }
    }
    out
}

/// Verify and, on error or empty result, iteratively repair a candidate.
/// Returns the last compiling candidate, or the input untouched.
pub fn refine_sql(
    query: &str,
    candidate: SqlCandidate,
    bundle: &KnowledgeBundle,
    db: &dyn SqlDriver,
    llm: &dyn LlmClient,
    max_rounds: usize,
    ctx: &Context,
) -> SqlCandidate {
    let max_rows = 50;
    let mut current = candidate;
    let verdict = execute_sql_tool(db, &current.sql, max_rows);
    let mut feedback = match verdict {
        Ok(result) if !result.is_error() && !result.rows.is_empty() => {
            current.compile_ok = true;
            execute_candidate(&mut current, db);
            return current;
        }
        Ok(result) => result.render(),
        Err(e) => e.to_string(),
    };
    let mut best = current.clone();
    for round in 0..max_rounds {
        let messages = vec![
            ChatMessage::system(
                "You are a SQL refinement agent. Fix the SQL using the execution feedback. \
                 Reply with one fenced SQL block.",
            ),
            ChatMessage::user(format!(
                "Question: {query}\n\nKnowledge:\n{}\n\nCurrent SQL:\n```sql\n{}\n```\n\nExecution feedback:\n{feedback}",
                bundle.compose_all(ctx).join("\n"),
                current.sql
            )),
        ];
        let params = GenParams {
            sample_index: round,
            ..Default::default()
        };
        let Ok(response) = llm.complete(&messages, &params) else {
            break;
        };
        let Ok((cot, sql)) = parse_sql_response(&response) else {
            continue;
        };
        current = SqlCandidate {
            sql,
            cot: cot.or(current.cot),
            model: current.model.clone(),
            compile_ok: false,
            exec_fingerprint: None,
            latency_ms: current.latency_ms,
        };
        match execute_sql_tool(db, &current.sql, max_rows) {
            Ok(result) if !result.is_error() => {
                current.compile_ok = true;
                execute_candidate(&mut current, db);
                best = current.clone();
                if !result.rows.is_empty() {
                    return current;
                }
                feedback = result.render();
            }
            Ok(result) => feedback = result.render(),
            Err(e) => feedback = e.to_string(),
        }
    }
    best
}
