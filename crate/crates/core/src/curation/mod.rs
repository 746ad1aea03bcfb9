//! Query augmentation and distillation-data curation: SQL profiling with
//! comment headers, CoT generation with repair, hardness/quality/diversity
//! scoring, top-k selection, and deterministic query synthesis.

pub mod synthesis;

pub use synthesis::{
    synthesize_composed, synthesize_decomposed, query_transfer, CteTemplate, Indicator, Ontology,
};

use crate::eval::batch::execute_to_result;
use crate::llm::{ChatMessage, GenParams, LlmClient, LlmError};
use crate::profiler::driver::SqlDriver;
use crate::vector::{cosine, Embedder};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("SQL fails to execute: {0}")]
    SqlFails(String),
    #[error("judge or generator unavailable: {0}")]
    ProviderUnavailable(String),
}

impl From<LlmError> for CurationError {
    fn from(e: LlmError) -> Self {
        CurationError::ProviderUnavailable(e.to_string())
    }
}

/// An NL-SQL pair enriched with a comment header and inline clause comments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfiledSql {
    pub nl: String,
    pub query_time: DateTime<Utc>,
    pub result_schema: Vec<String>,
    pub knowledge_summary: Vec<String>,
    pub header_comment: String,
    pub commented_sql: String,
    pub corner_cases: Vec<String>,
}

/// Strip `--` line comments and `/* */` blocks (string literals respected).
pub fn strip_sql_comments(sql: &str) -> String {
    let chars: Vec<char> = sql.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\'' | '"' => {
                let quote = c;
                out.push(c);
                i += 1;
                while i < chars.len() {
                    out.push(chars[i]);
                    if chars[i] == quote {
                        i += 1;
                        break;
                    }
                    i += 1;
                }
            }
            '-' if i + 1 < chars.len() && chars[i + 1] == '-' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if i + 1 < chars.len() && chars[i + 1] == '*' => {
                i += 2;
                while i + 1 < chars.len() && !(chars[i] == '*' && chars[i + 1] == '/') {
                    i += 1;
                }
                i = (i + 2).min(chars.len());
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out.trim().to_string()
}

fn deterministic_header(
    nl: &str,
    query_time: DateTime<Utc>,
    result_schema: &[String],
    knowledge: &[String],
) -> String {
    let schema = result_schema
        .iter()
        .map(|c| format!("\"{c}\""))
        .collect::<Vec<_>>()
        .join(", ");
    let mut header = format!(
        "-- User Query: {nl}\n-- Query Time: {}\n-- Expected SQL Result Schema: ({schema})\n",
        query_time.format("%Y-%m-%d")
    );
    header.push_str("-- Key steps/corner-cases/knowledge/formula:\n");
    for (i, line) in knowledge.iter().enumerate() {
        header.push_str(&format!("-- {}. {line}\n", i + 1));
    }
    header
}

/// Profile a SQL statement: deterministic header (query time, result schema,
/// knowledge summary) plus LLM-written commentary, validated by re-execution
/// equivalence. A commentary that changes the result is retried once, then
/// dropped in favor of the deterministic header over the raw SQL.
pub fn profile_sql(
    nl: &str,
    sql: &str,
    query_time: DateTime<Utc>,
    knowledge_summary: &[String],
    db: &dyn SqlDriver,
    llm: Option<&dyn LlmClient>,
) -> Result<ProfiledSql, CurationError> {
    let original = execute_to_result(db, sql).map_err(CurationError::SqlFails)?;
    let result_schema = original.column_names.clone();
    let ordered = crate::eval::detect_ordered(sql);
    let original_fp = original.fingerprint(ordered);
    let header = deterministic_header(nl, query_time, &result_schema, knowledge_summary);

    let mut commented = format!("{header}{sql}");
    if let Some(llm) = llm {
        let mut attempt_feedback = String::new();
        for round in 0..2 {
            let prompt = format!(
                "Rewrite this SQL with (1) the given analysis header kept verbatim on top, \
                 extended with a concise description and key corner cases (NULL, zero division), \
                 and (2) an inline comment for each clause. Do not change what the SQL computes.\
                 {attempt_feedback}\n\nUser query: {nl}\n\nHeader:\n{header}\nSQL:\n{sql}\n\n\
                 Reply with the commented SQL only, in a ```sql fenced block."
            );
            let params = GenParams {
                sample_index: round,
                ..Default::default()
            };
            let Ok(response) = llm.complete(&[ChatMessage::user(prompt)], &params) else {
                break;
            };
            let candidate = match crate::agents::parse_sql_response(&response) {
                Ok((_, sql_block)) => sql_block,
                Err(_) => response.trim().to_string(),
            };
            let stripped = strip_sql_comments(&candidate);
            match execute_to_result(db, &stripped) {
                Ok(result) if result.fingerprint(ordered) == original_fp => {
                    commented = candidate;
                    break;
                }
                _ => {
                    attempt_feedback =
                        " The previous attempt changed the SQL's result; keep it identical."
                            .to_string();
                }
            }
        }
    }

    let corner_cases = commented
        .lines()
        .filter(|l| {
            let lower = l.to_lowercase();
            lower.starts_with("--") && (lower.contains("corner") || lower.contains("null"))
        })
        .map(|l| l.trim_start_matches('-').trim().to_string())
        .collect();

    Ok(ProfiledSql {
        nl: nl.to_string(),
        query_time,
        result_schema,
        knowledge_summary: knowledge_summary.to_vec(),
        header_comment: header,
        commented_sql: commented,
        corner_cases,
    })
}

/// Generate a reasoning trace and SQL for a gold pair; on mismatch the model
/// revises its trace with the gold SQL as reference and is re-verified by
/// completing SQL from the revised trace alone.
pub fn generate_cot(
    nl: &str,
    gold_sql: &str,
    knowledge: &[String],
    rlm: &dyn LlmClient,
    db: &dyn SqlDriver,
    max_repairs: usize,
) -> Result<(String, String, bool), CurationError> {
    let gold = execute_to_result(db, gold_sql).map_err(CurationError::SqlFails)?;
    let gold_fp = gold.fingerprint(crate::eval::detect_ordered(gold_sql));
    let matches_gold = |sql: &str| -> bool {
        execute_to_result(db, sql)
            .map(|r| r.fingerprint(crate::eval::detect_ordered(gold_sql)) == gold_fp)
            .unwrap_or(false)
    };

    let knowledge_block = knowledge.join("\n");
    let first = rlm.complete(
        &[ChatMessage::user(format!(
            "Question: {nl}\nKnowledge:\n{knowledge_block}\n\nReason step by step, then output \
             the final SQL in a ```sql fenced block."
        ))],
        &GenParams::default(),
    )?;
    let (cot, sql) = match crate::agents::parse_sql_response(&first) {
        Ok((cot, sql)) => (cot.unwrap_or_default(), sql),
        Err(_) => (first.clone(), String::new()),
    };
    if !sql.is_empty() && matches_gold(&sql) {
        return Ok((cot, sql, true));
    }

    let mut last = (cot, sql, false);
    for repair in 0..max_repairs {
        let revise = rlm.complete(
            &[ChatMessage::user(format!(
                "Your SQL did not reproduce the reference result. Modify your reasoning with \
                 minimal adjustments, using the ground-truth SQL as a reference. Reply with the \
                 revised reasoning only.\n\nQuestion: {nl}\nGround truth SQL:\n{gold_sql}\n\
                 Previous reasoning:\n{}",
                last.0
            ))],
            &GenParams {
                sample_index: repair,
                ..Default::default()
            },
        )?;
        let revised_cot = revise.trim().to_string();
        // Continued inference: the SQL must follow from the revised trace.
        let continued = rlm.complete(
            &[
                ChatMessage::user(format!(
                    "Question: {nl}\nKnowledge:\n{knowledge_block}\n\nComplete the SQL for this \
                     reasoning. Reply with a ```sql fenced block only."
                )),
                ChatMessage::assistant(revised_cot.clone()),
            ],
            &GenParams {
                sample_index: repair,
                ..Default::default()
            },
        )?;
        if let Ok((_, sql)) = crate::agents::parse_sql_response(&continued) {
            let verified = matches_gold(&sql);
            last = (revised_cot, sql, verified);
            if verified {
                return Ok(last);
            }
        } else {
            last = (revised_cot, last.1, false);
        }
    }
    Ok(last)
}

/// Number of models that failed to produce a correct SQL.
pub fn hardness(outcomes: &[bool]) -> f64 {
    outcomes.iter().filter(|ok| !**ok).count() as f64
}

/// Whitespace token count; the default brevity counter.
pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

pub const QUALITY_JUDGE_DIMS: [&str; 6] = [
    "information_completeness",
    "robustness",
    "sql_structure_clarity",
    "example_referencing",
    "structured_thinking",
    "non_repetitiveness",
];

/// Judge-scored quality over seven dimensions. Six come from the LLM judge
/// (clamped to [0, 10]); brevity is deterministic:
/// `10 * clamp(1 - tokens / t_max, 0, 1)`.
pub fn quality(
    cot: &str,
    judge: &dyn LlmClient,
    token_counter: &dyn Fn(&str) -> usize,
    t_max: usize,
) -> Result<(f64, BTreeMap<String, f64>), CurationError> {
    let tokens = token_counter(cot) as f64;
    let brevity = 10.0 * (1.0 - tokens / t_max.max(1) as f64).clamp(0.0, 1.0);

    let prompt = format!(
        "Score this reasoning trace on six dimensions ({}), each 0-10. Across many traces your \
         scores should follow a roughly normal distribution. Reply with a JSON object mapping \
         dimension to score.\n\nTrace:\n{cot}",
        QUALITY_JUDGE_DIMS.join(", ")
    );
    let response = judge.complete(&[ChatMessage::user(prompt)], &GenParams::default())?;
    let doc: Value = serde_json::from_str(response.trim())
        .map_err(|e| CurationError::ProviderUnavailable(format!("judge reply not JSON: {e}")))?;
    let mut dims = BTreeMap::new();
    for dim in QUALITY_JUDGE_DIMS {
        let score = doc
            .get(dim)
            .and_then(Value::as_f64)
            .unwrap_or(0.0)
            .clamp(0.0, 10.0);
        dims.insert(dim.to_string(), score);
    }
    dims.insert("brevity".to_string(), brevity);
    let q: f64 = dims.values().sum();
    Ok((q, dims))
}

/// Per-query mean cosine distance to its k nearest neighbors.
pub fn diversity(queries: &[String], k: usize, embedder: &dyn Embedder) -> Vec<f64> {
    assert!(
        k < queries.len(),
        "k must be smaller than the number of queries"
    );
    let vectors: Vec<Vec<f64>> = queries.iter().map(|q| embedder.embed(q)).collect();
    (0..queries.len())
        .map(|i| {
            let mut distances: Vec<f64> = (0..queries.len())
                .filter(|&j| j != i)
                .map(|j| 1.0 - cosine(&vectors[i], &vectors[j]))
                .collect();
            distances.sort_by(f64::total_cmp);
            distances.iter().take(k).sum::<f64>() / k as f64
        })
        .collect()
}

/// One NL-CoT-SQL tuple with its curation scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurationRecord {
    pub nl: String,
    pub cot: String,
    pub sql: String,
    #[serde(default)]
    pub model_outcomes: Vec<(String, bool)>,
    #[serde(rename = "H")]
    pub hardness: f64,
    #[serde(rename = "Q")]
    pub quality: f64,
    #[serde(rename = "V")]
    pub diversity: f64,
    #[serde(rename = "B", default)]
    pub tie_break: f64,
    #[serde(rename = "S", default)]
    pub total: f64,
    #[serde(default)]
    pub quality_dims: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta_q: f64,
    pub gamma: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta_q: 1.0,
            gamma: 1.0,
        }
    }
}

pub fn total_score(record: &CurationRecord, coeff: &Coefficients) -> f64 {
    coeff.alpha * record.hardness
        + coeff.beta_q * record.quality
        + coeff.gamma * record.diversity
        + record.tie_break
}

/// Score and keep the top-budget records by total score, descending; exact
/// ties resolve by the tie-break value, then stay in input order.
pub fn select_top(
    mut records: Vec<CurationRecord>,
    coeff: &Coefficients,
    tie_breaker: Option<&dyn Fn(&CurationRecord) -> f64>,
    budget: usize,
) -> Vec<CurationRecord> {
    for c in [coeff.alpha, coeff.beta_q, coeff.gamma] {
        assert!((0.0..=1.0).contains(&c), "coefficients must lie in [0, 1]");
    }
    for record in records.iter_mut() {
        if let Some(tb) = tie_breaker {
            record.tie_break = tb(record);
        }
        record.total = total_score(record, coeff);
    }
    let mut indexed: Vec<(usize, CurationRecord)> = records.into_iter().enumerate().collect();
    indexed.sort_by(|(ia, a), (ib, b)| {
        b.total
            .total_cmp(&a.total)
            .then_with(|| b.tie_break.total_cmp(&a.tie_break))
            .then_with(|| ia.cmp(ib))
    });
    indexed
        .into_iter()
        .take(budget)
        .map(|(_, r)| r)
        .collect()
}

#[cfg(test)]
mod tests;
