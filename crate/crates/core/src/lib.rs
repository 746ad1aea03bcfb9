//! Knowledge-centric NL2SQL infrastructure: a maintainable knowledge base of
//! UKF records with four retrieval indices, a database profiler, an
//! execution-result evaluator, and a three-agent SQL generation workflow.
//!
//! All LLM and embedding touchpoints sit behind pluggable clients so the
//! deterministic machinery is fully testable offline.

pub mod agents;
pub mod config;
pub mod curation;
pub mod daac;
pub mod eval;
pub mod facet;
pub mod fusion;
pub mod graph;
pub mod kb;
pub mod llm;
pub mod mining;
pub mod profiler;
pub mod scalar;
pub mod text;
pub mod ukf;
pub mod vector;

/// Scalar type used by all shipped numeric surfaces (scores, weights,
/// similarities). The kernels underneath are generic over [`scalar::Scalar`].
pub type Score = f64;

use chrono::{DateTime, Utc};

/// Current UTC time, overridable through `RUBIK_NOW` (RFC 3339) for
/// reproducible runs.
pub fn now() -> DateTime<Utc> {
    if let Ok(s) = std::env::var("RUBIK_NOW") {
        if let Ok(t) = DateTime::parse_from_rfc3339(&s) {
            return t.with_timezone(&Utc);
        }
    }
    Utc::now()
}
