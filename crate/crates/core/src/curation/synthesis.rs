//! Deterministic query synthesis: CTE composition templates, CTE-based
//! decomposition, and structure-preserving query transfer. LLMs supply the
//! natural-language side; every output is filtered to executable SQLs with
//! meaningful (non-empty, non-all-NULL) results.

use crate::eval::batch::execute_to_result;
use crate::eval::Cell;
use crate::llm::{ChatMessage, GenParams, LlmClient};
use crate::mining::parse_sql_ast;
use crate::profiler::driver::SqlDriver;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CteTemplate {
    With,
    Union,
    Join,
}

/// Domain formula applied by the WITH template, e.g.
/// `Indicator { name: "profit", expr: "revenue - cost", inputs: [revenue, cost] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Indicator {
    pub name: String,
    pub expr: String,
    pub inputs: Vec<String>,
}

/// Taxonomy groups of predicates; composition never draws two predicates
/// from the same group, which is what rules out conflicting filters.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Ontology {
    pub groups: BTreeMap<String, Vec<String>>,
}

/// Result is meaningful when it has at least one row and one non-NULL cell.
pub fn meaningful(db: &dyn SqlDriver, sql: &str) -> bool {
    match execute_to_result(db, sql) {
        Ok(result) => {
            !result.rows.is_empty()
                && result
                    .rows
                    .iter()
                    .any(|row| row.iter().any(|c| !matches!(c, Cell::Null)))
        }
        Err(_) => false,
    }
}

fn ask_nl(llm: &dyn LlmClient, sql: &str, seeds: &[&str]) -> String {
    let prompt = format!(
        "Write the natural-language question this SQL answers, combining the intents of the \
         source questions {seeds:?}. Reply with the question only.\n\n```sql\n{sql}\n```"
    );
    llm.complete(&[ChatMessage::user(prompt)], &GenParams::default())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|_| format!("Composed query over {} sources", seeds.len()))
}

fn scalar_result(db: &dyn SqlDriver, sql: &str) -> bool {
    execute_to_result(db, sql)
        .map(|r| r.rows.len() == 1 && r.column_names.len() == 1)
        .unwrap_or(false)
}

/// Compose seed SQLs according to a CTE template. Predicates, when drawn,
/// come from distinct ontology groups chosen by a seeded RNG.
pub fn synthesize_composed(
    seeds: &[(String, String)],
    template: CteTemplate,
    ontology: &Ontology,
    indicator: Option<&Indicator>,
    llm: &dyn LlmClient,
    db: &dyn SqlDriver,
    rng_seed: u64,
) -> Vec<(String, String)> {
    let mut rng = StdRng::seed_from_u64(rng_seed);
    let mut out = Vec::new();
    match template {
        CteTemplate::With => {
            let Some(ind) = indicator else {
                return out;
            };
            if seeds.len() < ind.inputs.len() {
                return out;
            }
            // Inputs bind to seeds positionally; every bound seed must be scalar.
            if !seeds
                .iter()
                .take(ind.inputs.len())
                .all(|(_, sql)| scalar_result(db, sql))
            {
                return out;
            }
            let ctes: Vec<String> = ind
                .inputs
                .iter()
                .zip(seeds)
                .map(|(input, (_, sql))| format!("{input} AS ({sql})"))
                .collect();
            let mut expr = ind.expr.clone();
            for input in &ind.inputs {
                expr = expr.replace(input, &format!("(SELECT * FROM {input})"));
            }
            let sql = format!(
                "WITH {} SELECT {expr} AS {}",
                ctes.join(", "),
                ind.name
            );
            if meaningful(db, &sql) {
                let seed_nls: Vec<&str> = seeds
                    .iter()
                    .take(ind.inputs.len())
                    .map(|(nl, _)| nl.as_str())
                    .collect();
                out.push((ask_nl(llm, &sql, &seed_nls), sql));
            }
        }
        CteTemplate::Union => {
            for i in 0..seeds.len() {
                for j in (i + 1)..seeds.len() {
                    let (a, b) = (&seeds[i], &seeds[j]);
                    if crate::eval::detect_ordered(&a.1) || crate::eval::detect_ordered(&b.1) {
                        continue;
                    }
                    let arity = |sql: &str| {
                        execute_to_result(db, sql)
                            .map(|r| r.column_names.len())
                            .unwrap_or(0)
                    };
                    if arity(&a.1) == 0 || arity(&a.1) != arity(&b.1) {
                        continue;
                    }
                    let sql = format!(
                        "SELECT * FROM ({}) UNION SELECT * FROM ({})",
                        a.1, b.1
                    );
                    if meaningful(db, &sql) {
                        out.push((ask_nl(llm, &sql, &[&a.0, &b.0]), sql));
                    }
                }
            }
        }
        CteTemplate::Join => {
            for i in 0..seeds.len() {
                for j in (i + 1)..seeds.len() {
                    let (a, b) = (&seeds[i], &seeds[j]);
                    let cols = |sql: &str| {
                        execute_to_result(db, sql)
                            .map(|r| r.column_names)
                            .unwrap_or_default()
                    };
                    let ca = cols(&a.1);
                    let cb = cols(&b.1);
                    let Some(common) = ca.iter().find(|c| cb.contains(c)) else {
                        continue;
                    };
                    let mut sql = format!(
                        "WITH left_q AS ({}), right_q AS ({}) SELECT * FROM left_q JOIN right_q USING (\"{common}\")",
                        a.1, b.1
                    );
                    // At most one predicate per ontology group, groups drawn
                    // at random without replacement.
                    let mut group_names: Vec<&String> = ontology.groups.keys().collect();
                    group_names.shuffle(&mut rng);
                    let picked: Vec<String> = group_names
                        .iter()
                        .take(2)
                        .filter_map(|g| {
                            let preds = &ontology.groups[*g];
                            preds.choose(&mut rng).cloned()
                        })
                        .collect();
                    if !picked.is_empty() {
                        sql.push_str(&format!(" WHERE {}", picked.join(" AND ")));
                    }
                    if meaningful(db, &sql) {
                        out.push((ask_nl(llm, &sql, &[&a.0, &b.0]), sql));
                    }
                }
            }
        }
    }
    out
}

/// Decompose a complex query into executable sub-queries, one per CTE, with
/// LLM-proposed sub-questions.
pub fn synthesize_decomposed(
    nl: &str,
    sql: &str,
    llm: &dyn LlmClient,
    db: &dyn SqlDriver,
) -> Vec<(String, String)> {
    let Ok(ast) = parse_sql_ast(sql) else {
        return Vec::new();
    };
    let bodies = ast.cte_bodies();
    let mut out = Vec::new();
    for (i, (name, _)) in bodies.iter().enumerate() {
        let sub_sql = if i == 0 {
            bodies[0].1.clone()
        } else {
            let prefix: Vec<String> = bodies[..=i]
                .iter()
                .map(|(n, q)| format!("{n} AS ({q})"))
                .collect();
            format!("WITH {} SELECT * FROM {name}", prefix.join(", "))
        };
        if execute_to_result(db, &sub_sql).is_err() {
            continue;
        }
        let prompt = format!(
            "The question {nl:?} is answered by a larger SQL. Write the simpler sub-question \
             answered by this part (the `{name}` step). Reply with the question only.\n\n\
             ```sql\n{sub_sql}\n```"
        );
        let sub_nl = llm
            .complete(&[ChatMessage::user(prompt)], &GenParams::default())
            .map(|s| s.trim().to_string())
            .unwrap_or_else(|_| format!("Sub-question for step {name}"));
        out.push((sub_nl, sub_sql));
    }
    out
}

/// Propose structure-preserving SQLs against a target schema and keep those
/// that execute with meaningful results; questions come from an SQL-to-NL
/// prompt.
pub fn query_transfer(
    source_pair: &(String, String),
    target_db: &dyn SqlDriver,
    target_schema: &str,
    llm: &dyn LlmClient,
) -> Vec<(String, String)> {
    let (src_nl, src_sql) = source_pair;
    let prompt = format!(
        "Rewrite this SQL so it runs on the target database while keeping a similar structure. \
         Reply with a JSON array of candidate SQL strings.\n\nSource question: {src_nl}\n\
         Source SQL:\n{src_sql}\n\nTarget schema:\n{target_schema}"
    );
    let Ok(response) = llm.complete(&[ChatMessage::user(prompt)], &GenParams::default()) else {
        return Vec::new();
    };
    let candidates: Vec<String> = serde_json::from_str(response.trim()).unwrap_or_default();
    let mut out = Vec::new();
    for sql in candidates {
        if !meaningful(target_db, &sql) {
            continue;
        }
        let nl_prompt = format!(
            "Write the natural-language question answered by this SQL, in the spirit of the \
             original question {src_nl:?}. Reply with the question only.\n\n```sql\n{sql}\n```"
        );
        let nl = llm
            .complete(&[ChatMessage::user(nl_prompt)], &GenParams::default())
            .map(|s| s.trim().to_string())
            .unwrap_or_else(|_| src_nl.clone());
        out.push((nl, sql));
    }
    out
}
