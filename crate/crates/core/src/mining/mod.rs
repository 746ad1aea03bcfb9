//! Offline knowledge mining: structured extraction over documents, labeled
//! NL-SQL pair mining, and agentic mining over unlabeled queries with schema
//! and probe-execution verification.

pub mod ast;

pub use ast::{parse_sql_ast, PredicateTriple, SqlAst};

use crate::eval::batch::execute_to_result;
use crate::kb::KnowledgeBase;
use crate::llm::{ChatMessage, GenParams, LlmClient, LlmError};
use crate::profiler::driver::{quote_ident, SqlDriver};
use crate::ukf::{template, UkfRecord};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("unparsable SQL: {0}")]
    UnparsableSql(String),
    #[error("gold SQL fails to execute: {0}")]
    GoldSqlFails(String),
    #[error("extraction provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("tool budget exhausted after {spent} calls")]
    BudgetExhausted {
        spent: usize,
        partial: Vec<MinedEntry>,
    },
}

impl From<LlmError> for MiningError {
    fn from(e: LlmError) -> Self {
        MiningError::ProviderUnavailable(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    SchemaVerified,
    ExecutionVerified,
    Unverified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evidence {
    pub query: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sql: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MinedEntry {
    pub candidate: UkfRecord,
    pub evidence: Evidence,
    pub verification: Verification,
}

/// Entries safe to hand to the merge policy: anything unverified stays out.
pub fn to_merge_batch(entries: &[MinedEntry]) -> Vec<UkfRecord> {
    entries
        .iter()
        .filter(|e| e.verification != Verification::Unverified)
        .map(|e| e.candidate.clone())
        .collect()
}

/// Outcome of structured information extraction over one document chunk.
#[derive(Debug, Default)]
pub struct SieOutcome {
    pub records: Vec<UkfRecord>,
    pub dropped: usize,
}

/// Extract structured records from a document chunk via the pluggable LLM.
/// Malformed items are dropped with a warning count; valid items are
/// instantiated through the named templates.
pub fn sie_extract(
    document_chunk: &str,
    llm: &dyn LlmClient,
    template_names: &[&str],
) -> Result<SieOutcome, MiningError> {
    if document_chunk.trim().is_empty() {
        return Ok(SieOutcome::default());
    }
    let prompt = format!(
        "Extract knowledge records from the document chunk below. Reply with a JSON array; \
         each item: {{\"template\": one of {template_names:?}, \"name\": string, \
         \"content\": string, \"synonyms\": [string], \"tags\": [string], \
         \"content_resources\": object}}.\n\nDocument chunk:\n{document_chunk}"
    );
    let response = llm.complete(&[ChatMessage::user(prompt)], &GenParams::default())?;
    let items: Vec<Value> = serde_json::from_str(response.trim()).unwrap_or_default();
    let mut outcome = SieOutcome::default();
    for item in items {
        let template_name = item
            .get("template")
            .and_then(Value::as_str)
            .unwrap_or("Knowledge")
            .to_string();
        let Some(tpl) = template::template(&template_name) else {
            outcome.dropped += 1;
            continue;
        };
        let mut spec = item.clone();
        if let Some(obj) = spec.as_object_mut() {
            obj.remove("template");
            obj.insert("source".into(), json!("auto"));
        }
        match tpl.instantiate(spec) {
            Ok(record) => outcome.records.push(record),
            Err(e) => {
                log::warn!("dropping malformed extraction item: {e}");
                outcome.dropped += 1;
            }
        }
    }
    Ok(outcome)
}

fn table_exists(db: &dyn SqlDriver, table: &str) -> bool {
    db.table_names().map(|t| t.iter().any(|n| n == table)).unwrap_or(false)
}

fn column_exists(db: &dyn SqlDriver, table: &str, column: &str) -> bool {
    db.columns(table)
        .map(|cols| cols.iter().any(|c| c.name == column))
        .unwrap_or(false)
}

/// Cheap existence probe for an enum value.
fn probe_enum(db: &dyn SqlDriver, table: &str, column: &str, value: &str) -> bool {
    let sql = format!(
        "SELECT 1 FROM {} WHERE {} = '{}' LIMIT 1",
        quote_ident(table),
        quote_ident(column),
        value.replace('\'', "''")
    );
    db.query(&sql).map(|r| !r.rows.is_empty()).unwrap_or(false)
}

/// One extraction item as produced by the LLM (and the pseudo-label path).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
pub struct EntityCandidate {
    pub kind: String,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    #[serde(default)]
    pub table: Option<String>,
    #[serde(default)]
    pub column: Option<String>,
    #[serde(default)]
    pub value: Option<String>,
    #[serde(default)]
    pub sql: Option<String>,
}

fn candidate_record(c: &EntityCandidate, kb: Option<&KnowledgeBase>) -> Option<UkfRecord> {
    let kind = c.kind.to_lowercase();
    if kind == "synonym" {
        // Attach synonyms to an existing record when one matches by name; the
        // identical identity and content make merge rule 1 union them in.
        if let Some(kb) = kb {
            if let Some(existing) = kb.live_records().find(|r| r.name == c.name) {
                let mut doc = serde_json::to_value(existing).ok()?;
                let obj = doc.as_object_mut()?;
                let mut syns: Vec<String> = existing.synonyms.iter().cloned().collect();
                syns.extend(c.synonyms.iter().cloned());
                obj.insert("synonyms".into(), json!(syns));
                return UkfRecord::from_value(doc).ok();
            }
        }
    }
    let tpl = template::template(&kind).or_else(|| template::template("Knowledge"))?;
    let mut tags: Vec<String> = Vec::new();
    if let Some(t) = &c.table {
        tags.push(format!("[TABLE:{t}]"));
    }
    if let Some(col) = &c.column {
        tags.push(format!("[COLUMN:{col}]"));
    }
    if let Some(v) = &c.value {
        tags.push(format!("[ENUM:{v}]"));
    }
    let mut resources = serde_json::Map::new();
    if let Some(t) = &c.table {
        resources.insert("table_id".into(), json!(t));
    }
    match kind.as_str() {
        "column" => {
            resources.insert("predicate".into(), json!({"physical": c.column.as_deref().unwrap_or(&c.name)}));
        }
        "enum" => {
            if let Some(col) = &c.column {
                resources.insert("column_id".into(), json!(col));
            }
            resources.insert("value".into(), json!(c.value.as_deref().unwrap_or(&c.name)));
        }
        "predicate" => {
            if let Some(sql) = &c.sql {
                resources.insert("sql".into(), json!(sql));
            }
        }
        _ => {}
    }
    let mut spec = json!({
        "name": c.name,
        "synonyms": c.synonyms,
        "tags": tags,
        "content_resources": Value::Object(resources),
        "source": "auto",
    });
    if let Some(t) = &c.table {
        spec["collection"] = json!(t);
        if kind == "table" {
            spec["collection"] = json!(c.name);
        }
    }
    if kind == "predicate" {
        if let Some(sql) = &c.sql {
            spec["content"] = json!(sql);
        }
    }
    tpl.instantiate(spec).ok()
}

fn verify_candidate(c: &EntityCandidate, db: &dyn SqlDriver) -> Verification {
    let kind = c.kind.to_lowercase();
    match kind.as_str() {
        "table" => {
            if table_exists(db, &c.name) {
                Verification::SchemaVerified
            } else {
                Verification::Unverified
            }
        }
        "column" => {
            let table = c.table.as_deref().unwrap_or("");
            let column = c.column.as_deref().unwrap_or(&c.name);
            if column_exists(db, table, column) {
                Verification::SchemaVerified
            } else {
                Verification::Unverified
            }
        }
        "enum" => {
            let table = c.table.as_deref().unwrap_or("");
            let column = c.column.as_deref().unwrap_or("");
            let value = c.value.as_deref().unwrap_or(&c.name);
            if !column_exists(db, table, column) {
                Verification::Unverified
            } else if probe_enum(db, table, column, value) {
                Verification::ExecutionVerified
            } else {
                Verification::Unverified
            }
        }
        "predicate" => {
            let table = c.table.as_deref().unwrap_or("");
            match &c.sql {
                Some(predicate_sql) if table_exists(db, table) => {
                    let sql = format!(
                        "SELECT 1 FROM {} WHERE {} LIMIT 1",
                        quote_ident(table),
                        predicate_sql
                    );
                    match db.query(&sql) {
                        Ok(r) if !r.rows.is_empty() => Verification::ExecutionVerified,
                        Ok(_) => Verification::SchemaVerified,
                        Err(_) => Verification::Unverified,
                    }
                }
                _ => Verification::Unverified,
            }
        }
        "synonym" => Verification::SchemaVerified,
        _ => Verification::Unverified,
    }
}

fn entries_from_candidates(
    candidates: Vec<EntityCandidate>,
    nl: &str,
    sql: Option<&str>,
    db: &dyn SqlDriver,
    kb: Option<&KnowledgeBase>,
) -> Vec<MinedEntry> {
    candidates
        .into_iter()
        .filter_map(|c| {
            let record = candidate_record(&c, kb)?;
            let verification = verify_candidate(&c, db);
            Some(MinedEntry {
                candidate: record,
                evidence: Evidence {
                    query: nl.to_string(),
                    sql: sql.map(str::to_string),
                    span: None,
                },
                verification,
            })
        })
        .collect()
}

/// Mine context from a labeled NL-SQL pair. When a previously failed SQL is
/// supplied, the prompt asks the model to compare the two and extract the
/// differentiating context.
pub fn mine_labeled(
    nl: &str,
    gold_sql: &str,
    db: &dyn SqlDriver,
    llm: &dyn LlmClient,
    failed_sql: Option<&str>,
) -> Result<Vec<MinedEntry>, MiningError> {
    execute_to_result(db, gold_sql).map_err(MiningError::GoldSqlFails)?;
    let mut prompt = format!(
        "Link phrases in the user query to clauses in the SQL and extract context entries.\n\
         Reply with a JSON array; each item: {{\"kind\": \"table|column|enum|predicate|synonym\", \
         \"name\": string, \"synonyms\": [string], \"table\": string?, \"column\": string?, \
         \"value\": string?, \"sql\": string?}}.\n\nUser query: {nl}\nGold SQL:\n{gold_sql}\n"
    );
    if let Some(failed) = failed_sql {
        prompt.push_str(&format!(
            "\nA previous attempt produced this incorrect SQL:\n{failed}\n\
             Compare the key differences between the correct and incorrect SQLs and extract the \
             predicates or conditions that caused the failure.\n"
        ));
    }
    let response = llm.complete(&[ChatMessage::user(prompt)], &GenParams::default())?;
    let candidates: Vec<EntityCandidate> =
        serde_json::from_str(response.trim()).unwrap_or_default();
    Ok(entries_from_candidates(candidates, nl, Some(gold_sql), db, None))
}

/// Extract entity candidates from a parsed (pseudo-label) SQL: its tables,
/// predicate columns, and predicate literals as enum candidates.
pub fn candidates_from_ast(ast: &SqlAst) -> Vec<EntityCandidate> {
    let mut out = Vec::new();
    let first_table = ast.table_refs.first().cloned();
    for table in &ast.table_refs {
        out.push(EntityCandidate {
            kind: "table".into(),
            name: table.clone(),
            synonyms: Vec::new(),
            table: Some(table.clone()),
            column: None,
            value: None,
            sql: None,
        });
    }
    for p in &ast.predicates {
        out.push(EntityCandidate {
            kind: "column".into(),
            name: p.column.clone(),
            synonyms: Vec::new(),
            table: first_table.clone(),
            column: Some(p.column.clone()),
            value: None,
            sql: None,
        });
        if p.operator == "=" {
            out.push(EntityCandidate {
                kind: "enum".into(),
                name: p.literal.clone(),
                synonyms: Vec::new(),
                table: first_table.clone(),
                column: Some(p.column.clone()),
                value: Some(p.literal.clone()),
                sql: None,
            });
        }
    }
    out
}

/// Agentic mining over an unlabeled query: a budgeted tool loop over the
/// profiler toolkits, with an optional pseudo-label path whose AST-derived
/// candidates are intersected with the loop's findings.
pub fn mine_unlabeled(
    nl: &str,
    db: &dyn SqlDriver,
    kb: &KnowledgeBase,
    llm: &dyn LlmClient,
    budget: usize,
) -> Result<Vec<MinedEntry>, MiningError> {
    if budget == 0 {
        return Err(MiningError::BudgetExhausted {
            spent: 0,
            partial: Vec::new(),
        });
    }
    let mut transcript = vec![
        ChatMessage::system(
            "You mine database context for a user query. Each turn reply with JSON: \
             {\"tool\": \"execute_sql|fuzzy_enum|table_info\", \"args\": {...}}, or \
             {\"pseudo_sql\": \"SELECT ...\"}, or a final \
             {\"entries\": [{\"kind\": ..., \"name\": ..., ...}]}.",
        ),
        ChatMessage::user(format!("User query: {nl}")),
    ];
    let mut loop_candidates: Vec<EntityCandidate> = Vec::new();
    let mut ast_candidates: Option<Vec<EntityCandidate>> = None;
    let mut spent = 0usize;
    let mut finished = false;

    for step in 0..budget + 1 {
        if spent >= budget {
            break;
        }
        let params = GenParams {
            sample_index: step,
            ..Default::default()
        };
        let response = llm.complete(&transcript, &params)?;
        let doc: Value = match serde_json::from_str(response.trim()) {
            Ok(v) => v,
            Err(_) => break,
        };
        if let Some(entries) = doc.get("entries") {
            let parsed: Vec<EntityCandidate> =
                serde_json::from_value(entries.clone()).unwrap_or_default();
            loop_candidates.extend(parsed);
            finished = true;
            break;
        }
        if let Some(pseudo) = doc.get("pseudo_sql").and_then(Value::as_str) {
            spent += 1;
            // Parsed regardless of whether the SQL is correct.
            if let Ok(ast) = parse_sql_ast(pseudo) {
                ast_candidates = Some(candidates_from_ast(&ast));
            }
            transcript.push(ChatMessage::assistant(response));
            transcript.push(ChatMessage::user("Observation: pseudo SQL parsed"));
            continue;
        }
        let tool = doc.get("tool").and_then(Value::as_str).unwrap_or("");
        let args = doc.get("args").cloned().unwrap_or(Value::Null);
        spent += 1;
        let observation = match tool {
            "execute_sql" => {
                let sql = args.get("sql").and_then(Value::as_str).unwrap_or("");
                match crate::profiler::tool::execute_sql_tool(db, sql, 50) {
                    Ok(result) => result.render(),
                    Err(e) => e.to_string(),
                }
            }
            "fuzzy_enum" => {
                let keyword = args.get("keyword").and_then(Value::as_str).unwrap_or("");
                let table = args.get("table").and_then(Value::as_str).unwrap_or("");
                let column = args.get("column").and_then(Value::as_str).unwrap_or("");
                let values = db
                    .query(&format!(
                        "SELECT DISTINCT {} FROM {} LIMIT 200",
                        quote_ident(column),
                        quote_ident(table)
                    ))
                    .map(|r| {
                        r.rows
                            .iter()
                            .filter_map(|row| row.first().map(|v| v.display()))
                            .collect::<Vec<_>>()
                    })
                    .unwrap_or_default();
                let lem = crate::text::Lemmatizer::rule_based();
                match crate::profiler::fuzzy::fuzzy_enum(&values, keyword, 5, 2, &lem, None) {
                    Ok(hits) => serde_json::to_string(&hits).unwrap_or_default(),
                    Err(e) => e.to_string(),
                }
            }
            "table_info" => {
                let table = args.get("table").and_then(Value::as_str).unwrap_or("");
                match db.columns(table) {
                    Ok(cols) => cols
                        .iter()
                        .map(|c| format!("{} {}", c.name, c.declared_type))
                        .collect::<Vec<_>>()
                        .join(", "),
                    Err(e) => e.to_string(),
                }
            }
            other => format!("unknown tool `{other}`"),
        };
        transcript.push(ChatMessage::assistant(response));
        transcript.push(ChatMessage::user(format!("Observation: {observation}")));
    }

    // Intersect the two candidate sets when both paths produced one.
    let combined: Vec<EntityCandidate> = match (loop_candidates.is_empty(), ast_candidates) {
        (false, Some(ast)) => {
            let keys: std::collections::BTreeSet<(String, String)> = ast
                .iter()
                .map(|c| (c.kind.to_lowercase(), c.name.clone()))
                .collect();
            loop_candidates
                .into_iter()
                .filter(|c| keys.contains(&(c.kind.to_lowercase(), c.name.clone())))
                .collect()
        }
        (false, None) => loop_candidates,
        (true, Some(ast)) => ast,
        (true, None) => Vec::new(),
    };
    let entries = entries_from_candidates(combined, nl, None, db, Some(kb));
    if !finished && spent >= budget {
        return Err(MiningError::BudgetExhausted {
            spent,
            partial: entries,
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests;
