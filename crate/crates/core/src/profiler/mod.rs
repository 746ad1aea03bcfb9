//! Database profiling: type-aware column statistics, table/database
//! profiles, a truncating SQL execution tool, and lexical+semantic fuzzy
//! search over enum values and column names.

pub mod driver;
pub mod export;
pub mod fuzzy;
pub mod pg;
pub mod strptime;
pub mod tool;

use crate::llm::{ChatMessage, GenParams, LlmClient};
use crate::scalar::Scalar;
use driver::{DriverError, SqlDriver, SqlValue};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfilerError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error(transparent)]
    Driver(#[from] DriverError),
}

#[derive(Debug, Clone)]
pub struct ProfilerConfig {
    pub categorical_max_ratio: f64,
    pub categorical_max_distinct: usize,
    pub top_k: usize,
    pub temporal_min_parse_rate: f64,
    pub temporal_name_hints: Vec<String>,
    pub max_rows: usize,
    pub gram_order: usize,
}

impl Default for ProfilerConfig {
    fn default() -> Self {
        Self {
            categorical_max_ratio: 0.1,
            categorical_max_distinct: 1000,
            top_k: 10,
            temporal_min_parse_rate: 0.95,
            temporal_name_hints: [
                "date", "time", "day", "month", "year", "period", "_dt", "_ts", "timestamp",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            max_rows: 50,
            gram_order: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferredType {
    Numeric,
    Categorical,
    Text,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub mean: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
    pub is_integer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopValue {
    pub value: String,
    pub count: usize,
    pub frequency: f64,
    pub cum_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalStats {
    pub n_classes: usize,
    pub top_values: Vec<TopValue>,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalStats {
    pub format: String,
    pub min_time: String,
    pub max_time: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub id: String,
    pub name: String,
    pub description: String,
    pub is_pk: bool,
    pub is_fk: bool,
    pub inferred_type: InferredType,
    pub null_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric_stats: Option<NumericStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categorical_stats: Option<CategoricalStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temporal_stats: Option<TemporalStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableProfile {
    pub name: String,
    pub description: String,
    pub row_count: usize,
    pub columns: Vec<ColumnProfile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DbProfile {
    pub tables: Vec<TableProfile>,
}

/// Mean of a slice; zero on empty input.
pub fn mean<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    values.iter().copied().sum::<S>() / S::from(values.len()).unwrap()
}

/// Percentile by linear interpolation between closest ranks over a sorted
/// slice; `p` in [0, 1].
pub fn percentile<S: Scalar>(sorted: &[S], p: S) -> S {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p * S::from(n - 1).unwrap();
    let lower = rank.floor();
    let frac = rank - lower;
    let lo = lower.to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn numeric_stats(values: &[f64], all_integer: bool) -> NumericStats {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    NumericStats {
        mean: mean(&sorted),
        min: sorted[0],
        p25: percentile(&sorted, 0.25),
        p50: percentile(&sorted, 0.50),
        p75: percentile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        is_integer: all_integer,
    }
}

fn categorical_stats(displays: &[String], top_k: usize) -> CategoricalStats {
    use std::collections::BTreeMap;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in displays {
        *counts.entry(d.as_str()).or_default() += 1;
    }
    let n_classes = counts.len();
    let total = displays.len();
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut cum = 0.0;
    let top_values = ranked
        .into_iter()
        .take(top_k)
        .map(|(value, count)| {
            let frequency = count as f64 / total as f64;
            cum += frequency;
            TopValue {
                value: value.to_string(),
                count,
                frequency,
                cum_frequency: cum,
            }
        })
        .collect();
    CategoricalStats {
        n_classes,
        top_values,
        max_len: displays.iter().map(|d| d.chars().count()).max().unwrap_or(0),
    }
}

fn is_temporal_suspect(column_name: &str, sample: &[String], cfg: &ProfilerConfig) -> bool {
    let lower = column_name.to_lowercase();
    if cfg.temporal_name_hints.iter().any(|h| lower.contains(h)) {
        return true;
    }
    if sample.is_empty() {
        return false;
    }
    let looks_dateish = |s: &str| {
        let digits = s.chars().filter(char::is_ascii_digit).count();
        let all_digits = s.chars().all(|c| c.is_ascii_digit());
        (all_digits && (s.len() == 6 || s.len() == 8))
            || (digits >= 6 && s.contains(['-', '/', ':']))
    };
    let hits = sample.iter().filter(|s| looks_dateish(s)).count();
    hits * 5 >= sample.len() * 4 // at least 80%
}

fn ask_temporal_format(
    llm: &dyn LlmClient,
    column_name: &str,
    sample: &[String],
) -> Option<String> {
    let preview: Vec<&str> = sample.iter().take(10).map(String::as_str).collect();
    let prompt = format!(
        "Column `{column_name}` holds values such as: {}. \
         Reply with only the strptime format string that parses them.",
        preview.join(", ")
    );
    llm.complete(&[ChatMessage::user(prompt)], &GenParams::default())
        .ok()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}

/// Rule-first column type annotation. A temporal suspicion (name heuristics
/// or digit patterns) consults the LLM for a parse format, accepted only if
/// it parses at least the configured fraction of the sample; otherwise
/// all-numeric samples are numeric, low-distinct samples categorical, and
/// everything else text.
pub fn annotate_column_type(
    values: &[SqlValue],
    column_name: &str,
    llm: Option<&dyn LlmClient>,
    cfg: &ProfilerConfig,
) -> (InferredType, Option<String>) {
    let non_null: Vec<&SqlValue> = values.iter().filter(|v| !v.is_null()).collect();
    if non_null.is_empty() {
        return (InferredType::Text, None);
    }
    let displays: Vec<String> = non_null.iter().map(|v| v.display()).collect();

    if is_temporal_suspect(column_name, &displays, cfg) {
        if let Some(llm) = llm {
            if let Some(format) = ask_temporal_format(llm, column_name, &displays) {
                if strptime::parse_rate(&displays, &format) >= cfg.temporal_min_parse_rate {
                    return (InferredType::Temporal, Some(format));
                }
            }
        }
    }
    if non_null.iter().all(|v| v.as_f64().is_some()) {
        return (InferredType::Numeric, None);
    }
    let distinct: std::collections::BTreeSet<&String> = displays.iter().collect();
    let ratio = distinct.len() as f64 / displays.len() as f64;
    if ratio <= cfg.categorical_max_ratio && distinct.len() <= cfg.categorical_max_distinct {
        return (InferredType::Categorical, None);
    }
    (InferredType::Text, None)
}

fn ask_description(llm: &dyn LlmClient, what: &str) -> String {
    let prompt = format!("Write a one-line description of {what}. Reply with the sentence only.");
    llm.complete(&[ChatMessage::user(prompt)], &GenParams::default())
        .map(|s| s.trim().to_string())
        .unwrap_or_default()
}

/// Profile one column: general attributes plus the stats block matching the
/// inferred type (text shares the categorical block).
pub fn profile_column(
    db: &dyn SqlDriver,
    table: &str,
    column: &str,
    llm: Option<&dyn LlmClient>,
    cfg: &ProfilerConfig,
) -> Result<ColumnProfile, ProfilerError> {
    let metas = db.columns(table)?;
    if metas.is_empty() {
        return Err(ProfilerError::UnknownTable(table.to_string()));
    }
    let meta = metas
        .iter()
        .find(|m| m.name == column)
        .ok_or_else(|| ProfilerError::UnknownColumn(format!("{table}.{column}")))?;

    let result = db.query(&format!(
        "SELECT {} FROM {}",
        driver::quote_ident(column),
        driver::quote_ident(table)
    ))?;
    let values: Vec<SqlValue> = result.rows.into_iter().filter_map(|r| r.into_iter().next()).collect();
    let null_count = values.iter().filter(|v| v.is_null()).count();
    let (inferred_type, format) = annotate_column_type(&values, column, llm, cfg);
    let non_null: Vec<&SqlValue> = values.iter().filter(|v| !v.is_null()).collect();
    let displays: Vec<String> = non_null.iter().map(|v| v.display()).collect();

    let mut profile = ColumnProfile {
        id: format!("{table}.{column}"),
        name: column.to_string(),
        description: llm
            .map(|l| ask_description(l, &format!("column {table}.{column}")))
            .unwrap_or_default(),
        is_pk: meta.is_pk,
        is_fk: meta.is_fk,
        inferred_type,
        null_count,
        numeric_stats: None,
        categorical_stats: None,
        temporal_stats: None,
    };
    match inferred_type {
        InferredType::Numeric => {
            let floats: Vec<f64> = non_null.iter().filter_map(|v| v.as_f64()).collect();
            let all_integer = floats.iter().all(|f| f.fract() == 0.0);
            profile.numeric_stats = Some(numeric_stats(&floats, all_integer));
        }
        InferredType::Categorical | InferredType::Text => {
            profile.categorical_stats = Some(categorical_stats(&displays, cfg.top_k));
        }
        InferredType::Temporal => {
            let format = format.unwrap_or_default();
            let mut times: Vec<chrono::NaiveDateTime> = displays
                .iter()
                .filter_map(|d| strptime::parse(d, &format))
                .collect();
            times.sort();
            profile.temporal_stats = Some(TemporalStats {
                format,
                min_time: times
                    .first()
                    .map(|t| t.format("%Y-%m-%d %H:%M:%S").to_string())
                    .unwrap_or_default(),
                max_time: times
                    .last()
                    .map(|t| t.format("%Y-%m-%d %H:%M:%S").to_string())
                    .unwrap_or_default(),
            });
        }
    }
    Ok(profile)
}

pub fn profile_table(
    db: &dyn SqlDriver,
    table: &str,
    llm: Option<&dyn LlmClient>,
    cfg: &ProfilerConfig,
) -> Result<TableProfile, ProfilerError> {
    let metas = db.columns(table)?;
    if metas.is_empty() {
        return Err(ProfilerError::UnknownTable(table.to_string()));
    }
    let count = db.query(&format!(
        "SELECT COUNT(*) FROM {}",
        driver::quote_ident(table)
    ))?;
    let row_count = count
        .rows
        .first()
        .and_then(|r| r.first())
        .and_then(SqlValue::as_f64)
        .unwrap_or(0.0) as usize;
    let mut columns = Vec::with_capacity(metas.len());
    for meta in &metas {
        columns.push(profile_column(db, table, &meta.name, llm, cfg)?);
    }
    Ok(TableProfile {
        name: table.to_string(),
        description: llm
            .map(|l| ask_description(l, &format!("table {table}")))
            .unwrap_or_default(),
        row_count,
        columns,
    })
}

pub fn profile_db(
    db: &dyn SqlDriver,
    llm: Option<&dyn LlmClient>,
    cfg: &ProfilerConfig,
) -> Result<DbProfile, ProfilerError> {
    let mut tables = Vec::new();
    for table in db.table_names()? {
        tables.push(profile_table(db, &table, llm, cfg)?);
    }
    Ok(DbProfile { tables })
}

#[cfg(test)]
mod tests;
