//! The `execute_sql` agent tool: runs a statement, truncates the returned
//! rows, and preserves full-result numeric summaries and errors so the agent
//! loop never throws.

use super::driver::{DriverError, SqlDriver, SqlValue};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub min: f64,
    pub max: f64,
    pub nulls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqlToolError {
    pub message: String,
    pub sqlstate: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct TruncatedResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<SqlValue>>,
    pub total_row_count: usize,
    pub truncated: bool,
    /// Full-result min/max/null-count for numeric columns.
    pub summary: BTreeMap<String, ColumnSummary>,
    pub error: Option<SqlToolError>,
}

impl TruncatedResult {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    /// Compact table rendering for prompts.
    pub fn render(&self) -> String {
        if let Some(err) = &self.error {
            return format!("SQL error: {}", err.message);
        }
        let mut out = String::new();
        out.push_str(&self.columns.join(" | "));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(SqlValue::display).collect();
            out.push_str(&cells.join(" | "));
            out.push('\n');
        }
        if self.truncated {
            out.push_str(&format!(
                "... showing {} of {} rows\n",
                self.rows.len(),
                self.total_row_count
            ));
        } else {
            out.push_str(&format!("({} rows)\n", self.total_row_count));
        }
        for (col, s) in &self.summary {
            out.push_str(&format!(
                "{col}: min={} max={} nulls={}\n",
                s.min, s.max, s.nulls
            ));
        }
        out
    }
}

/// Execute a statement. Syntax and execution failures land in the `error`
/// field; only a lost connection is returned as `Err`.
pub fn execute_sql_tool(
    db: &dyn SqlDriver,
    sql: &str,
    max_rows: usize,
) -> Result<TruncatedResult, DriverError> {
    let raw = match db.query(sql) {
        Ok(raw) => raw,
        Err(DriverError::ConnectionFailed(e)) => return Err(DriverError::ConnectionFailed(e)),
        Err(DriverError::Execution { message, sqlstate }) => {
            return Ok(TruncatedResult {
                error: Some(SqlToolError { message, sqlstate }),
                ..Default::default()
            });
        }
    };
    let total_row_count = raw.rows.len();
    let truncated = total_row_count > max_rows;

    let mut summary = BTreeMap::new();
    for (idx, name) in raw.columns.iter().enumerate() {
        let mut nulls = 0usize;
        let mut numerics: Vec<f64> = Vec::new();
        let mut numeric_column = true;
        for row in &raw.rows {
            match &row[idx] {
                SqlValue::Null => nulls += 1,
                SqlValue::Int(i) => numerics.push(*i as f64),
                SqlValue::Real(f) => numerics.push(*f),
                _ => numeric_column = false,
            }
        }
        if numeric_column && !numerics.is_empty() {
            summary.insert(
                name.clone(),
                ColumnSummary {
                    min: numerics.iter().copied().fold(f64::INFINITY, f64::min),
                    max: numerics.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    nulls,
                },
            );
        }
    }

    let mut rows = raw.rows;
    rows.truncate(max_rows);
    Ok(TruncatedResult {
        columns: raw.columns,
        rows,
        total_row_count,
        truncated,
        summary,
        error: None,
    })
}
