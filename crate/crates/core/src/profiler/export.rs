//! Export database profiles as Table/Column knowledge records.

use super::{ColumnProfile, DbProfile, TableProfile};
use crate::ukf::{template, UkfError, UkfRecord};
use serde_json::json;

pub fn table_record(profile: &TableProfile) -> Result<UkfRecord, UkfError> {
    let tpl = template::template("Table").expect("built-in template");
    let content = if profile.description.is_empty() {
        format!(
            "Table {} with {} rows and {} columns.",
            profile.name,
            profile.row_count,
            profile.columns.len()
        )
    } else {
        profile.description.clone()
    };
    tpl.instantiate(json!({
        "name": profile.name,
        "content": content,
        "content_resources": {"table_id": profile.name},
        "collection": profile.name,
        "tags": [format!("[TABLE:{}]", profile.name)],
        "source": "tool",
        "creator": "db-profiler",
        "profile": {
            "row_count": profile.row_count,
            "column_count": profile.columns.len(),
        },
    }))
}

pub fn column_record(table: &str, profile: &ColumnProfile) -> Result<UkfRecord, UkfError> {
    let tpl = template::template("Column").expect("built-in template");
    let content = if profile.description.is_empty() {
        format!(
            "Column {} of table {} ({:?}).",
            profile.name, table, profile.inferred_type
        )
    } else {
        profile.description.clone()
    };
    let stats = serde_json::to_value(profile).unwrap_or(serde_json::Value::Null);
    tpl.instantiate(json!({
        "name": profile.name,
        "content": content,
        "content_resources": {
            "table_id": table,
            "predicate": {"physical": profile.name},
        },
        "collection": table,
        "tags": [
            format!("[TABLE:{table}]"),
            format!("[COLUMN:{}]", profile.name),
        ],
        "source": "tool",
        "creator": "db-profiler",
        "profile": stats,
    }))
}

/// All Table and Column records for a database profile, in schema order.
pub fn export_profiles(db: &DbProfile) -> Result<Vec<UkfRecord>, UkfError> {
    let mut out = Vec::new();
    for table in &db.tables {
        out.push(table_record(table)?);
        for column in &table.columns {
            out.push(column_record(&table.name, column)?);
        }
    }
    Ok(out)
}
