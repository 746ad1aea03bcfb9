//! Batch execution accuracy over (pred, gold) SQL pairs. Per-item failures
//! are recorded, never aborting the batch.

use super::cell::Cell;
use super::{bfbeta_score_with_order, detect_ordered, exact_ex, ExecutionResult};
use crate::profiler::driver::{DriverFactory, RawResult, SqlDriver, SqlValue};
use crate::profiler::tool::execute_sql_tool;
use serde::{Deserialize, Serialize};

pub fn cell_from_sql(value: &SqlValue) -> Cell {
    match value {
        SqlValue::Null => Cell::Null,
        SqlValue::Int(i) => Cell::Int(*i),
        SqlValue::Real(f) => Cell::from_f64(*f),
        SqlValue::Text(s) => Cell::from_text(s),
        SqlValue::Blob(b) => Cell::Text(crate::ukf::hash::hex_lower(b)),
    }
}

pub fn execution_result_from_raw(raw: &RawResult) -> ExecutionResult {
    ExecutionResult {
        column_names: raw.columns.clone(),
        rows: raw
            .rows
            .iter()
            .map(|row| row.iter().map(cell_from_sql).collect())
            .collect(),
    }
}

/// Execute a statement and canonicalize its full result. Execution errors
/// come back as `Err(message)`.
pub fn execute_to_result(db: &dyn SqlDriver, sql: &str) -> Result<ExecutionResult, String> {
    let out = execute_sql_tool(db, sql, usize::MAX).map_err(|e| e.to_string())?;
    if let Some(err) = out.error {
        return Err(err.message);
    }
    Ok(ExecutionResult {
        column_names: out.columns,
        rows: out
            .rows
            .iter()
            .map(|row| row.iter().map(cell_from_sql).collect())
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub pred_sql: String,
    pub gold_sql: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairOutcome {
    pub id: String,
    pub ex: bool,
    pub bfbeta: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchReport {
    pub ex: f64,
    pub bfbeta: f64,
    pub per_item: Vec<PairOutcome>,
}

fn score_pair(pair: &EvalPair, db: &dyn SqlDriver, beta: f64) -> PairOutcome {
    let gold = match execute_to_result(db, &pair.gold_sql) {
        Ok(g) => g,
        Err(e) => {
            return PairOutcome {
                id: pair.id.clone(),
                ex: false,
                bfbeta: 0.0,
                error: Some(format!("gold execution failed: {e}")),
            }
        }
    };
    let pred = match execute_to_result(db, &pair.pred_sql) {
        Ok(p) => p,
        Err(e) => {
            // A failing prediction scores zero.
            return PairOutcome {
                id: pair.id.clone(),
                ex: false,
                bfbeta: 0.0,
                error: Some(format!("pred execution failed: {e}")),
            };
        }
    };
    let ordered = detect_ordered(&pair.gold_sql);
    let ex = exact_ex(&pred, &gold, ordered);
    let bfbeta = bfbeta_score_with_order(&pred, &gold, ordered, beta).unwrap_or(0.0);
    PairOutcome {
        id: pair.id.clone(),
        ex,
        bfbeta,
        error: None,
    }
}

fn aggregate(per_item: Vec<PairOutcome>) -> BatchReport {
    let n = per_item.len().max(1) as f64;
    let ex = per_item.iter().filter(|o| o.ex).count() as f64 / n;
    let bfbeta = per_item.iter().map(|o| o.bfbeta).sum::<f64>() / n;
    BatchReport {
        ex,
        bfbeta,
        per_item,
    }
}

pub fn batch_accuracy(pairs: &[EvalPair], db: &dyn SqlDriver, beta: f64) -> BatchReport {
    aggregate(pairs.iter().map(|p| score_pair(p, db, beta)).collect())
}

/// Parallel variant: a bounded worker count, one fresh connection per worker.
pub fn batch_accuracy_parallel(
    pairs: &[EvalPair],
    factory: &dyn DriverFactory,
    beta: f64,
    workers: usize,
) -> BatchReport {
    let workers = workers.max(1).min(pairs.len().max(1));
    let mut slots: Vec<Option<PairOutcome>> = vec![None; pairs.len()];
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let pairs_ref = &pairs;
            handles.push(scope.spawn(move || {
                let db = factory.connect().map_err(|e| e.to_string());
                let mut out: Vec<(usize, PairOutcome)> = Vec::new();
                for (i, pair) in pairs_ref.iter().enumerate() {
                    if i % workers != w {
                        continue;
                    }
                    let outcome = match &db {
                        Ok(db) => score_pair(pair, db.as_ref(), beta),
                        Err(e) => PairOutcome {
                            id: pair.id.clone(),
                            ex: false,
                            bfbeta: 0.0,
                            error: Some(e.clone()),
                        },
                    };
                    out.push((i, outcome));
                }
                out
            }));
        }
        for handle in handles {
            for (i, outcome) in handle.join().expect("batch worker panicked") {
                slots[i] = Some(outcome);
            }
        }
    });
    aggregate(slots.into_iter().flatten().collect())
}
