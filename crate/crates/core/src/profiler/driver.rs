//! Thin SQL driver interface. The reference build ships an embedded SQLite
//! adapter; anything answering these five calls can sit behind the profiler.

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("connection failed: {0}")]
    ConnectionFailed(String),
    #[error("{message}")]
    Execution {
        message: String,
        sqlstate: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SqlValue {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl SqlValue {
    pub fn is_null(&self) -> bool {
        matches!(self, SqlValue::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            SqlValue::Int(i) => Some(*i as f64),
            SqlValue::Real(f) => Some(*f),
            SqlValue::Text(s) => {
                let t = s.trim();
                if t.is_empty() {
                    None
                } else {
                    t.parse::<f64>().ok().filter(|f| f.is_finite())
                }
            }
            _ => None,
        }
    }

    /// Human-readable form used in categorical stats and LLM-facing tables.
    pub fn display(&self) -> String {
        match self {
            SqlValue::Null => "NULL".to_string(),
            SqlValue::Int(i) => i.to_string(),
            SqlValue::Real(f) => f.to_string(),
            SqlValue::Text(s) => s.clone(),
            SqlValue::Blob(b) => crate::ukf::hash::hex_lower(b),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RawResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<SqlValue>>,
}

#[derive(Debug, Clone)]
pub struct ColumnMeta {
    pub name: String,
    pub declared_type: String,
    pub is_pk: bool,
    pub is_fk: bool,
}

pub trait SqlDriver: Send {
    fn query(&self, sql: &str) -> Result<RawResult, DriverError>;
    /// DDL/DML without a result set.
    fn execute(&self, sql: &str) -> Result<usize, DriverError>;
    fn table_names(&self) -> Result<Vec<String>, DriverError>;
    fn columns(&self, table: &str) -> Result<Vec<ColumnMeta>, DriverError>;
    fn engine(&self) -> &str;
    fn supports_explain(&self) -> bool {
        true
    }
}

/// Fresh connections for parallel work against the same database.
pub trait DriverFactory: Send + Sync {
    fn connect(&self) -> Result<Box<dyn SqlDriver>, DriverError>;
}

pub struct SqliteDriver {
    conn: Connection,
}

impl SqliteDriver {
    pub fn in_memory() -> Result<Self, DriverError> {
        Connection::open_in_memory()
            .map(|conn| Self { conn })
            .map_err(|e| DriverError::ConnectionFailed(e.to_string()))
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, DriverError> {
        Connection::open(path)
            .map(|conn| Self { conn })
            .map_err(|e| DriverError::ConnectionFailed(e.to_string()))
    }

    /// Accepts `sqlite::memory:`, `sqlite:<path>`, or a bare file path.
    pub fn from_connection_string(conn: &str) -> Result<Self, DriverError> {
        match conn.strip_prefix("sqlite:") {
            Some(":memory:") | Some("") => Self::in_memory(),
            Some(path) => Self::open(path),
            None => Self::open(conn),
        }
    }

    fn exec_err(e: rusqlite::Error) -> DriverError {
        let sqlstate = match &e {
            rusqlite::Error::SqliteFailure(code, _) => Some(format!("{:?}", code.code)),
            _ => None,
        };
        DriverError::Execution {
            message: e.to_string(),
            sqlstate,
        }
    }
}

impl SqlDriver for SqliteDriver {
    fn query(&self, sql: &str) -> Result<RawResult, DriverError> {
        let mut stmt = self.conn.prepare(sql).map_err(Self::exec_err)?;
        let columns: Vec<String> = stmt.column_names().iter().map(|c| c.to_string()).collect();
        let n = columns.len();
        let mut rows_out = Vec::new();
        let mut rows = stmt.query([]).map_err(Self::exec_err)?;
        while let Some(row) = rows.next().map_err(Self::exec_err)? {
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let v = match row.get_ref(i).map_err(Self::exec_err)? {
                    ValueRef::Null => SqlValue::Null,
                    ValueRef::Integer(i) => SqlValue::Int(i),
                    ValueRef::Real(f) => SqlValue::Real(f),
                    ValueRef::Text(t) => SqlValue::Text(String::from_utf8_lossy(t).into_owned()),
                    ValueRef::Blob(b) => SqlValue::Blob(b.to_vec()),
                };
                out.push(v);
            }
            rows_out.push(out);
        }
        Ok(RawResult {
            columns,
            rows: rows_out,
        })
    }

    fn execute(&self, sql: &str) -> Result<usize, DriverError> {
        self.conn.execute_batch(sql).map_err(Self::exec_err)?;
        Ok(self.conn.changes() as usize)
    }

    fn table_names(&self) -> Result<Vec<String>, DriverError> {
        let result = self.query(
            "SELECT name FROM sqlite_master WHERE type = 'table'
             AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' ORDER BY name",
        )?;
        Ok(result
            .rows
            .into_iter()
            .filter_map(|r| match r.into_iter().next() {
                Some(SqlValue::Text(t)) => Some(t),
                _ => None,
            })
            .collect())
    }

    fn columns(&self, table: &str) -> Result<Vec<ColumnMeta>, DriverError> {
        let info = self.query(&format!("PRAGMA table_info({})", quote_ident(table)))?;
        let fks = self.query(&format!("PRAGMA foreign_key_list({})", quote_ident(table)))?;
        let fk_cols: Vec<String> = fks
            .rows
            .iter()
            .filter_map(|row| {
                // foreign_key_list: (id, seq, table, from, to, ...)
                row.get(3).and_then(|v| match v {
                    SqlValue::Text(t) => Some(t.clone()),
                    _ => None,
                })
            })
            .collect();
        Ok(info
            .rows
            .iter()
            .map(|row| {
                let name = match row.get(1) {
                    Some(SqlValue::Text(t)) => t.clone(),
                    _ => String::new(),
                };
                let declared_type = match row.get(2) {
                    Some(SqlValue::Text(t)) => t.clone(),
                    _ => String::new(),
                };
                let is_pk = matches!(row.get(5), Some(SqlValue::Int(i)) if *i > 0);
                ColumnMeta {
                    is_fk: fk_cols.contains(&name),
                    name,
                    declared_type,
                    is_pk,
                }
            })
            .collect())
    }

    fn engine(&self) -> &str {
        "sqlite"
    }
}

/// Factory for file-backed SQLite databases.
pub struct SqliteFactory {
    pub path: std::path::PathBuf,
}

impl DriverFactory for SqliteFactory {
    fn connect(&self) -> Result<Box<dyn SqlDriver>, DriverError> {
        Ok(Box::new(SqliteDriver::open(&self.path)?))
    }
}

/// Factory for in-memory databases seeded from a setup script; every
/// connection sees the same fixture data.
pub struct SeededMemoryFactory {
    pub setup_sql: String,
}

impl DriverFactory for SeededMemoryFactory {
    fn connect(&self) -> Result<Box<dyn SqlDriver>, DriverError> {
        let driver = SqliteDriver::in_memory()?;
        driver.execute(&self.setup_sql)?;
        Ok(Box::new(driver))
    }
}

/// Open a driver for any supported connection string: `postgres://...`
/// for the networked engine, anything else for the embedded one.
pub fn connect(conn: &str) -> Result<Box<dyn SqlDriver>, DriverError> {
    if conn.starts_with("postgres://") || conn.starts_with("postgresql://") {
        Ok(Box::new(super::pg::PostgresDriver::connect(conn)?))
    } else {
        Ok(Box::new(SqliteDriver::from_connection_string(conn)?))
    }
}

/// Factory matching [`connect`] for parallel workloads.
pub fn connect_factory(conn: &str) -> Result<Box<dyn DriverFactory>, DriverError> {
    if conn.starts_with("postgres://") || conn.starts_with("postgresql://") {
        Ok(Box::new(super::pg::PostgresFactory {
            conn: conn.to_string(),
        }))
    } else {
        let path = conn.strip_prefix("sqlite:").unwrap_or(conn).to_string();
        Ok(Box::new(SqliteFactory { path: path.into() }))
    }
}

pub fn quote_ident(ident: &str) -> String {
    format!("\"{}\"", ident.replace('"', "\"\""))
}
