//! Networked SQL adapter over a connection string. Functionally equivalent
//! to the embedded adapter behind the same trait; never touched by the
//! offline test suite beyond its failure paths.

use super::driver::{ColumnMeta, DriverError, DriverFactory, RawResult, SqlDriver, SqlValue};
use postgres::types::Type;
use postgres::{Client, NoTls};
use std::sync::Mutex;

pub struct PostgresDriver {
    client: Mutex<Client>,
    conn: String,
}

impl PostgresDriver {
    pub fn connect(conn: &str) -> Result<Self, DriverError> {
        let client = Client::connect(conn, NoTls)
            .map_err(|e| DriverError::ConnectionFailed(e.to_string()))?;
        Ok(Self {
            client: Mutex::new(client),
            conn: conn.to_string(),
        })
    }

    fn exec_err(e: postgres::Error) -> DriverError {
        DriverError::Execution {
            sqlstate: e.code().map(|c| c.code().to_string()),
            message: e.to_string(),
        }
    }
}

fn cell(row: &postgres::Row, idx: usize) -> SqlValue {
    let column_type = row.columns()[idx].type_();
    match *column_type {
        Type::BOOL => row
            .try_get::<_, Option<bool>>(idx)
            .ok()
            .flatten()
            .map(|b| SqlValue::Int(b as i64))
            .unwrap_or(SqlValue::Null),
        Type::INT2 => opt_int(row.try_get::<_, Option<i16>>(idx).ok().flatten().map(i64::from)),
        Type::INT4 => opt_int(row.try_get::<_, Option<i32>>(idx).ok().flatten().map(i64::from)),
        Type::INT8 => opt_int(row.try_get::<_, Option<i64>>(idx).ok().flatten()),
        Type::FLOAT4 => opt_real(row.try_get::<_, Option<f32>>(idx).ok().flatten().map(f64::from)),
        Type::FLOAT8 => opt_real(row.try_get::<_, Option<f64>>(idx).ok().flatten()),
        _ => match row.try_get::<_, Option<String>>(idx) {
            Ok(Some(s)) => SqlValue::Text(s),
            Ok(None) => SqlValue::Null,
            // Types without a text accessor (bytea, timestamps, numerics)
            // round-trip through an explicit cast at the SQL layer; anything
            // reaching here is reported as NULL rather than failing the scan.
            Err(_) => SqlValue::Null,
        },
    }
}

fn opt_int(v: Option<i64>) -> SqlValue {
    v.map(SqlValue::Int).unwrap_or(SqlValue::Null)
}

fn opt_real(v: Option<f64>) -> SqlValue {
    v.map(SqlValue::Real).unwrap_or(SqlValue::Null)
}

impl SqlDriver for PostgresDriver {
    fn query(&self, sql: &str) -> Result<RawResult, DriverError> {
        let mut client = self.client.lock().expect("postgres client lock");
        let statement = client.prepare(sql).map_err(Self::exec_err)?;
        let columns: Vec<String> = statement
            .columns()
            .iter()
            .map(|c| c.name().to_string())
            .collect();
        let rows = client.query(&statement, &[]).map_err(Self::exec_err)?;
        let out = rows
            .iter()
            .map(|row| (0..columns.len()).map(|i| cell(row, i)).collect())
            .collect();
        Ok(RawResult { columns, rows: out })
    }

    fn execute(&self, sql: &str) -> Result<usize, DriverError> {
        let mut client = self.client.lock().expect("postgres client lock");
        client.batch_execute(sql).map_err(Self::exec_err)?;
        Ok(0)
    }

    fn table_names(&self) -> Result<Vec<String>, DriverError> {
        let result = self.query(
            "SELECT table_name FROM information_schema.tables
             WHERE table_schema = 'public' AND table_type = 'BASE TABLE'
             ORDER BY table_name",
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
        let escaped = table.replace('\'', "''");
        let info = self.query(&format!(
            "SELECT column_name, data_type FROM information_schema.columns
             WHERE table_schema = 'public' AND table_name = '{escaped}'
             ORDER BY ordinal_position"
        ))?;
        let keys = self.query(&format!(
            "SELECT kcu.column_name, tc.constraint_type
             FROM information_schema.table_constraints tc
             JOIN information_schema.key_column_usage kcu
               ON tc.constraint_name = kcu.constraint_name
             WHERE tc.table_schema = 'public' AND tc.table_name = '{escaped}'"
        ))?;
        let has = |column: &str, kind: &str| {
            keys.rows.iter().any(|row| {
                matches!((row.first(), row.get(1)),
                    (Some(SqlValue::Text(c)), Some(SqlValue::Text(k))) if c == column && k == kind)
            })
        };
        Ok(info
            .rows
            .iter()
            .map(|row| {
                let name = match row.first() {
                    Some(SqlValue::Text(t)) => t.clone(),
                    _ => String::new(),
                };
                let declared_type = match row.get(1) {
                    Some(SqlValue::Text(t)) => t.clone(),
                    _ => String::new(),
                };
                ColumnMeta {
                    is_pk: has(&name, "PRIMARY KEY"),
                    is_fk: has(&name, "FOREIGN KEY"),
                    name,
                    declared_type,
                }
            })
            .collect())
    }

    fn engine(&self) -> &str {
        "postgres"
    }
}

pub struct PostgresFactory {
    pub conn: String,
}

impl DriverFactory for PostgresFactory {
    fn connect(&self) -> Result<Box<dyn SqlDriver>, DriverError> {
        Ok(Box::new(PostgresDriver::connect(&self.conn)?))
    }
}

impl std::fmt::Debug for PostgresDriver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PostgresDriver").field("conn", &self.conn).finish()
    }
}
