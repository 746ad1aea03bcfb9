//! Faceted search over record attributes, backed by an embedded single-file
//! SQL database. Scalar retrieval/provenance/metadata columns live in the
//! main table; each multi-value facet (tags, synonyms, related, auths) is
//! normalized into its own side table keyed by the record id.

use crate::kb::KnowledgeBase;
use crate::ukf::{UkfId, UkfRecord};
use rusqlite::Connection;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FacetError {
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("facet store error: {0}")]
    Store(String),
}

fn db_err(e: rusqlite::Error) -> FacetError {
    FacetError::Store(e.to_string())
}

/// Scalar predicates over the main table, combined conjunctively with the
/// slot filters.
#[derive(Debug, Clone, Default)]
pub struct FacetPredicates {
    pub kind: Option<String>,
    pub collection: Option<String>,
    pub owner: Option<String>,
    pub workspace: Option<String>,
    pub source: Option<String>,
    pub min_priority: Option<i64>,
    pub include_inactive: bool,
}

pub struct FacetStore {
    conn: Connection,
    strict: bool,
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS ukf_main (
    id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    type TEXT NOT NULL,
    collection TEXT NOT NULL,
    owner TEXT NOT NULL,
    workspace TEXT NOT NULL,
    creator TEXT NOT NULL,
    source TEXT NOT NULL,
    priority INTEGER NOT NULL,
    timefluid INTEGER NOT NULL,
    inactive INTEGER NOT NULL,
    timestamp TEXT NOT NULL,
    last_verified TEXT NOT NULL,
    expiration INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_main_type ON ukf_main(type);
CREATE INDEX IF NOT EXISTS idx_main_collection ON ukf_main(collection);
CREATE INDEX IF NOT EXISTS idx_main_owner ON ukf_main(owner, workspace);
CREATE INDEX IF NOT EXISTS idx_main_priority ON ukf_main(priority);
CREATE TABLE IF NOT EXISTS facet_tags (
    id TEXT NOT NULL,
    slot TEXT NOT NULL,
    value TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_tags_slot_value ON facet_tags(slot, value);
CREATE INDEX IF NOT EXISTS idx_tags_id ON facet_tags(id);
CREATE TABLE IF NOT EXISTS facet_synonyms (
    id TEXT NOT NULL,
    value TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_synonyms_value ON facet_synonyms(value);
CREATE TABLE IF NOT EXISTS facet_related (
    id TEXT NOT NULL,
    subject_id TEXT NOT NULL,
    relation TEXT NOT NULL,
    object_id TEXT NOT NULL,
    relation_id TEXT
);
CREATE INDEX IF NOT EXISTS idx_related_relation ON facet_related(relation);
CREATE TABLE IF NOT EXISTS facet_auths (
    id TEXT NOT NULL,
    user TEXT NOT NULL,
    authority TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_auths_user ON facet_auths(user);
";

impl FacetStore {
    pub fn in_memory() -> Result<Self, FacetError> {
        Self::from_conn(Connection::open_in_memory().map_err(db_err)?)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, FacetError> {
        Self::from_conn(Connection::open(path).map_err(db_err)?)
    }

    fn from_conn(conn: Connection) -> Result<Self, FacetError> {
        conn.execute_batch(SCHEMA).map_err(db_err)?;
        // Patterns are literal text plus '%'; keep matching case-sensitive.
        conn.pragma_update(None, "case_sensitive_like", true)
            .map_err(db_err)?;
        Ok(Self {
            conn,
            strict: false,
        })
    }

    /// In strict mode, filtering on a slot no record carries is an error.
    pub fn set_strict(&mut self, strict: bool) {
        self.strict = strict;
    }

    pub fn index_record(&mut self, record: &UkfRecord) -> Result<(), FacetError> {
        let tx = self.conn.transaction().map_err(db_err)?;
        for table in ["facet_tags", "facet_synonyms", "facet_related", "facet_auths"] {
            tx.execute(&format!("DELETE FROM {table} WHERE id = ?1"), [&record.id])
                .map_err(db_err)?;
        }
        tx.execute(
            "INSERT INTO ukf_main
                 (id, name, type, collection, owner, workspace, creator, source,
                  priority, timefluid, inactive, timestamp, last_verified, expiration)
             VALUES (?1,?2,?3,?4,?5,?6,?7,?8,?9,?10,?11,?12,?13,?14)
             ON CONFLICT(id) DO UPDATE SET
                 name=?2, type=?3, collection=?4, owner=?5, workspace=?6, creator=?7,
                 source=?8, priority=?9, timefluid=?10, inactive=?11, timestamp=?12,
                 last_verified=?13, expiration=?14",
            rusqlite::params![
                record.id,
                record.name,
                record.kind,
                record.collection,
                record.owner,
                record.workspace,
                record.creator,
                record.source.as_str(),
                record.priority,
                record.timefluid as i64,
                record.inactive_mark as i64,
                record.timestamp.to_rfc3339(),
                record.last_verified.to_rfc3339(),
                record.expiration,
            ],
        )
        .map_err(db_err)?;
        for (slot, values) in &record.slots {
            for value in values {
                tx.execute(
                    "INSERT INTO facet_tags (id, slot, value) VALUES (?1, ?2, ?3)",
                    (&record.id, slot, value),
                )
                .map_err(db_err)?;
            }
        }
        for synonym in &record.synonyms {
            tx.execute(
                "INSERT INTO facet_synonyms (id, value) VALUES (?1, ?2)",
                (&record.id, synonym),
            )
            .map_err(db_err)?;
        }
        for rel in &record.related {
            tx.execute(
                "INSERT INTO facet_related (id, subject_id, relation, object_id, relation_id)
                 VALUES (?1, ?2, ?3, ?4, ?5)",
                (
                    &record.id,
                    &rel.subject_id,
                    &rel.relation,
                    &rel.object_id,
                    rel.relation_id.as_deref(),
                ),
            )
            .map_err(db_err)?;
        }
        for (user, authority) in &record.auths {
            tx.execute(
                "INSERT INTO facet_auths (id, user, authority) VALUES (?1, ?2, ?3)",
                (&record.id, user, authority),
            )
            .map_err(db_err)?;
        }
        tx.commit().map_err(db_err)
    }

    /// Rebuild the store from the knowledge base (all records, live and
    /// inactive; queries exclude inactive rows unless asked).
    pub fn rebuild(&mut self, kb: &KnowledgeBase) -> Result<usize, FacetError> {
        self.conn
            .execute_batch(
                "DELETE FROM ukf_main; DELETE FROM facet_tags; DELETE FROM facet_synonyms;
                 DELETE FROM facet_related; DELETE FROM facet_auths;",
            )
            .map_err(db_err)?;
        let mut n = 0;
        for record in kb.records() {
            self.index_record(record)?;
            n += 1;
        }
        Ok(n)
    }

    /// Ids whose tag slots satisfy all filters: conjunctive across slots,
    /// disjunctive within a slot's values. Patterns are literal text with an
    /// optional '%' wildcard.
    pub fn facet_query(
        &self,
        filters: &BTreeMap<String, String>,
        predicates: &FacetPredicates,
    ) -> Result<Vec<UkfId>, FacetError> {
        let mut candidates = self.scalar_candidates(predicates)?;
        for (slot, pattern) in filters {
            let slot = slot.to_uppercase();
            if self.strict && !self.slot_known(&slot)? {
                return Err(FacetError::UnknownSlot(slot));
            }
            let like = escape_like(pattern);
            let mut stmt = self
                .conn
                .prepare(
                    "SELECT DISTINCT id FROM facet_tags
                     WHERE slot = ?1 AND value LIKE ?2 ESCAPE '\\'",
                )
                .map_err(db_err)?;
            let ids: BTreeSet<UkfId> = stmt
                .query_map((&slot, &like), |row| row.get::<_, String>(0))
                .map_err(db_err)?
                .filter_map(Result::ok)
                .collect();
            candidates.retain(|id| ids.contains(id));
            if candidates.is_empty() {
                break;
            }
        }
        Ok(candidates.into_iter().collect())
    }

    fn slot_known(&self, slot: &str) -> Result<bool, FacetError> {
        let n: i64 = self
            .conn
            .query_row(
                "SELECT COUNT(*) FROM facet_tags WHERE slot = ?1",
                [slot],
                |row| row.get(0),
            )
            .map_err(db_err)?;
        Ok(n > 0)
    }

    fn scalar_candidates(
        &self,
        predicates: &FacetPredicates,
    ) -> Result<BTreeSet<UkfId>, FacetError> {
        let mut sql = String::from("SELECT id FROM ukf_main WHERE 1=1");
        let mut params: Vec<Box<dyn rusqlite::ToSql>> = Vec::new();
        if !predicates.include_inactive {
            sql.push_str(" AND inactive = 0");
        }
        let mut push = |clause: &str, value: Box<dyn rusqlite::ToSql>, sql: &mut String| {
            params.push(value);
            sql.push_str(&format!(" AND {} = ?{}", clause, params.len()));
        };
        if let Some(v) = &predicates.kind {
            push("type", Box::new(v.clone()), &mut sql);
        }
        if let Some(v) = &predicates.collection {
            push("collection", Box::new(v.clone()), &mut sql);
        }
        if let Some(v) = &predicates.owner {
            push("owner", Box::new(v.clone()), &mut sql);
        }
        if let Some(v) = &predicates.workspace {
            push("workspace", Box::new(v.clone()), &mut sql);
        }
        if let Some(v) = &predicates.source {
            push("source", Box::new(v.clone()), &mut sql);
        }
        if let Some(p) = predicates.min_priority {
            params.push(Box::new(p));
            sql.push_str(&format!(" AND priority >= ?{}", params.len()));
        }
        let mut stmt = self.conn.prepare(&sql).map_err(db_err)?;
        let refs: Vec<&dyn rusqlite::ToSql> = params.iter().map(|b| b.as_ref()).collect();
        let ids = stmt
            .query_map(refs.as_slice(), |row| row.get::<_, String>(0))
            .map_err(db_err)?
            .filter_map(Result::ok)
            .collect();
        Ok(ids)
    }

    /// Ids carrying an exact synonym value.
    pub fn ids_with_synonym(&self, synonym: &str) -> Result<Vec<UkfId>, FacetError> {
        let mut stmt = self
            .conn
            .prepare("SELECT DISTINCT id FROM facet_synonyms WHERE value = ?1 ORDER BY id")
            .map_err(db_err)?;
        let ids = stmt
            .query_map([synonym], |row| row.get::<_, String>(0))
            .map_err(db_err)?
            .filter_map(Result::ok)
            .collect();
        Ok(ids)
    }
}

/// Escape LIKE metacharacters, keeping '%' as the user-facing wildcard.
fn escape_like(pattern: &str) -> String {
    pattern
        .replace('\\', "\\\\")
        .replace('_', "\\_")
}
