//! Persistent, versioned knowledge base with trust-ordered merge rules.
//!
//! Writers go through `&mut self`; share a base across threads behind an
//! `RwLock` for concurrent readers. Deletion is lazy: records are only ever
//! marked inactive.

pub mod backend;

use crate::ukf::{Context, UkfError, UkfId, UkfRecord};
use backend::{MemoryBackend, Storage};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

pub type VersionKey = (String, String, String);

#[derive(Debug, Error)]
pub enum KbError {
    #[error("a live record with id {0} already exists")]
    DuplicateLiveId(UkfId),
    #[error("unknown record id {0}")]
    UnknownId(UkfId),
    #[error(transparent)]
    Ukf(#[from] UkfError),
    #[error("storage error: {0}")]
    Storage(String),
}

/// Provenance class governing merge precedence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustMark {
    Schema,
    Labeled,
    HumanVerified,
    Mined,
}

impl TrustMark {
    pub fn is_trusted(&self) -> bool {
        !matches!(self, TrustMark::Mined)
    }
}

impl fmt::Display for TrustMark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrustMark::Schema => "schema",
            TrustMark::Labeled => "labeled",
            TrustMark::HumanVerified => "human_verified",
            TrustMark::Mined => "mined",
        };
        f.write_str(s)
    }
}

impl FromStr for TrustMark {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "schema" => Ok(TrustMark::Schema),
            "labeled" => Ok(TrustMark::Labeled),
            "human_verified" => Ok(TrustMark::HumanVerified),
            "mined" => Ok(TrustMark::Mined),
            other => Err(format!("unknown trust mark `{other}`")),
        }
    }
}

/// Outcome of a merge; the four lists partition the incoming batch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub merged_synonyms: Vec<UkfId>,
    pub discarded_conflicts: Vec<UkfId>,
    pub dropped_same_id: Vec<UkfId>,
    pub inserted_low_priority: Vec<UkfId>,
}

impl MergeReport {
    pub fn total(&self) -> usize {
        self.merged_synonyms.len()
            + self.discarded_conflicts.len()
            + self.dropped_same_id.len()
            + self.inserted_low_priority.len()
    }
}

pub struct KnowledgeBase {
    records: BTreeMap<UkfId, UkfRecord>,
    trust_marks: BTreeMap<UkfId, TrustMark>,
    provenance_index: BTreeMap<(String, String), BTreeSet<UkfId>>,
    version_chain: BTreeMap<VersionKey, Vec<UkfId>>,
    backend: Box<dyn Storage>,
    revision: u64,
}

impl KnowledgeBase {
    pub fn in_memory() -> Self {
        Self::with_backend(Box::new(MemoryBackend)).expect("memory backend cannot fail")
    }

    /// Directory-of-files backend: one UKF document per file plus a manifest.
    pub fn open_dir(dir: impl AsRef<Path>) -> Result<Self, KbError> {
        Self::with_backend(Box::new(backend::DirBackend::new(dir)?))
    }

    /// Embedded single-file SQL backend.
    pub fn open_sqlite(path: impl AsRef<Path>) -> Result<Self, KbError> {
        Self::with_backend(Box::new(backend::SqliteBackend::open(path)?))
    }

    pub fn with_backend(mut backend: Box<dyn Storage>) -> Result<Self, KbError> {
        let state = backend.load()?;
        let mut kb = Self {
            records: BTreeMap::new(),
            trust_marks: BTreeMap::new(),
            provenance_index: BTreeMap::new(),
            version_chain: state.version_chain,
            backend,
            revision: 0,
        };
        for (record, trust) in state.records {
            kb.index_in_memory(record, trust);
        }
        Ok(kb)
    }

    fn index_in_memory(&mut self, record: UkfRecord, trust: TrustMark) {
        self.provenance_index
            .entry((record.owner.clone(), record.workspace.clone()))
            .or_default()
            .insert(record.id.clone());
        self.trust_marks.insert(record.id.clone(), trust);
        self.records.insert(record.id.clone(), record);
    }

    fn chain_key(record: &UkfRecord) -> VersionKey {
        (
            record.kind.clone(),
            record.name.clone(),
            record.variant.clone(),
        )
    }

    /// Monotone counter bumped on every write; index layers use it to detect
    /// staleness.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&UkfRecord> {
        self.records.get(id)
    }

    pub fn trust(&self, id: &str) -> Option<TrustMark> {
        self.trust_marks.get(id).copied()
    }

    pub fn records(&self) -> impl Iterator<Item = &UkfRecord> {
        self.records.values()
    }

    pub fn live_records(&self) -> impl Iterator<Item = &UkfRecord> {
        self.records.values().filter(|r| !r.inactive_mark)
    }

    pub fn version_chain(&self, key: &VersionKey) -> Option<&Vec<UkfId>> {
        self.version_chain.get(key)
    }

    pub fn ids_for_owner(&self, owner: &str, workspace: &str) -> BTreeSet<UkfId> {
        self.provenance_index
            .get(&(owner.to_string(), workspace.to_string()))
            .cloned()
            .unwrap_or_default()
    }

    /// Insert a record. Fails if a live record already holds the id; an
    /// inactive record with the same id is superseded.
    pub fn insert(&mut self, record: UkfRecord, trust: TrustMark) -> Result<UkfId, KbError> {
        if let Some(existing) = self.records.get(&record.id) {
            if !existing.inactive_mark {
                return Err(KbError::DuplicateLiveId(record.id.clone()));
            }
        }
        let id = record.id.clone();
        let key = Self::chain_key(&record);
        let chain = self.version_chain.entry(key).or_default();
        if !chain.contains(&id) {
            chain.push(id.clone());
        }
        self.backend.save_record(&record, trust)?;
        self.backend.save_chains(&self.version_chain)?;
        self.index_in_memory(record, trust);
        self.revision += 1;
        Ok(id)
    }

    /// Promote or demote a record's trust mark. Priorities are not rewritten.
    pub fn set_trust(&mut self, id: &str, trust: TrustMark) -> Result<(), KbError> {
        let record = self
            .records
            .get(id)
            .cloned()
            .ok_or_else(|| KbError::UnknownId(id.to_string()))?;
        self.trust_marks.insert(id.to_string(), trust);
        self.backend.save_record(&record, trust)?;
        self.revision += 1;
        Ok(())
    }

    fn replace_record(&mut self, record: UkfRecord) -> Result<(), KbError> {
        let trust = self
            .trust_marks
            .get(&record.id)
            .copied()
            .unwrap_or(TrustMark::Mined);
        self.backend.save_record(&record, trust)?;
        self.records.insert(record.id.clone(), record);
        self.revision += 1;
        Ok(())
    }

    /// Lowest priority that keeps an entry strictly below every trusted
    /// record, per the merge policy.
    fn mined_priority_floor(&self) -> Option<i64> {
        self.records
            .values()
            .filter(|r| {
                self.trust_marks
                    .get(&r.id)
                    .is_some_and(TrustMark::is_trusted)
            })
            .map(|r| r.priority)
            .min()
            .map(|min| min - 1)
    }

    /// Merge a batch of mined records, applying the four rules in order:
    /// (1) identical id and content merge synonyms into the existing record;
    /// (2) conflicts with trusted records are discarded;
    /// (3) identical ids with conflicting contents are dropped;
    /// (4) the remainder is inserted below every trusted priority.
    pub fn merge_incoming(&mut self, batch: Vec<UkfRecord>) -> Result<MergeReport, KbError> {
        let mut report = MergeReport::default();

        // Ids carrying more than one distinct content hash within the batch.
        let mut batch_contents: BTreeMap<UkfId, BTreeSet<String>> = BTreeMap::new();
        for rec in &batch {
            batch_contents
                .entry(rec.id.clone())
                .or_default()
                .insert(rec.content_hash.clone());
        }
        let conflicted_ids: BTreeSet<UkfId> = batch_contents
            .iter()
            .filter(|(_, hashes)| hashes.len() > 1)
            .map(|(id, _)| id.clone())
            .collect();

        let floor = self.mined_priority_floor();

        for incoming in batch {
            let id = incoming.id.clone();
            if let Some(existing) = self.records.get(&id).filter(|r| !r.inactive_mark) {
                if existing.content_hash == incoming.content_hash {
                    let mut merged = existing.clone();
                    merged.synonyms.extend(incoming.synonyms.iter().cloned());
                    self.replace_record(merged)?;
                    report.merged_synonyms.push(id);
                } else if self
                    .trust_marks
                    .get(&id)
                    .is_some_and(TrustMark::is_trusted)
                {
                    report.discarded_conflicts.push(id);
                } else {
                    report.dropped_same_id.push(id);
                }
                continue;
            }
            if conflicted_ids.contains(&id) {
                report.dropped_same_id.push(id);
                continue;
            }
            let adjusted = match floor {
                Some(p) if incoming.priority != p => {
                    let mut doc = serde_json::to_value(&incoming)
                        .map_err(|e| KbError::Storage(e.to_string()))?;
                    doc["priority"] = Value::from(p);
                    // Priority is not an identity field, so the id is stable.
                    doc.as_object_mut().unwrap().remove("_id");
                    UkfRecord::from_value(doc)?
                }
                _ => incoming,
            };
            debug_assert_eq!(adjusted.id, id);
            self.insert(adjusted, TrustMark::Mined)?;
            report.inserted_low_priority.push(id);
        }
        Ok(report)
    }

    /// Create a new version of a record: minor version bump, parent link back
    /// to the base, chain appended. The base stays untouched.
    pub fn new_version(&mut self, base_id: &str, changes: &Context) -> Result<UkfId, KbError> {
        let base = self
            .records
            .get(base_id)
            .cloned()
            .ok_or_else(|| KbError::UnknownId(base_id.to_string()))?;
        let trust = self
            .trust_marks
            .get(base_id)
            .copied()
            .unwrap_or(TrustMark::Mined);
        let mut merged = base.merged(changes)?;
        let mut doc = serde_json::to_value(&merged).map_err(|e| KbError::Storage(e.to_string()))?;
        let obj = doc.as_object_mut().unwrap();
        if !changes.contains_key("version") {
            obj.insert("version".into(), Value::String(bump_version(&base.version)));
        }
        let mut parents = base.parents.clone();
        parents.insert("base".to_string(), Value::String(base_id.to_string()));
        obj.insert("parents".into(), serde_json::to_value(parents).unwrap());
        obj.insert(
            "timestamp".into(),
            serde_json::to_value(crate::now()).unwrap(),
        );
        obj.remove("_id");
        obj.remove("_content_hash");
        merged = UkfRecord::from_value(doc)?;
        self.insert(merged, trust)
    }

    /// Mark expired live records inactive. Lazy deletion: nothing is removed.
    pub fn sweep_expired(&mut self, now: DateTime<Utc>) -> Result<usize, KbError> {
        let expired: Vec<UkfId> = self
            .records
            .values()
            .filter(|r| !r.inactive_mark && r.is_expired(now))
            .map(|r| r.id.clone())
            .collect();
        let count = expired.len();
        for id in expired {
            let mut record = self.records[&id].clone();
            record.inactive_mark = true;
            self.replace_record(record)?;
        }
        Ok(count)
    }
}

/// Minor version bump: "vX.Y.Z" -> "vX.(Y+1).0". Strings that do not parse
/// get a ".1" suffix so the bump stays injective.
pub fn bump_version(version: &str) -> String {
    let core = version.strip_prefix('v').unwrap_or(version);
    let parts: Vec<&str> = core.split('.').collect();
    if parts.len() >= 2 {
        if let (Ok(major), Ok(minor)) = (parts[0].parse::<u64>(), parts[1].parse::<u64>()) {
            return format!("v{major}.{}.0", minor + 1);
        }
    }
    format!("{version}.1")
}
