//! Storage backends behind the knowledge base: in-memory, one JSON document
//! per file, or an embedded SQLite database. All three hold the same logical
//! state; the in-memory map inside [`super::KnowledgeBase`] is the source of
//! truth and writes go through to the backend.

use super::{KbError, TrustMark, VersionKey};
use crate::ukf::{UkfId, UkfRecord};
use rusqlite::Connection;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub struct LoadedState {
    pub records: Vec<(UkfRecord, TrustMark)>,
    pub version_chain: BTreeMap<VersionKey, Vec<UkfId>>,
}

impl LoadedState {
    fn empty() -> Self {
        Self {
            records: Vec::new(),
            version_chain: BTreeMap::new(),
        }
    }
}

pub trait Storage: Send {
    fn save_record(&mut self, record: &UkfRecord, trust: TrustMark) -> Result<(), KbError>;
    fn save_chains(&mut self, chains: &BTreeMap<VersionKey, Vec<UkfId>>) -> Result<(), KbError>;
    fn load(&mut self) -> Result<LoadedState, KbError>;
}

/// No-op persistence; the knowledge base keeps everything in memory anyway.
#[derive(Default)]
pub struct MemoryBackend;

impl Storage for MemoryBackend {
    fn save_record(&mut self, _record: &UkfRecord, _trust: TrustMark) -> Result<(), KbError> {
        Ok(())
    }
    fn save_chains(&mut self, _chains: &BTreeMap<VersionKey, Vec<UkfId>>) -> Result<(), KbError> {
        Ok(())
    }
    fn load(&mut self) -> Result<LoadedState, KbError> {
        Ok(LoadedState::empty())
    }
}

/// One UKF document per file, named by the record id, plus a manifest with
/// trust marks and version chains.
pub struct DirBackend {
    dir: PathBuf,
}

#[derive(serde::Serialize, serde::Deserialize, Default)]
struct Manifest {
    trust_marks: BTreeMap<UkfId, String>,
    version_chain: BTreeMap<String, Vec<UkfId>>,
}

const MANIFEST_FILE: &str = "manifest.json";

fn chain_key_str(key: &VersionKey) -> String {
    format!("{}\u{1f}{}\u{1f}{}", key.0, key.1, key.2)
}

fn chain_key_parse(s: &str) -> Option<VersionKey> {
    let mut it = s.split('\u{1f}');
    Some((
        it.next()?.to_string(),
        it.next()?.to_string(),
        it.next()?.to_string(),
    ))
}

impl DirBackend {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self, KbError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| KbError::Storage(e.to_string()))?;
        Ok(Self { dir })
    }

    fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    fn read_manifest(&self) -> Result<Manifest, KbError> {
        match fs::read_to_string(self.manifest_path()) {
            Ok(text) => {
                serde_json::from_str(&text).map_err(|e| KbError::Storage(e.to_string()))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest::default()),
            Err(e) => Err(KbError::Storage(e.to_string())),
        }
    }

    fn write_manifest(&self, manifest: &Manifest) -> Result<(), KbError> {
        let text = serde_json::to_string_pretty(manifest)
            .map_err(|e| KbError::Storage(e.to_string()))?;
        fs::write(self.manifest_path(), text).map_err(|e| KbError::Storage(e.to_string()))
    }
}

impl Storage for DirBackend {
    fn save_record(&mut self, record: &UkfRecord, trust: TrustMark) -> Result<(), KbError> {
        let path = self.dir.join(format!("{}.json", record.id));
        fs::write(path, record.to_json_pretty()).map_err(|e| KbError::Storage(e.to_string()))?;
        let mut manifest = self.read_manifest()?;
        manifest
            .trust_marks
            .insert(record.id.clone(), trust.to_string());
        self.write_manifest(&manifest)
    }

    fn save_chains(&mut self, chains: &BTreeMap<VersionKey, Vec<UkfId>>) -> Result<(), KbError> {
        let mut manifest = self.read_manifest()?;
        manifest.version_chain = chains
            .iter()
            .map(|(k, v)| (chain_key_str(k), v.clone()))
            .collect();
        self.write_manifest(&manifest)
    }

    fn load(&mut self) -> Result<LoadedState, KbError> {
        let manifest = self.read_manifest()?;
        let mut records = Vec::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&self.dir)
            .map_err(|e| KbError::Storage(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && p.file_name().is_some_and(|n| n != MANIFEST_FILE)
            })
            .collect();
        entries.sort();
        for path in entries {
            let text = fs::read_to_string(&path).map_err(|e| KbError::Storage(e.to_string()))?;
            let record = UkfRecord::from_json_str(&text)?;
            let trust = manifest
                .trust_marks
                .get(&record.id)
                .and_then(|t| TrustMark::from_str(t).ok())
                .unwrap_or(TrustMark::Mined);
            records.push((record, trust));
        }
        let version_chain = manifest
            .version_chain
            .iter()
            .filter_map(|(k, v)| chain_key_parse(k).map(|key| (key, v.clone())))
            .collect();
        Ok(LoadedState {
            records,
            version_chain,
        })
    }
}

/// Embedded single-file SQL backend.
pub struct SqliteBackend {
    conn: Connection,
}

impl SqliteBackend {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, KbError> {
        let conn = Connection::open(path).map_err(|e| KbError::Storage(e.to_string()))?;
        conn.execute_batch(
            "CREATE TABLE IF NOT EXISTS kb_records (
                 id TEXT PRIMARY KEY,
                 doc TEXT NOT NULL,
                 trust TEXT NOT NULL
             );
             CREATE TABLE IF NOT EXISTS kb_chains (
                 kind TEXT NOT NULL,
                 name TEXT NOT NULL,
                 variant TEXT NOT NULL,
                 position INTEGER NOT NULL,
                 id TEXT NOT NULL,
                 PRIMARY KEY (kind, name, variant, position)
             );",
        )
        .map_err(|e| KbError::Storage(e.to_string()))?;
        Ok(Self { conn })
    }
}

impl Storage for SqliteBackend {
    fn save_record(&mut self, record: &UkfRecord, trust: TrustMark) -> Result<(), KbError> {
        self.conn
            .execute(
                "INSERT INTO kb_records (id, doc, trust) VALUES (?1, ?2, ?3)
                 ON CONFLICT(id) DO UPDATE SET doc = ?2, trust = ?3",
                (&record.id, record.to_json_pretty(), trust.to_string()),
            )
            .map_err(|e| KbError::Storage(e.to_string()))?;
        Ok(())
    }

    fn save_chains(&mut self, chains: &BTreeMap<VersionKey, Vec<UkfId>>) -> Result<(), KbError> {
        let tx = self
            .conn
            .transaction()
            .map_err(|e| KbError::Storage(e.to_string()))?;
        tx.execute("DELETE FROM kb_chains", [])
            .map_err(|e| KbError::Storage(e.to_string()))?;
        for (key, ids) in chains {
            for (pos, id) in ids.iter().enumerate() {
                tx.execute(
                    "INSERT INTO kb_chains (kind, name, variant, position, id)
                     VALUES (?1, ?2, ?3, ?4, ?5)",
                    (&key.0, &key.1, &key.2, pos as i64, id),
                )
                .map_err(|e| KbError::Storage(e.to_string()))?;
            }
        }
        tx.commit().map_err(|e| KbError::Storage(e.to_string()))
    }

    fn load(&mut self) -> Result<LoadedState, KbError> {
        let mut records = Vec::new();
        {
            let mut stmt = self
                .conn
                .prepare("SELECT doc, trust FROM kb_records ORDER BY id")
                .map_err(|e| KbError::Storage(e.to_string()))?;
            let rows = stmt
                .query_map([], |row| {
                    Ok((row.get::<_, String>(0)?, row.get::<_, String>(1)?))
                })
                .map_err(|e| KbError::Storage(e.to_string()))?;
            for row in rows {
                let (doc, trust) = row.map_err(|e| KbError::Storage(e.to_string()))?;
                let record = UkfRecord::from_json_str(&doc)?;
                let trust = TrustMark::from_str(&trust).unwrap_or(TrustMark::Mined);
                records.push((record, trust));
            }
        }
        let mut version_chain: BTreeMap<VersionKey, Vec<UkfId>> = BTreeMap::new();
        {
            let mut stmt = self
                .conn
                .prepare(
                    "SELECT kind, name, variant, id FROM kb_chains
                     ORDER BY kind, name, variant, position",
                )
                .map_err(|e| KbError::Storage(e.to_string()))?;
            let rows = stmt
                .query_map([], |row| {
                    Ok((
                        (
                            row.get::<_, String>(0)?,
                            row.get::<_, String>(1)?,
                            row.get::<_, String>(2)?,
                        ),
                        row.get::<_, String>(3)?,
                    ))
                })
                .map_err(|e| KbError::Storage(e.to_string()))?;
            for row in rows {
                let (key, id) = row.map_err(|e| KbError::Storage(e.to_string()))?;
                version_chain.entry(key).or_default().push(id);
            }
        }
        Ok(LoadedState {
            records,
            version_chain,
        })
    }
}
