//! Shared command context: config, knowledge base, database driver, and LLM
//! clients resolved once per invocation.

use crate::commands::CmdError;
use crate::Format;
use rubik_core::config::{build_embedder, build_llm, Config};
use rubik_core::kb::KnowledgeBase;
use rubik_core::llm::{FixtureLlm, LlmClient};
use rubik_core::profiler::driver::{SqlDriver, SqliteDriver};
use std::path::Path;
use std::sync::Arc;

pub struct CliContext {
    pub config: Config,
    pub format: Format,
}

impl CliContext {
    pub fn load(config_path: Option<&Path>, format: Format) -> Result<Self, CmdError> {
        let config = Config::load(config_path).map_err(CmdError::Usage)?;
        Ok(Self { config, format })
    }

    pub fn open_kb(&self) -> Result<KnowledgeBase, CmdError> {
        let kb = match self.config.kb.backend.as_str() {
            "memory" => KnowledgeBase::in_memory(),
            "dir" => KnowledgeBase::open_dir(&self.config.kb.path)
                .map_err(|e| CmdError::Failed(e.to_string()))?,
            "sqlite" => KnowledgeBase::open_sqlite(&self.config.kb.path)
                .map_err(|e| CmdError::Failed(e.to_string()))?,
            other => return Err(CmdError::Usage(format!("unknown kb backend `{other}`"))),
        };
        Ok(kb)
    }

    pub fn open_db(&self, conn_override: Option<&str>) -> Result<Box<dyn SqlDriver>, CmdError> {
        let conn = conn_override.unwrap_or(&self.config.db.conn);
        rubik_core::profiler::driver::connect(conn).map_err(|e| CmdError::Failed(e.to_string()))
    }

    pub fn db_factory(
        &self,
        conn_override: Option<&str>,
    ) -> Result<Arc<dyn rubik_core::profiler::driver::DriverFactory>, CmdError> {
        let conn = conn_override.unwrap_or(&self.config.db.conn).to_string();
        if conn == "sqlite::memory:" || conn == "sqlite:" {
            return Err(CmdError::Usage(
                "parallel execution needs a file-backed database connection".into(),
            ));
        }
        rubik_core::profiler::driver::connect_factory(&conn)
            .map(Arc::from)
            .map_err(|e| CmdError::Failed(e.to_string()))
    }

    /// Client for a role, optionally overridden by `<fixtures>/<role>.json`.
    pub fn llm_role(
        &self,
        role: &str,
        fixtures: Option<&Path>,
    ) -> Result<Arc<dyn LlmClient>, CmdError> {
        if let Some(dir) = fixtures {
            let file = dir.join(format!("{role}.json"));
            if file.exists() {
                let client = FixtureLlm::from_file(role.to_string(), &file)
                    .map_err(|e| CmdError::Failed(e.to_string()))?;
                return Ok(Arc::new(client));
            }
        }
        let role_config = match role {
            "gen" => &self.config.llm.gen,
            "judge" => &self.config.llm.judge,
            "synonym" => &self.config.llm.synonym,
            other => return Err(CmdError::Usage(format!("unknown llm role `{other}`"))),
        };
        build_llm(role_config).map_err(CmdError::Usage)
    }

    pub fn embedder(&self) -> Box<dyn rubik_core::vector::Embedder> {
        build_embedder(&self.config.llm.embedder)
    }

    pub fn indices(
        &self,
        kb: &KnowledgeBase,
    ) -> Result<rubik_core::agents::IndexSet, CmdError> {
        rubik_core::agents::IndexSet::build(kb, self.embedder())
            .map_err(|e| CmdError::Failed(e.to_string()))
    }
}

/// Seed an in-memory database when the connection string carries a fixture
/// script (used by tests and demos): `sqlite::memory:` with `RUBIK_DB_SEED`
/// pointing at a SQL file.
pub fn apply_seed(db: &dyn SqlDriver) -> Result<(), CmdError> {
    if let Ok(seed) = std::env::var("RUBIK_DB_SEED") {
        let sql =
            std::fs::read_to_string(&seed).map_err(|e| CmdError::Failed(format!("seed: {e}")))?;
        db.execute(&sql)
            .map_err(|e| CmdError::Failed(format!("seed: {e}")))?;
    }
    Ok(())
}
