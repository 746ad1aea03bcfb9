//! Runtime configuration: database connection, knowledge-base backend, index
//! settings, per-role LLM clients (mock or live), TTS and cascade policy,
//! and scoring coefficients. Mock mode needs no network; every role has a
//! default.

use crate::agents::tts::CascadeRung;
use crate::curation::Coefficients;
use crate::llm::{FixtureLlm, HttpLlm, LlmClient, ScriptedLlm};
use crate::vector::{Embedder, MockEmbedder};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub db: DbConfig,
    pub kb: KbConfig,
    pub index: IndexConfig,
    pub llm: LlmRoles,
    pub tts: TtsConfig,
    pub cascade: CascadeConfig,
    pub eval: EvalConfig,
    pub curation: CurationConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            db: DbConfig::default(),
            kb: KbConfig::default(),
            index: IndexConfig::default(),
            llm: LlmRoles::default(),
            tts: TtsConfig::default(),
            cascade: CascadeConfig::default(),
            eval: EvalConfig::default(),
            curation: CurationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DbConfig {
    /// `sqlite:<path>`, `sqlite::memory:`, or a bare file path.
    pub conn: String,
}

impl Default for DbConfig {
    fn default() -> Self {
        Self {
            conn: "sqlite::memory:".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct KbConfig {
    pub path: String,
    /// "memory", "dir", or "sqlite".
    pub backend: String,
}

impl Default for KbConfig {
    fn default() -> Self {
        Self {
            path: "kb".into(),
            backend: "dir".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexConfig {
    pub gram_order: usize,
    pub vector_k: usize,
    pub lambda: f64,
    pub mmr: bool,
    pub limit: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            gram_order: 2,
            vector_k: 5,
            lambda: 0.5,
            mmr: false,
            limit: 20,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmRoles {
    pub gen: LlmRole,
    pub judge: LlmRole,
    pub synonym: LlmRole,
    pub embedder: EmbedderConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmRole {
    /// "mock" or "live".
    pub mode: String,
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    /// Digest->response fixture file for replay.
    pub fixtures: Option<String>,
    /// Inline scripted rules, matched in order.
    pub script: Vec<ScriptRule>,
}

impl Default for LlmRole {
    fn default() -> Self {
        Self {
            mode: "mock".into(),
            endpoint: String::new(),
            model: "mock".into(),
            api_key_env: String::new(),
            fixtures: None,
            script: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptRule {
    pub contains: Option<String>,
    pub sample_index: Option<usize>,
    pub response: String,
    pub delay_ms: u64,
}

impl Default for ScriptRule {
    fn default() -> Self {
        Self {
            contains: None,
            sample_index: None,
            response: String::new(),
            delay_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    /// "mock" or "live".
    pub mode: String,
    pub dimension: usize,
    pub endpoint: String,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            mode: "mock".into(),
            dimension: 64,
            endpoint: String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TtsConfig {
    pub n: usize,
    /// "first_completed", "llm_judge", or "user_pref".
    pub tie_breaker: String,
}

impl Default for TtsConfig {
    fn default() -> Self {
        Self {
            n: 1,
            tie_breaker: "first_completed".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RungConfig {
    pub model: String,
    pub n: usize,
}

impl Default for RungConfig {
    fn default() -> Self {
        Self {
            model: "mock".into(),
            n: 2,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    pub enabled: bool,
    pub ladder: Vec<RungConfig>,
    pub deadline_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub beta: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { beta: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub alpha: f64,
    pub beta_q: f64,
    pub gamma: f64,
    pub t_max: usize,
    pub diversity_k: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta_q: 1.0,
            gamma: 1.0,
            t_max: 4096,
            diversity_k: 5,
        }
    }
}

impl Config {
    /// Load from an explicit path, else `RUBIK_CONFIG`, else defaults.
    /// `RUBIK_DB_CONN` overrides the database connection string.
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let chosen = path
            .map(|p| p.to_path_buf())
            .or_else(|| std::env::var("RUBIK_CONFIG").ok().map(Into::into));
        let mut config = match chosen {
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("invalid config: {e}"))?
            }
            None => Config::default(),
        };
        if let Ok(conn) = std::env::var("RUBIK_DB_CONN") {
            config.db.conn = conn;
        }
        Ok(config)
    }

    pub fn cascade_ladder(&self) -> Vec<CascadeRung> {
        self.cascade
            .ladder
            .iter()
            .map(|r| CascadeRung {
                model: r.model.clone(),
                n_samples: r.n,
            })
            .collect()
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients {
            alpha: self.curation.alpha,
            beta_q: self.curation.beta_q,
            gamma: self.curation.gamma,
        }
    }
}

/// Build an LLM client for a role. Mock roles never touch the network.
pub fn build_llm(role: &LlmRole) -> Result<Arc<dyn LlmClient>, String> {
    match role.mode.as_str() {
        "mock" => {
            if let Some(fixtures) = &role.fixtures {
                let client = FixtureLlm::from_file(role.model.clone(), fixtures)
                    .map_err(|e| e.to_string())?;
                return Ok(Arc::new(client));
            }
            let mut client = ScriptedLlm::new(role.model.clone());
            for rule in &role.script {
                client = match (&rule.contains, rule.sample_index) {
                    (Some(needle), Some(idx)) => {
                        client.on_sample(needle.clone(), idx, rule.response.clone())
                    }
                    (Some(needle), None) if rule.delay_ms > 0 => client.on_contains_delayed(
                        needle.clone(),
                        rule.response.clone(),
                        rule.delay_ms,
                    ),
                    (Some(needle), None) => {
                        client.on_contains(needle.clone(), rule.response.clone())
                    }
                    (None, _) => client.always(rule.response.clone()),
                };
            }
            Ok(Arc::new(client))
        }
        "live" => {
            let mut client = HttpLlm::new(role.endpoint.clone(), role.model.clone());
            if !role.api_key_env.is_empty() {
                if let Ok(key) = std::env::var(&role.api_key_env) {
                    client = client.with_api_key(key);
                }
            }
            Ok(Arc::new(client))
        }
        other => Err(format!("unknown llm mode `{other}`")),
    }
}

pub fn build_embedder(config: &EmbedderConfig) -> Box<dyn Embedder> {
    // Live embedding endpoints are a deployment concern; the deterministic
    // hash projection stands in everywhere else.
    Box::new(MockEmbedder::new(config.dimension))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_mock_and_offline() {
        let config = Config::default();
        assert_eq!(config.llm.gen.mode, "mock");
        assert_eq!(config.llm.judge.mode, "mock");
        assert_eq!(config.tts.n, 1);
        assert_eq!(config.eval.beta, 1.0);
        assert!(build_llm(&config.llm.gen).is_ok());
    }

    #[test]
    fn partial_toml_parses_with_defaults() {
        let text = r#"
            [db]
            conn = "sqlite:fixture.db"

            [tts]
            n = 8

            [[llm.gen.script]]
            contains = "question"
            response = "```sql\nSELECT 1\n```"
        "#;
        let config: Config = toml::from_str(text).unwrap();
        assert_eq!(config.db.conn, "sqlite:fixture.db");
        assert_eq!(config.tts.n, 8);
        assert_eq!(config.llm.gen.script.len(), 1);
        assert_eq!(config.curation.t_max, 4096);
    }
}
