//! Pluggable chat-completion clients.
//!
//! The scripted mock is referentially transparent: a fixed rule list maps
//! requests to responses, so every run is bit-reproducible. The HTTP client
//! speaks a chat-completion contract and counts its attempts so offline test
//! suites can assert that no network call was ever made.

use crate::ukf::hash::sha256_hex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no scripted response matches the request (digest {0})")]
    NoScript(String),
    #[error("llm transport error: {0}")]
    Transport(String),
    #[error("llm response malformed: {0}")]
    BadResponse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f64,
    pub max_tokens: usize,
    /// Distinguishes samples in n>1 runs so a scripted mock can answer each
    /// sample differently while staying deterministic.
    pub sample_index: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 4096,
            sample_index: 0,
        }
    }
}

/// Canonical digest of a request, used for fixture recording and trace output.
pub fn request_digest(messages: &[ChatMessage], params: &GenParams) -> String {
    let doc = serde_json::json!({ "messages": messages, "params": params });
    sha256_hex(crate::ukf::hash::canonical_json(&doc).as_bytes())
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], params: &GenParams) -> Result<String, LlmError>;
    fn name(&self) -> &str;
    fn supports_sampling(&self) -> bool {
        true
    }
}

/// How a scripted rule decides whether it answers a request.
#[derive(Debug, Clone)]
enum RuleMatcher {
    Always,
    /// Substring of the last user message or the whole prompt.
    Contains(String),
    /// All substrings present in the concatenated prompt.
    ContainsAll(Vec<String>),
    /// Exact request digest.
    Digest(String),
    /// Substring match plus a specific sample index.
    ContainsAtSample(String, usize),
}

#[derive(Debug, Clone)]
struct Rule {
    matcher: RuleMatcher,
    response: String,
    delay_ms: u64,
}

/// Deterministic scripted client: first matching rule wins.
pub struct ScriptedLlm {
    name: String,
    rules: Mutex<Vec<Rule>>,
    calls: AtomicU64,
}

impl ScriptedLlm {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            rules: Mutex::new(Vec::new()),
            calls: AtomicU64::new(0),
        }
    }

    fn push(&self, matcher: RuleMatcher, response: impl Into<String>, delay_ms: u64) {
        self.rules.lock().unwrap().push(Rule {
            matcher,
            response: response.into(),
            delay_ms,
        });
    }

    pub fn always(self, response: impl Into<String>) -> Self {
        self.push(RuleMatcher::Always, response, 0);
        self
    }

    pub fn on_contains(self, needle: impl Into<String>, response: impl Into<String>) -> Self {
        self.push(RuleMatcher::Contains(needle.into()), response, 0);
        self
    }

    pub fn on_contains_all<I, S>(self, needles: I, response: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let needles = needles.into_iter().map(Into::into).collect();
        self.push(RuleMatcher::ContainsAll(needles), response, 0);
        self
    }

    pub fn on_digest(self, digest: impl Into<String>, response: impl Into<String>) -> Self {
        self.push(RuleMatcher::Digest(digest.into()), response, 0);
        self
    }

    pub fn on_sample(
        self,
        needle: impl Into<String>,
        sample_index: usize,
        response: impl Into<String>,
    ) -> Self {
        self.push(
            RuleMatcher::ContainsAtSample(needle.into(), sample_index),
            response,
            0,
        );
        self
    }

    /// Same as `on_contains` but the reply is delivered after a simulated
    /// latency; used to exercise cascade termination.
    pub fn on_contains_delayed(
        self,
        needle: impl Into<String>,
        response: impl Into<String>,
        delay_ms: u64,
    ) -> Self {
        self.push(RuleMatcher::Contains(needle.into()), response, delay_ms);
        self
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmClient for ScriptedLlm {
    fn complete(&self, messages: &[ChatMessage], params: &GenParams) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let last_user = messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let full: String = messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let digest = request_digest(messages, params);
        let picked = {
            let rules = self.rules.lock().unwrap();
            rules
                .iter()
                .find(|rule| match &rule.matcher {
                    RuleMatcher::Always => true,
                    RuleMatcher::Contains(n) => last_user.contains(n) || full.contains(n),
                    RuleMatcher::ContainsAll(ns) => ns.iter().all(|n| full.contains(n)),
                    RuleMatcher::Digest(d) => *d == digest,
                    RuleMatcher::ContainsAtSample(n, idx) => {
                        (last_user.contains(n) || full.contains(n))
                            && params.sample_index == *idx
                    }
                })
                .map(|r| (r.response.clone(), r.delay_ms))
        };
        match picked {
            Some((response, delay)) => {
                if delay > 0 {
                    std::thread::sleep(std::time::Duration::from_millis(delay));
                }
                Ok(response)
            }
            None => Err(LlmError::NoScript(digest)),
        }
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Replay client: a digest -> response map recorded from earlier runs.
pub struct FixtureLlm {
    name: String,
    responses: BTreeMap<String, String>,
}

impl FixtureLlm {
    pub fn from_file(name: impl Into<String>, path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| LlmError::Transport(e.to_string()))?;
        let responses: BTreeMap<String, String> =
            serde_json::from_str(&text).map_err(|e| LlmError::BadResponse(e.to_string()))?;
        Ok(Self {
            name: name.into(),
            responses,
        })
    }

    pub fn from_map(name: impl Into<String>, responses: BTreeMap<String, String>) -> Self {
        Self {
            name: name.into(),
            responses,
        }
    }
}

impl LlmClient for FixtureLlm {
    fn complete(&self, messages: &[ChatMessage], params: &GenParams) -> Result<String, LlmError> {
        let digest = request_digest(messages, params);
        self.responses
            .get(&digest)
            .cloned()
            .ok_or(LlmError::NoScript(digest))
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Wrapper that records digest -> response pairs while delegating.
pub struct RecordingLlm<'a> {
    inner: &'a dyn LlmClient,
    pub recorded: Mutex<BTreeMap<String, String>>,
}

impl<'a> RecordingLlm<'a> {
    pub fn new(inner: &'a dyn LlmClient) -> Self {
        Self {
            inner,
            recorded: Mutex::new(BTreeMap::new()),
        }
    }
}

impl LlmClient for RecordingLlm<'_> {
    fn complete(&self, messages: &[ChatMessage], params: &GenParams) -> Result<String, LlmError> {
        let out = self.inner.complete(messages, params)?;
        self.recorded
            .lock()
            .unwrap()
            .insert(request_digest(messages, params), out.clone());
        Ok(out)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// Global count of live HTTP attempts; offline suites assert this stays zero.
pub static NETWORK_ATTEMPTS: AtomicU64 = AtomicU64::new(0);

/// Chat-completion HTTP client.
pub struct HttpLlm {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    name: String,
}

impl HttpLlm {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        let model = model.into();
        Self {
            endpoint: endpoint.into(),
            name: format!("http:{model}"),
            model,
            api_key: None,
        }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }
}

impl LlmClient for HttpLlm {
    fn complete(&self, messages: &[ChatMessage], params: &GenParams) -> Result<String, LlmError> {
        NETWORK_ATTEMPTS.fetch_add(1, Ordering::SeqCst);
        let body = serde_json::json!({
            "model": self.model,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let mut req = ureq::post(&self.endpoint).set("content-type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("authorization", &format!("Bearer {key}"));
        }
        let resp = req
            .send_json(body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let doc: serde_json::Value = resp
            .into_json()
            .map_err(|e| LlmError::BadResponse(e.to_string()))?;
        doc.pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| LlmError::BadResponse("missing choices[0].message.content".into()))
    }

    fn name(&self) -> &str {
        &self.name
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_rules_are_ordered_and_deterministic() {
        let llm = ScriptedLlm::new("mock")
            .on_contains("alpha", "A")
            .on_contains("beta", "B")
            .always("fallback");
        let p = GenParams::default();
        let msg = |s: &str| vec![ChatMessage::user(s)];
        assert_eq!(llm.complete(&msg("has alpha inside"), &p).unwrap(), "A");
        assert_eq!(llm.complete(&msg("beta here"), &p).unwrap(), "B");
        assert_eq!(llm.complete(&msg("nothing"), &p).unwrap(), "fallback");
        assert_eq!(llm.complete(&msg("has alpha inside"), &p).unwrap(), "A");
    }

    #[test]
    fn no_script_is_an_error() {
        let llm = ScriptedLlm::new("mock").on_contains("x", "X");
        let err = llm.complete(&[ChatMessage::user("y")], &GenParams::default());
        assert!(matches!(err, Err(LlmError::NoScript(_))));
    }

    #[test]
    fn sample_index_distinguishes_responses() {
        let llm = ScriptedLlm::new("mock")
            .on_sample("q", 0, "first")
            .on_sample("q", 1, "second");
        let msg = vec![ChatMessage::user("q")];
        let p0 = GenParams {
            sample_index: 0,
            ..Default::default()
        };
        let p1 = GenParams {
            sample_index: 1,
            ..Default::default()
        };
        assert_eq!(llm.complete(&msg, &p0).unwrap(), "first");
        assert_eq!(llm.complete(&msg, &p1).unwrap(), "second");
    }

    #[test]
    fn fixture_replay_round_trip() {
        let inner = ScriptedLlm::new("mock").always("scripted answer");
        let recorder = RecordingLlm::new(&inner);
        let msg = vec![ChatMessage::user("hello")];
        let p = GenParams::default();
        recorder.complete(&msg, &p).unwrap();
        let map = recorder.recorded.lock().unwrap().clone();
        let replay = FixtureLlm::from_map("replay", map);
        assert_eq!(replay.complete(&msg, &p).unwrap(), "scripted answer");
        let other = vec![ChatMessage::user("different")];
        assert!(replay.complete(&other, &p).is_err());
    }
}
