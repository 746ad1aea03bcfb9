//! Multi-vector index: six serializers turn records and queries into
//! embedding keys; each serializer owns a separate index supporting exact
//! top-k ("naive ANN" at desk scale) and MMR search over cosine similarity.

use crate::scalar::Scalar;
use crate::text::Lemmatizer;
use crate::ukf::{tags, UkfId, UkfRecord};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("no vectors indexed under serializer `{0}`")]
    EmptyIndex(String),
    #[error("serializer `{serializer}` requires annotations: {detail}")]
    MissingAnnotations { serializer: String, detail: String },
    #[error("vector dimension {got} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector contains non-finite values")]
    NonFinite,
}

/// Embedding-key serializers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Serializer {
    Query,
    QuerySketch,
    Tags,
    Sql,
    Header,
    Cot,
}

impl Serializer {
    pub fn as_str(&self) -> &'static str {
        match self {
            Serializer::Query => "query",
            Serializer::QuerySketch => "query_sketch",
            Serializer::Tags => "tags",
            Serializer::Sql => "sql",
            Serializer::Header => "header",
            Serializer::Cot => "cot",
        }
    }
}

/// Entity span in a query, in character offsets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntityAnnotation {
    pub start: usize,
    pub end: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Side information for query-side serialization: entity spans for sketches,
/// named texts (sql/header/cot) for second-pass retrieval.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default)]
    pub entities: Vec<EntityAnnotation>,
    #[serde(default)]
    pub texts: BTreeMap<String, String>,
}

fn missing(serializer: Serializer, detail: &str) -> VectorError {
    VectorError::MissingAnnotations {
        serializer: serializer.as_str().to_string(),
        detail: detail.to_string(),
    }
}

/// Serialize a query into a deterministic embedding key.
pub fn serialize_query(
    text: &str,
    serializer: Serializer,
    annotations: Option<&Annotations>,
) -> Result<String, VectorError> {
    match serializer {
        Serializer::Query => Ok(text.to_string()),
        Serializer::QuerySketch => {
            let ann = annotations.ok_or_else(|| missing(serializer, "entity spans required"))?;
            sketch(text, &ann.entities)
        }
        Serializer::Tags => {
            let ann = annotations.ok_or_else(|| missing(serializer, "tags or entities required"))?;
            if let Some(t) = ann.texts.get("tags") {
                return Ok(t.clone());
            }
            if ann.entities.is_empty() {
                return Err(missing(serializer, "tags or entities required"));
            }
            let chars: Vec<char> = text.chars().collect();
            let mut keys: Vec<String> = ann
                .entities
                .iter()
                .map(|e| {
                    let surface: String = chars
                        .get(e.start..e.end)
                        .map(|s| s.iter().collect())
                        .unwrap_or_default();
                    let value = e.label.clone().unwrap_or(surface);
                    tags::format_tag(&e.kind, &value)
                })
                .collect();
            keys.sort();
            keys.dedup();
            Ok(keys.join("|"))
        }
        Serializer::Sql | Serializer::Header | Serializer::Cot => {
            let key = serializer.as_str();
            annotations
                .and_then(|a| a.texts.get(key).cloned())
                .ok_or_else(|| missing(serializer, "generated text not supplied"))
        }
    }
}

/// Serialize a record into its embedding key for one serializer.
pub fn serialize_record(record: &UkfRecord, serializer: Serializer) -> Result<String, VectorError> {
    match serializer {
        Serializer::Query => Ok(if record.content.is_empty() {
            record.name.clone()
        } else {
            record.content.clone()
        }),
        Serializer::QuerySketch => resource_text(record, "query_sketch")
            .ok_or_else(|| missing(serializer, "record lacks content_resources.query_sketch")),
        Serializer::Tags => {
            let mut keys: Vec<String> = record.tags.iter().cloned().collect();
            keys.sort();
            Ok(keys.join("|"))
        }
        Serializer::Sql => resource_text(record, "sql")
            .ok_or_else(|| missing(serializer, "record lacks content_resources.sql")),
        Serializer::Header => resource_text(record, "header")
            .ok_or_else(|| missing(serializer, "record lacks content_resources.header")),
        Serializer::Cot => resource_text(record, "cot")
            .ok_or_else(|| missing(serializer, "record lacks content_resources.cot")),
    }
}

fn resource_text(record: &UkfRecord, key: &str) -> Option<String> {
    record
        .content_resources
        .get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
}

/// Replace entity spans with `[KIND]` or `[LABEL as KIND]` placeholders.
fn sketch(text: &str, entities: &[EntityAnnotation]) -> Result<String, VectorError> {
    let chars: Vec<char> = text.chars().collect();
    let mut spans: Vec<&EntityAnnotation> = entities.iter().collect();
    spans.sort_by_key(|e| (e.start, e.end));
    for pair in spans.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(missing(Serializer::QuerySketch, "overlapping entity spans"));
        }
    }
    let mut out = String::new();
    let mut cursor = 0usize;
    for e in spans {
        if e.end > chars.len() || e.start >= e.end {
            return Err(missing(Serializer::QuerySketch, "span out of range"));
        }
        out.extend(&chars[cursor..e.start]);
        let kind = e.kind.to_uppercase();
        match &e.label {
            Some(label) => out.push_str(&format!("[{} as {}]", label.to_uppercase(), kind)),
            None => out.push_str(&format!("[{kind}]")),
        }
        cursor = e.end;
    }
    out.extend(&chars[cursor..]);
    Ok(out)
}

/// Text embedding client.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Vec<f64>;
    fn id(&self) -> &str;
    fn dimension(&self) -> usize;
}

/// Deterministic hash-projection embedder: each lemmatized token maps to a
/// fixed pseudo-random vector; a text embeds to the normalized token sum.
pub struct MockEmbedder {
    dimension: usize,
    lemmatizer: Lemmatizer,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self::new(64)
    }
}

impl MockEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            lemmatizer: Lemmatizer::rule_based(),
        }
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, text: &str) -> Vec<f64> {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let tokens = self.lemmatizer.tokens(text);
        let mut acc = vec![0.0f64; self.dimension];
        for token in &tokens {
            let digest = crate::ukf::hash::sha256_hex(token.as_bytes());
            let seed = u64::from_str_radix(&digest[..16], 16).unwrap_or(0);
            let mut rng = StdRng::seed_from_u64(seed);
            for a in acc.iter_mut() {
                *a += rng.gen_range(-1.0..1.0);
            }
        }
        normalized_or_basis(acc)
    }

    fn id(&self) -> &str {
        "mock-hash-projection"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }
}

/// Embedder with pinned vectors for chosen texts, falling back to the hash
/// projection. Lets tests give specific pairs a known geometry.
pub struct StubEmbedder {
    base: MockEmbedder,
    pinned: BTreeMap<String, Vec<f64>>,
}

impl StubEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self {
            base: MockEmbedder::new(dimension),
            pinned: BTreeMap::new(),
        }
    }

    pub fn pin(mut self, text: impl Into<String>, vector: Vec<f64>) -> Self {
        let mut v = vector;
        v.resize(self.base.dimension(), 0.0);
        self.pinned.insert(text.into(), normalized_or_basis(v));
        self
    }
}

impl Embedder for StubEmbedder {
    fn embed(&self, text: &str) -> Vec<f64> {
        self.pinned
            .get(text)
            .cloned()
            .unwrap_or_else(|| self.base.embed(text))
    }

    fn id(&self) -> &str {
        "stub"
    }

    fn dimension(&self) -> usize {
        self.base.dimension()
    }
}

fn normalized_or_basis(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
        v
    } else {
        let mut basis = vec![0.0; v.len()];
        if !basis.is_empty() {
            basis[0] = 1.0;
        }
        basis
    }
}

pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> S {
    let dot = a.iter().zip(b).map(|(x, y)| *x * *y).sum::<S>();
    let na = a.iter().map(|x| *x * *x).sum::<S>().sqrt();
    let nb = b.iter().map(|x| *x * *x).sum::<S>().sqrt();
    if na == S::zero() || nb == S::zero() {
        S::zero()
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Ann,
    Mmr,
}

/// Greedy MMR selection over precomputed query similarities. Returns indices
/// in selection order. Ties break toward the lower index.
pub fn mmr_select<S, F>(query_sim: &[S], pair_sim: F, k: usize, lambda: S) -> Vec<usize>
where
    S: Scalar,
    F: Fn(usize, usize) -> S,
{
    let n = query_sim.len();
    let mut selected: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..n).collect();
    while selected.len() < k && !remaining.is_empty() {
        let mut best_pos = 0usize;
        let mut best_score = S::neg_infinity();
        for (pos, &cand) in remaining.iter().enumerate() {
            let redundancy = selected
                .iter()
                .map(|&s| pair_sim(cand, s))
                .fold(S::neg_infinity(), |a, b| a.max(b));
            let redundancy = if selected.is_empty() {
                S::zero()
            } else {
                redundancy
            };
            let score = lambda * query_sim[cand] - (S::one() - lambda) * redundancy;
            if score > best_score {
                best_score = score;
                best_pos = pos;
            }
        }
        selected.push(remaining.remove(best_pos));
    }
    selected
}

/// Per-serializer vector index. All vectors in one index share the embedder
/// dimension and are unit-normalized on insert.
pub struct VectorIndex {
    pub embedder_id: String,
    pub dimension: usize,
    indices: BTreeMap<String, Vec<(Vec<f64>, UkfId)>>,
}

impl VectorIndex {
    pub fn new(embedder: &dyn Embedder) -> Self {
        Self {
            embedder_id: embedder.id().to_string(),
            dimension: embedder.dimension(),
            indices: BTreeMap::new(),
        }
    }

    pub fn insert_vector(
        &mut self,
        serializer: Serializer,
        vector: Vec<f64>,
        id: UkfId,
    ) -> Result<(), VectorError> {
        if vector.len() != self.dimension {
            return Err(VectorError::DimensionMismatch {
                expected: self.dimension,
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite);
        }
        self.indices
            .entry(serializer.as_str().to_string())
            .or_default()
            .push((normalized_or_basis(vector), id));
        Ok(())
    }

    /// Serialize and embed a record under one serializer. Records the
    /// serializer cannot describe (e.g. no stored sql) are skipped.
    pub fn index_record(
        &mut self,
        record: &UkfRecord,
        serializer: Serializer,
        embedder: &dyn Embedder,
    ) -> Result<bool, VectorError> {
        match serialize_record(record, serializer) {
            Ok(key) => {
                let v = embedder.embed(&key);
                self.insert_vector(serializer, v, record.id.clone())?;
                Ok(true)
            }
            Err(VectorError::MissingAnnotations { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }

    pub fn len(&self, serializer: Serializer) -> usize {
        self.indices
            .get(serializer.as_str())
            .map(Vec::len)
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.values().all(Vec::is_empty)
    }

    pub fn serializers(&self) -> Vec<String> {
        self.indices.keys().cloned().collect()
    }

    /// Top-k search. `ann` ranks by cosine similarity; `mmr` greedily trades
    /// relevance against redundancy with weight `lambda` (`lambda = 1`
    /// reduces to ann ordering).
    pub fn search(
        &self,
        serializer: Serializer,
        key_vector: &[f64],
        k: usize,
        mode: SearchMode,
        lambda: f64,
    ) -> Result<Vec<(UkfId, f64)>, VectorError> {
        assert!(k >= 1, "k must be at least 1");
        assert!(
            (0.0..=1.0).contains(&lambda),
            "lambda must lie in [0, 1]"
        );
        let entries = self
            .indices
            .get(serializer.as_str())
            .filter(|v| !v.is_empty())
            .ok_or_else(|| VectorError::EmptyIndex(serializer.as_str().to_string()))?;
        let query = normalized_or_basis(key_vector.to_vec());
        let sims: Vec<f64> = entries.iter().map(|(v, _)| cosine(&query, v)).collect();

        // Deterministic candidate order: similarity desc, id asc.
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by(|&a, &b| {
            sims[b]
                .total_cmp(&sims[a])
                .then_with(|| entries[a].1.cmp(&entries[b].1))
        });

        match mode {
            SearchMode::Ann => Ok(order
                .into_iter()
                .take(k)
                .map(|i| (entries[i].1.clone(), sims[i]))
                .collect()),
            SearchMode::Mmr => {
                let ordered_sims: Vec<f64> = order.iter().map(|&i| sims[i]).collect();
                let pair = |a: usize, b: usize| cosine(&entries[order[a]].0, &entries[order[b]].0);
                let picks = mmr_select(&ordered_sims, pair, k, lambda);
                Ok(picks
                    .into_iter()
                    .map(|p| (entries[order[p]].1.clone(), ordered_sims[p]))
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ann(entities: Vec<EntityAnnotation>) -> Annotations {
        Annotations {
            entities,
            texts: BTreeMap::new(),
        }
    }

    fn ent(start: usize, end: usize, kind: &str) -> EntityAnnotation {
        EntityAnnotation {
            start,
            end,
            kind: kind.into(),
            label: None,
        }
    }

    #[test]
    fn basic_query_sketch() {
        let text = "List the revenues of top 10 customers from North America.";
        let entities = vec![
            ent(9, 17, "COLUMN"),
            ent(25, 27, "VALUE"),
            ent(28, 37, "COLUMN"),
            ent(43, 56, "ENUM"),
        ];
        let s = serialize_query(text, Serializer::QuerySketch, Some(&ann(entities))).unwrap();
        assert_eq!(s, "List the [COLUMN] of top [VALUE] [COLUMN] from [ENUM].");
    }

    #[test]
    fn taxonomy_aware_sketch() {
        let text = "List the revenues of top 10 customers from North America.";
        let entities = vec![
            EntityAnnotation { start: 9, end: 17, kind: "COLUMN".into(), label: Some("REPORT_ITEM".into()) },
            ent(25, 27, "VALUE"),
            EntityAnnotation { start: 28, end: 37, kind: "COLUMN".into(), label: Some("CUSTOMER".into()) },
            EntityAnnotation { start: 43, end: 56, kind: "ENUM".into(), label: Some("REGION".into()) },
        ];
        let s = serialize_query(text, Serializer::QuerySketch, Some(&ann(entities))).unwrap();
        assert_eq!(
            s,
            "List the [REPORT_ITEM as COLUMN] of top [VALUE] [CUSTOMER as COLUMN] from [REGION as ENUM]."
        );
    }

    #[test]
    fn sketch_requires_annotations() {
        let err = serialize_query("x", Serializer::QuerySketch, None);
        assert!(matches!(err, Err(VectorError::MissingAnnotations { .. })));
    }

    #[test]
    fn tags_serializer_is_sorted_and_pipe_joined() {
        let record = crate::ukf::UkfRecord::from_value(json!({
            "name": "r",
            "tags": ["[COLUMN:region]", "[COLUMN:customer]", "[ENUM:revenue]"]
        }))
        .unwrap();
        let s = serialize_record(&record, Serializer::Tags).unwrap();
        assert_eq!(s, "[COLUMN:customer]|[COLUMN:region]|[ENUM:revenue]");
    }

    #[test]
    fn mock_embedder_is_deterministic_and_unit_norm() {
        let e = MockEmbedder::new(32);
        let a = e.embed("running plants");
        let b = e.embed("running plants");
        assert_eq!(a, b);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_eq!(e.embed(""), {
            let mut v = vec![0.0; 32];
            v[0] = 1.0;
            v
        });
    }

    #[test]
    fn single_item_search() {
        let e = MockEmbedder::new(16);
        let mut idx = VectorIndex::new(&e);
        idx.insert_vector(Serializer::Query, e.embed("hello"), "id1".into())
            .unwrap();
        let out = idx
            .search(Serializer::Query, &e.embed("hello"), 3, SearchMode::Ann, 0.5)
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, "id1");
        assert!(matches!(
            idx.search(Serializer::Sql, &e.embed("x"), 1, SearchMode::Ann, 0.5),
            Err(VectorError::EmptyIndex(_))
        ));
    }

    #[test]
    fn mmr_lambda_one_equals_ann() {
        let e = MockEmbedder::new(24);
        let mut idx = VectorIndex::new(&e);
        for (i, text) in ["alpha beta", "beta gamma", "delta", "alpha delta", "epsilon"]
            .iter()
            .enumerate()
        {
            idx.insert_vector(Serializer::Query, e.embed(text), format!("id{i}"))
                .unwrap();
        }
        let q = e.embed("alpha");
        let ann = idx
            .search(Serializer::Query, &q, 4, SearchMode::Ann, 1.0)
            .unwrap();
        let mmr = idx
            .search(Serializer::Query, &q, 4, SearchMode::Mmr, 1.0)
            .unwrap();
        assert_eq!(ann, mmr);
    }

    #[test]
    fn mmr_skips_duplicate_vectors() {
        // Hand-evaluated greedy recurrence with query q = [0.8, 0.6]:
        //   sims: dup = 0.8, distinct = 0.96 -> first pick: distinct.
        //   second step: dup scores 0.5*0.8 - 0.5*sim(dup,distinct=0.6) = 0.1,
        //   so exactly one of the duplicates joins the distinct item.
        let dim = 4;
        let e = MockEmbedder::new(dim);
        let mut idx = VectorIndex::new(&e);
        let dup = vec![1.0, 0.0, 0.0, 0.0];
        idx.insert_vector(Serializer::Query, dup.clone(), "dup_a".into())
            .unwrap();
        idx.insert_vector(Serializer::Query, dup, "dup_b".into()).unwrap();
        idx.insert_vector(Serializer::Query, vec![0.6, 0.8, 0.0, 0.0], "distinct".into())
            .unwrap();
        let q = vec![0.8, 0.6, 0.0, 0.0];
        let out = idx
            .search(Serializer::Query, &q, 2, SearchMode::Mmr, 0.5)
            .unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].0, "distinct");
        assert_eq!(out[1].0, "dup_a");
    }
}
