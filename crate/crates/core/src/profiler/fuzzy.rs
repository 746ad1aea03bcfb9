//! Fuzzy value/column lookup combining lexical and semantic channels.
//!
//! Lexical matching is asymmetric Jaccard containment over token n-grams:
//! `J = |Q ∩ D| / |Q|`, containment of the (short) query keywords in the
//! candidate. Semantic matching is embedding cosine.

use crate::text::Lemmatizer;
use crate::vector::{cosine, Embedder};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("query is empty after tokenization")]
    EmptyQuery,
}

/// Token n-grams of orders 1..=`gram_order`, each gram a space-joined token
/// run over the lemmatized tokens.
pub fn token_grams(text: &str, gram_order: usize, lem: &Lemmatizer) -> BTreeSet<String> {
    let tokens = lem.tokens(text);
    let mut grams = BTreeSet::new();
    for order in 1..=gram_order.max(1) {
        if tokens.len() < order {
            break;
        }
        for window in tokens.windows(order) {
            grams.insert(window.join(" "));
        }
    }
    grams
}

/// `|Q ∩ D| / |Q|` over token n-gram sets; 1.0 whenever the query's grams are
/// contained in the candidate's.
pub fn jaccard_containment(
    query_keywords: &str,
    candidate: &str,
    gram_order: usize,
    lem: &Lemmatizer,
) -> Result<f64, FuzzyError> {
    let q = token_grams(query_keywords, gram_order, lem);
    if q.is_empty() {
        return Err(FuzzyError::EmptyQuery);
    }
    let d = token_grams(candidate, gram_order, lem);
    let hit = q.intersection(&d).count();
    Ok(hit as f64 / q.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Lexical,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyHit {
    pub value: String,
    pub score: f64,
    pub channel: Channel,
}

/// Union of the lexical top-k and semantic top-k, deduplicated keeping the
/// higher score, sorted by score descending (value ascending on ties).
pub fn fuzzy_match(
    keyword: &str,
    candidates: &[String],
    k: usize,
    gram_order: usize,
    lem: &Lemmatizer,
    embedder: Option<&dyn Embedder>,
) -> Result<Vec<FuzzyHit>, FuzzyError> {
    assert!(k >= 1, "k must be at least 1");
    let mut lexical: Vec<FuzzyHit> = Vec::new();
    for cand in candidates {
        let score = jaccard_containment(keyword, cand, gram_order, lem)?;
        lexical.push(FuzzyHit {
            value: cand.clone(),
            score,
            channel: Channel::Lexical,
        });
    }
    lexical.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.value.cmp(&b.value)));
    lexical.truncate(k);

    let mut merged = lexical;
    if let Some(embedder) = embedder {
        let qv = embedder.embed(keyword);
        let mut semantic: Vec<FuzzyHit> = candidates
            .iter()
            .map(|cand| FuzzyHit {
                value: cand.clone(),
                score: cosine(&qv, &embedder.embed(cand)),
                channel: Channel::Semantic,
            })
            .collect();
        semantic.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.value.cmp(&b.value)));
        semantic.truncate(k);
        merged.extend(semantic);
    }

    // Dedup on value, keeping the stronger channel.
    let mut best: std::collections::BTreeMap<String, FuzzyHit> = std::collections::BTreeMap::new();
    for hit in merged {
        match best.get(&hit.value) {
            Some(held) if held.score >= hit.score => {}
            _ => {
                best.insert(hit.value.clone(), hit);
            }
        }
    }
    let mut out: Vec<FuzzyHit> = best.into_values().collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.value.cmp(&b.value)));
    Ok(out)
}

/// Fuzzy search over enum values.
pub fn fuzzy_enum(
    values: &[String],
    keyword: &str,
    k: usize,
    gram_order: usize,
    lem: &Lemmatizer,
    embedder: Option<&dyn Embedder>,
) -> Result<Vec<FuzzyHit>, FuzzyError> {
    fuzzy_match(keyword, values, k, gram_order, lem, embedder)
}

/// Fuzzy search over column names, matching against name plus description but
/// reporting the column name.
pub fn fuzzy_column(
    columns: &[(String, String)],
    keyword: &str,
    k: usize,
    gram_order: usize,
    lem: &Lemmatizer,
    embedder: Option<&dyn Embedder>,
) -> Result<Vec<FuzzyHit>, FuzzyError> {
    let combined: Vec<String> = columns
        .iter()
        .map(|(name, desc)| {
            if desc.is_empty() {
                name.clone()
            } else {
                format!("{name} {desc}")
            }
        })
        .collect();
    let hits = fuzzy_match(keyword, &combined, k, gram_order, lem, embedder)?;
    Ok(hits
        .into_iter()
        .map(|hit| {
            let idx = combined.iter().position(|c| *c == hit.value).unwrap();
            FuzzyHit {
                value: columns[idx].0.clone(),
                ..hit
            }
        })
        .collect())
}
