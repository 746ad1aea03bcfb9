//! RAG agent: either a static pipeline (all string-index matches plus top-k
//! multi-vector results, fused) or an LLM-driven tool loop over the index
//! APIs with a step budget.

use super::AgentError;
use crate::daac::DaacIndex;
use crate::facet::{FacetPredicates, FacetStore};
use crate::fusion::{fuse, FusionPolicy, IndexResults, KnowledgeBundle, ScoredItem, SourceIndex};
use crate::graph::graph_neighbors;
use crate::kb::KnowledgeBase;
use crate::llm::{ChatMessage, GenParams, LlmClient};
use crate::ukf::{Context, UkfId};
use crate::vector::{Embedder, SearchMode, Serializer, VectorIndex};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RagMode {
    StaticPipeline,
    Agentic,
}

#[derive(Debug, Clone)]
pub struct RagConfig {
    pub mode: RagMode,
    /// Top-k per vector serializer in static mode.
    pub vector_k: usize,
    pub fusion: FusionPolicy,
    pub limit: usize,
    /// Ask a one-off LLM to summarize the fused bundle.
    pub summarize: bool,
    /// Tool-call budget in agentic mode.
    pub step_budget: usize,
}

impl Default for RagConfig {
    fn default() -> Self {
        Self {
            mode: RagMode::StaticPipeline,
            vector_k: 5,
            fusion: FusionPolicy::RoundRobin,
            limit: 20,
            summarize: false,
            step_budget: 8,
        }
    }
}

/// The retrieval indices built over one knowledge base revision.
pub struct IndexSet {
    pub daac: Option<DaacIndex>,
    pub vector: Option<VectorIndex>,
    pub facet: Option<FacetStore>,
    pub embedder: Box<dyn Embedder>,
    pub kb_revision: u64,
}

impl IndexSet {
    /// Build the default index set: string index over name+synonyms, a
    /// query-serializer vector index, and the facet store.
    pub fn build(kb: &KnowledgeBase, embedder: Box<dyn Embedder>) -> Result<Self, AgentError> {
        let lemmatizer = crate::text::Lemmatizer::rule_based();
        let entries: Vec<(UkfId, BTreeSet<String>)> = kb
            .live_records()
            .map(|r| {
                let mut surfaces: BTreeSet<String> = r.synonyms.clone();
                surfaces.insert(r.name.clone());
                (r.id.clone(), surfaces)
            })
            .collect();
        let daac = if entries.is_empty() {
            None
        } else {
            Some(
                DaacIndex::build(&entries, lemmatizer)
                    .map_err(|e| AgentError::IndexUnavailable(e.to_string()))?,
            )
        };
        let mut vector = VectorIndex::new(embedder.as_ref());
        for record in kb.live_records() {
            for serializer in [Serializer::Query, Serializer::Tags] {
                vector
                    .index_record(record, serializer, embedder.as_ref())
                    .map_err(|e| AgentError::IndexUnavailable(e.to_string()))?;
            }
        }
        let mut facet = FacetStore::in_memory()
            .map_err(|e| AgentError::IndexUnavailable(e.to_string()))?;
        facet
            .rebuild(kb)
            .map_err(|e| AgentError::IndexUnavailable(e.to_string()))?;
        Ok(Self {
            daac,
            vector: (!vector.is_empty()).then_some(vector),
            facet: Some(facet),
            embedder,
            kb_revision: kb.revision(),
        })
    }
}

fn daac_results(index: &IndexSet, kb: &KnowledgeBase, query: &str) -> IndexResults {
    let mut items = Vec::new();
    if let Some(daac) = &index.daac {
        let matches = daac.match_all(query);
        let mut per_record: BTreeMap<UkfId, (f64, Vec<crate::daac::Match>)> = BTreeMap::new();
        for m in matches {
            for id in &m.knowledge_ids {
                let entry = per_record.entry(id.clone()).or_insert((0.0, Vec::new()));
                entry.0 += 1.0;
                entry.1.push(m.clone());
            }
        }
        for (id, (score, spans)) in per_record {
            if let Some(record) = kb.get(&id).filter(|r| !r.inactive_mark) {
                items.push(ScoredItem {
                    record: record.clone(),
                    score,
                    match_spans: Some(spans),
                });
            }
        }
        // Highest hit count first so round-robin sees the strongest match.
        items.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.record.id.cmp(&b.record.id))
        });
    }
    IndexResults {
        source: SourceIndex::Daac,
        items,
    }
}

fn vector_results(index: &IndexSet, kb: &KnowledgeBase, query: &str, k: usize) -> Vec<IndexResults> {
    let mut out = Vec::new();
    let Some(vector) = &index.vector else {
        return out;
    };
    let qv = index.embedder.embed(query);
    for serializer in [Serializer::Query, Serializer::Tags] {
        if vector.len(serializer) == 0 {
            continue;
        }
        if let Ok(hits) = vector.search(serializer, &qv, k, SearchMode::Ann, 1.0) {
            let items = hits
                .into_iter()
                .filter_map(|(id, score)| {
                    kb.get(&id).filter(|r| !r.inactive_mark).map(|record| ScoredItem {
                        record: record.clone(),
                        score,
                        match_spans: None,
                    })
                })
                .collect();
            out.push(IndexResults {
                source: SourceIndex::Vector,
                items,
            });
        }
    }
    out
}

/// Static pipeline: all string-index matches plus the top-k results of each
/// vector serializer, trigger-filtered and fused.
pub fn rag_retrieve(
    query: &str,
    context: &Context,
    kb: &KnowledgeBase,
    indices: &IndexSet,
    config: &RagConfig,
    llm: Option<&dyn LlmClient>,
) -> Result<KnowledgeBundle, AgentError> {
    if kb.live_records().next().is_none() {
        return Ok(KnowledgeBundle::default());
    }
    let mut bundle = match config.mode {
        RagMode::StaticPipeline => {
            let mut lists = vec![daac_results(indices, kb, query)];
            lists.extend(vector_results(indices, kb, query, config.vector_k));
            fuse(lists, config.fusion, context, config.limit)
        }
        RagMode::Agentic => {
            let llm = llm.ok_or_else(|| {
                AgentError::IndexUnavailable("agentic retrieval requires an LLM client".into())
            })?;
            agentic_retrieve(query, context, kb, indices, config, llm)?
        }
    };
    if config.summarize && !bundle.items.is_empty() {
        if let Some(llm) = llm {
            let lines = bundle.compose_all(context).join("\n");
            let prompt = format!(
                "Summarize the following retrieved knowledge for a SQL-writing agent in a \
                 few sentences.\n\n{lines}"
            );
            if let Ok(summary) = llm.complete(&[ChatMessage::user(prompt)], &GenParams::default())
            {
                bundle.summary = Some(summary.trim().to_string());
            }
        }
    }
    Ok(bundle)
}

/// Agentic loop: the LLM answers each step with a JSON tool call
/// (`{"tool": ..., "args": {...}}`) or `{"final": true}`; retrieved ids
/// accumulate and are fused at the end.
fn agentic_retrieve(
    query: &str,
    context: &Context,
    kb: &KnowledgeBase,
    indices: &IndexSet,
    config: &RagConfig,
    llm: &dyn LlmClient,
) -> Result<KnowledgeBundle, AgentError> {
    let mut transcript = vec![
        ChatMessage::system(
            "You retrieve knowledge for a SQL-writing agent. Each turn reply with JSON: \
             {\"tool\": \"daac_match|facet_query|vector_search|graph_neighbors\", \"args\": {...}} \
             or {\"final\": true} when done.",
        ),
        ChatMessage::user(format!("Question: {query}")),
    ];
    let mut lists: Vec<IndexResults> = Vec::new();
    for step in 0..config.step_budget {
        let params = GenParams {
            sample_index: step,
            ..Default::default()
        };
        let response = llm.complete(&transcript, &params)?;
        let call: Value = match serde_json::from_str(response.trim()) {
            Ok(v) => v,
            Err(_) => break,
        };
        if call.get("final").is_some() {
            break;
        }
        let tool = call.get("tool").and_then(Value::as_str).unwrap_or("");
        let args = call.get("args").cloned().unwrap_or(Value::Null);
        let observation = match tool {
            "daac_match" => {
                let q = args.get("query").and_then(Value::as_str).unwrap_or(query);
                let results = daac_results(indices, kb, q);
                let desc = format!("{} records matched", results.items.len());
                lists.push(results);
                desc
            }
            "vector_search" => {
                let q = args.get("text").and_then(Value::as_str).unwrap_or(query);
                let k = args.get("k").and_then(Value::as_u64).unwrap_or(5) as usize;
                let results = vector_results(indices, kb, q, k);
                let n: usize = results.iter().map(|r| r.items.len()).sum();
                lists.extend(results);
                format!("{n} vector hits")
            }
            "facet_query" => {
                let filters: BTreeMap<String, String> = args
                    .get("filters")
                    .and_then(Value::as_object)
                    .map(|m| {
                        m.iter()
                            .filter_map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string())))
                            .collect()
                    })
                    .unwrap_or_default();
                match indices.facet.as_ref() {
                    Some(store) => match store.facet_query(&filters, &FacetPredicates::default()) {
                        Ok(ids) => {
                            let items = ids
                                .iter()
                                .filter_map(|id| kb.get(id))
                                .map(|record| ScoredItem {
                                    record: record.clone(),
                                    score: 1.0,
                                    match_spans: None,
                                })
                                .collect::<Vec<_>>();
                            let desc = format!("{} facet hits", items.len());
                            lists.push(IndexResults {
                                source: SourceIndex::Facet,
                                items,
                            });
                            desc
                        }
                        Err(e) => format!("facet error: {e}"),
                    },
                    None => "facet index unavailable".to_string(),
                }
            }
            "graph_neighbors" => {
                let start = args.get("start").and_then(Value::as_str).unwrap_or("");
                let hops = args.get("hops").and_then(Value::as_u64).unwrap_or(1) as usize;
                let relations: BTreeSet<String> = args
                    .get("relations")
                    .and_then(Value::as_array)
                    .map(|a| {
                        a.iter()
                            .filter_map(Value::as_str)
                            .map(str::to_string)
                            .collect()
                    })
                    .unwrap_or_default();
                match graph_neighbors(kb, start, &relations, hops.clamp(1, 3)) {
                    Ok(ids) => {
                        let items = ids
                            .iter()
                            .filter_map(|id| kb.get(id))
                            .map(|record| ScoredItem {
                                record: record.clone(),
                                score: 1.0,
                                match_spans: None,
                            })
                            .collect::<Vec<_>>();
                        let desc = format!("{} graph hits", items.len());
                        lists.push(IndexResults {
                            source: SourceIndex::Graph,
                            items,
                        });
                        desc
                    }
                    Err(e) => format!("graph error: {e}"),
                }
            }
            other => format!("unknown tool `{other}`"),
        };
        transcript.push(ChatMessage::assistant(response.clone()));
        transcript.push(ChatMessage::user(format!("Observation: {observation}")));
    }
    Ok(fuse(lists, config.fusion, context, config.limit))
}
