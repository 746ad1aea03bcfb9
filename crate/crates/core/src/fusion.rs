//! Retrieval fusion: trigger filtering, dedup on record id, then round-robin
//! interleaving or score reranking into a single knowledge bundle.

use crate::daac::Match;
use crate::ukf::{Context, UkfId, UkfRecord};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceIndex {
    Daac,
    Facet,
    Vector,
    Graph,
}

#[derive(Debug, Clone)]
pub struct ScoredItem {
    pub record: UkfRecord,
    pub score: f64,
    pub match_spans: Option<Vec<Match>>,
}

#[derive(Debug, Clone)]
pub struct IndexResults {
    pub source: SourceIndex,
    pub items: Vec<ScoredItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionPolicy {
    RoundRobin,
    ScoreRerank,
}

#[derive(Debug, Clone)]
pub struct BundleItem {
    pub record: UkfRecord,
    pub source_index: SourceIndex,
    pub score: f64,
    pub match_spans: Option<Vec<Match>>,
}

/// Fused, trigger-filtered, deduplicated retrieval output handed to agents.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBundle {
    pub items: Vec<BundleItem>,
    pub summary: Option<String>,
}

impl KnowledgeBundle {
    pub fn ids(&self) -> Vec<UkfId> {
        self.items.iter().map(|i| i.record.id.clone()).collect()
    }

    /// Compose every record through its default composer, in bundle order.
    pub fn compose_all(&self, ctx: &Context) -> Vec<String> {
        self.items
            .iter()
            .filter_map(|i| i.record.compose_content("default", ctx).ok())
            .collect()
    }
}

/// Fuse per-index result lists into one bundle: items whose default trigger
/// rejects the context are excluded, duplicates collapse to their
/// highest-score occurrence, and the survivors are interleaved (round robin)
/// or sorted by min-max-normalized score. Ties break by (priority desc,
/// id asc).
pub fn fuse(
    results: Vec<IndexResults>,
    policy: FusionPolicy,
    context: &Context,
    limit: usize,
) -> KnowledgeBundle {
    // Trigger filter, preserving list structure.
    let filtered: Vec<(SourceIndex, Vec<ScoredItem>)> = results
        .into_iter()
        .map(|list| {
            let items = list
                .items
                .into_iter()
                .filter(|item| {
                    item.record
                        .eval_trigger("default", context)
                        .unwrap_or(false)
                })
                .collect();
            (list.source, items)
        })
        .collect();

    match policy {
        FusionPolicy::RoundRobin => round_robin(filtered, limit),
        FusionPolicy::ScoreRerank => score_rerank(filtered, limit),
    }
}

fn best_occurrences(
    lists: &[(SourceIndex, Vec<ScoredItem>)],
) -> BTreeMap<UkfId, (SourceIndex, ScoredItem)> {
    let mut best: BTreeMap<UkfId, (SourceIndex, ScoredItem)> = BTreeMap::new();
    for (source, items) in lists {
        for item in items {
            let id = item.record.id.clone();
            match best.get(&id) {
                Some((_, held)) if held.score >= item.score => {}
                _ => {
                    best.insert(id, (*source, item.clone()));
                }
            }
        }
    }
    best
}

fn round_robin(lists: Vec<(SourceIndex, Vec<ScoredItem>)>, limit: usize) -> KnowledgeBundle {
    let best = best_occurrences(&lists);
    let mut seen = std::collections::BTreeSet::new();
    let mut items = Vec::new();
    let longest = lists.iter().map(|(_, l)| l.len()).max().unwrap_or(0);
    'outer: for position in 0..longest {
        for (_, list) in &lists {
            if let Some(item) = list.get(position) {
                let id = item.record.id.clone();
                if seen.insert(id.clone()) {
                    let (source, kept) = &best[&id];
                    items.push(BundleItem {
                        record: kept.record.clone(),
                        source_index: *source,
                        score: kept.score,
                        match_spans: kept.match_spans.clone(),
                    });
                    if items.len() == limit {
                        break 'outer;
                    }
                }
            }
        }
    }
    KnowledgeBundle {
        items,
        summary: None,
    }
}

fn score_rerank(lists: Vec<(SourceIndex, Vec<ScoredItem>)>, limit: usize) -> KnowledgeBundle {
    // Min-max normalize per source list; a degenerate list maps to 1.0.
    let mut candidates: Vec<(SourceIndex, ScoredItem, f64)> = Vec::new();
    for (source, items) in lists {
        if items.is_empty() {
            continue;
        }
        let min = items.iter().map(|i| i.score).fold(f64::INFINITY, f64::min);
        let max = items
            .iter()
            .map(|i| i.score)
            .fold(f64::NEG_INFINITY, f64::max);
        for item in items {
            let norm = if max > min {
                (item.score - min) / (max - min)
            } else {
                1.0
            };
            candidates.push((source, item, norm));
        }
    }
    // Dedup on id keeping the highest normalized score.
    let mut best: BTreeMap<UkfId, (SourceIndex, ScoredItem, f64)> = BTreeMap::new();
    for (source, item, norm) in candidates {
        let id = item.record.id.clone();
        match best.get(&id) {
            Some((_, _, held)) if *held >= norm => {}
            _ => {
                best.insert(id, (source, item, norm));
            }
        }
    }
    let mut survivors: Vec<(SourceIndex, ScoredItem, f64)> = best.into_values().collect();
    survivors.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then_with(|| b.1.record.priority.cmp(&a.1.record.priority))
            .then_with(|| a.1.record.id.cmp(&b.1.record.id))
    });
    let items = survivors
        .into_iter()
        .take(limit)
        .map(|(source, item, norm)| BundleItem {
            record: item.record,
            source_index: source,
            score: norm,
            match_spans: item.match_spans,
        })
        .collect();
    KnowledgeBundle {
        items,
        summary: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn rec(name: &str, priority: i64) -> UkfRecord {
        UkfRecord::from_value(json!({"name": name, "priority": priority})).unwrap()
    }

    fn item(record: &UkfRecord, score: f64) -> ScoredItem {
        ScoredItem {
            record: record.clone(),
            score,
            match_spans: None,
        }
    }

    fn list(source: SourceIndex, items: Vec<ScoredItem>) -> IndexResults {
        IndexResults { source, items }
    }

    #[test]
    fn round_robin_dedups_and_interleaves() {
        let a = rec("a", 0);
        let b = rec("b", 0);
        let c = rec("c", 0);
        let bundle = fuse(
            vec![
                list(SourceIndex::Daac, vec![item(&a, 1.0), item(&b, 1.0)]),
                list(SourceIndex::Vector, vec![item(&b, 0.9), item(&c, 0.8)]),
            ],
            FusionPolicy::RoundRobin,
            &Context::new(),
            10,
        );
        let names: Vec<&str> = bundle.items.iter().map(|i| i.record.name.as_str()).collect();
        assert_eq!(names, vec!["a", "b", "c"]);
    }

    #[test]
    fn trigger_rejection_excludes_items() {
        let gated = UkfRecord::from_value(json!({
            "name": "eu_only",
            "triggers": {"default": "context_match"},
            "metadata": {"trigger_rules": [{"path": "user.region", "op": "equals", "value": "EU"}]}
        }))
        .unwrap();
        let open = rec("open", 0);
        let no_region = Context::new();
        let bundle = fuse(
            vec![list(
                SourceIndex::Facet,
                vec![item(&gated, 1.0), item(&open, 0.5)],
            )],
            FusionPolicy::RoundRobin,
            &no_region,
            10,
        );
        assert_eq!(bundle.items.len(), 1);
        assert_eq!(bundle.items[0].record.name, "open");

        let eu: Context = json!({"user": {"region": "EU"}}).as_object().unwrap().clone();
        let bundle = fuse(
            vec![list(
                SourceIndex::Facet,
                vec![item(&gated, 1.0), item(&open, 0.5)],
            )],
            FusionPolicy::RoundRobin,
            &eu,
            10,
        );
        assert_eq!(bundle.items.len(), 2);
    }

    #[test]
    fn rerank_breaks_score_ties_by_priority() {
        let low = rec("low", 0);
        let high = rec("high", 2);
        let bundle = fuse(
            vec![
                list(SourceIndex::Daac, vec![item(&low, 0.7)]),
                list(SourceIndex::Vector, vec![item(&high, 0.7)]),
            ],
            FusionPolicy::ScoreRerank,
            &Context::new(),
            10,
        );
        let names: Vec<&str> = bundle.items.iter().map(|i| i.record.name.as_str()).collect();
        assert_eq!(names, vec!["high", "low"]);
    }

    #[test]
    fn limit_truncates() {
        let a = rec("a", 0);
        let b = rec("b", 0);
        let bundle = fuse(
            vec![list(SourceIndex::Daac, vec![item(&a, 1.0), item(&b, 0.5)])],
            FusionPolicy::RoundRobin,
            &Context::new(),
            1,
        );
        assert_eq!(bundle.items.len(), 1);
    }

    #[test]
    fn fuse_is_idempotent() {
        let a = rec("a", 1);
        let b = rec("b", 0);
        let c = rec("c", 3);
        for policy in [FusionPolicy::RoundRobin, FusionPolicy::ScoreRerank] {
            let first = fuse(
                vec![
                    list(SourceIndex::Daac, vec![item(&a, 2.0), item(&b, 1.0)]),
                    list(SourceIndex::Vector, vec![item(&c, 0.4), item(&a, 0.2)]),
                ],
                policy,
                &Context::new(),
                10,
            );
            let again = fuse(
                vec![list(
                    SourceIndex::Daac,
                    first
                        .items
                        .iter()
                        .map(|i| ScoredItem {
                            record: i.record.clone(),
                            score: i.score,
                            match_spans: i.match_spans.clone(),
                        })
                        .collect(),
                )],
                policy,
                &Context::new(),
                10,
            );
            let names1: Vec<&str> = first.items.iter().map(|i| i.record.name.as_str()).collect();
            let names2: Vec<&str> = again.items.iter().map(|i| i.record.name.as_str()).collect();
            assert_eq!(names1, names2, "policy {policy:?}");
            let scores1: Vec<f64> = first.items.iter().map(|i| i.score).collect();
            let scores2: Vec<f64> = again.items.iter().map(|i| i.score).collect();
            assert_eq!(scores1, scores2, "policy {policy:?}");
        }
    }
}
