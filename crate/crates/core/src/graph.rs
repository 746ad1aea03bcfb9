//! Graph index over the `related` tuples of knowledge records: few-hop BFS
//! conditioned on relation types.

use crate::kb::KnowledgeBase;
use crate::ukf::UkfId;
use std::collections::{BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown record id {0}")]
    UnknownId(UkfId),
    #[error("hops must lie in [1, 3], got {0}")]
    InvalidHops(usize),
}

/// BFS from `start` over the union of all live records' relation tuples,
/// following subject -> object edges whose relation name (or the name of the
/// record behind `relation_id`) is in the filter. An empty filter admits all
/// relations. The start node is excluded from the result.
pub fn graph_neighbors(
    kb: &KnowledgeBase,
    start: &str,
    relation_filter: &BTreeSet<String>,
    hops: usize,
) -> Result<BTreeSet<UkfId>, GraphError> {
    if !(1..=3).contains(&hops) {
        return Err(GraphError::InvalidHops(hops));
    }
    if kb.get(start).is_none() {
        return Err(GraphError::UnknownId(start.to_string()));
    }

    let admits = |relation: &str, relation_id: Option<&UkfId>| {
        if relation_filter.is_empty() {
            return true;
        }
        if relation_filter.contains(relation) {
            return true;
        }
        relation_id
            .and_then(|id| kb.get(id))
            .is_some_and(|r| relation_filter.contains(&r.name))
    };

    let mut edges: Vec<(UkfId, UkfId)> = Vec::new();
    for record in kb.live_records() {
        for rel in &record.related {
            if admits(&rel.relation, rel.relation_id.as_ref()) {
                edges.push((rel.subject_id.clone(), rel.object_id.clone()));
            }
        }
    }

    let mut seen: BTreeSet<UkfId> = BTreeSet::new();
    let mut frontier = VecDeque::from([(start.to_string(), 0usize)]);
    while let Some((node, depth)) = frontier.pop_front() {
        if depth == hops {
            continue;
        }
        for (s, o) in &edges {
            if *s == node && *o != start && seen.insert(o.clone()) {
                frontier.push_back((o.clone(), depth + 1));
            }
        }
    }
    Ok(seen)
}
