//! Double-array Aho-Corasick automaton over lemmatized synonym patterns.
//!
//! Patterns are inserted in lexicographic order and base values allocated
//! first-fit, so the layout (and its serialization) is reproducible. Matching
//! walks the lemmatized query once and reports every occurrence of every
//! pattern, overlapping and nested included, in O(|Q| + r).

mod serialize;

use crate::text::Lemmatizer;
use crate::ukf::{UkfId, UkfRecord};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DaacError {
    #[error("pattern source {0:?} lemmatizes to an empty string")]
    EmptyPattern(String),
    #[error("cannot build an index from an empty entry list")]
    EmptyInput,
    #[error("synonym provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("invalid index serialization: {0}")]
    InvalidFormat(String),
}

/// One occurrence of a pattern in the lemmatized query. Offsets are character
/// offsets into the lemmatized string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub start: usize,
    pub end: usize,
    pub pattern: String,
    pub knowledge_ids: BTreeSet<UkfId>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PatternEntry {
    pub surface: String,
    pub char_len: usize,
    pub knowledge_ids: BTreeSet<UkfId>,
}

const FREE: i64 = -1;
const ROOT: u32 = 0;

#[derive(Debug, Clone)]
pub struct DaacIndex {
    base: Vec<i64>,
    check: Vec<i64>,
    fail: Vec<u32>,
    output: Vec<Vec<u32>>,
    code_table: BTreeMap<char, u32>,
    patterns: Vec<PatternEntry>,
    lemmatizer: Lemmatizer,
    lemmatizer_version: String,
}

impl DaacIndex {
    /// Compile lemmatized synonyms into the automaton. Identical patterns
    /// from different records share one pattern id with unioned knowledge ids.
    pub fn build(
        entries: &[(UkfId, BTreeSet<String>)],
        lemmatizer: Lemmatizer,
    ) -> Result<Self, DaacError> {
        if entries.is_empty() {
            return Err(DaacError::EmptyInput);
        }
        let mut by_pattern: BTreeMap<String, BTreeSet<UkfId>> = BTreeMap::new();
        for (id, synonyms) in entries {
            for surface in synonyms {
                let lemma = lemmatizer.lemmatize(surface);
                if lemma.is_empty() {
                    return Err(DaacError::EmptyPattern(surface.clone()));
                }
                by_pattern.entry(lemma).or_default().insert(id.clone());
            }
        }
        // BTreeMap iteration gives the lexicographic insertion order.
        let patterns: Vec<PatternEntry> = by_pattern
            .into_iter()
            .map(|(surface, knowledge_ids)| PatternEntry {
                char_len: surface.chars().count(),
                surface,
                knowledge_ids,
            })
            .collect();
        Ok(Self::compile(patterns, lemmatizer))
    }

    fn compile(patterns: Vec<PatternEntry>, lemmatizer: Lemmatizer) -> Self {
        // Dense code table over every character appearing in a pattern.
        let chars: BTreeSet<char> = patterns
            .iter()
            .flat_map(|p| p.surface.chars())
            .collect();
        let code_table: BTreeMap<char, u32> = chars
            .into_iter()
            .enumerate()
            .map(|(i, c)| (c, i as u32 + 1))
            .collect();

        // Trie with code-labelled edges.
        struct TrieNode {
            children: BTreeMap<u32, usize>,
            terminal: Vec<u32>,
        }
        let mut trie = vec![TrieNode {
            children: BTreeMap::new(),
            terminal: Vec::new(),
        }];
        for (pid, pattern) in patterns.iter().enumerate() {
            let mut node = 0usize;
            for c in pattern.surface.chars() {
                let code = code_table[&c];
                node = match trie[node].children.get(&code) {
                    Some(&next) => next,
                    None => {
                        trie.push(TrieNode {
                            children: BTreeMap::new(),
                            terminal: Vec::new(),
                        });
                        let next = trie.len() - 1;
                        trie[node].children.insert(code, next);
                        next
                    }
                };
            }
            trie[node].terminal.push(pid as u32);
        }

        // Double-array allocation, first-fit in BFS order.
        let mut base: Vec<i64> = vec![0];
        let mut check: Vec<i64> = vec![FREE];
        let mut slot_of: Vec<u32> = vec![ROOT; trie.len()];
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            let codes: Vec<u32> = trie[node].children.keys().copied().collect();
            if codes.is_empty() {
                continue;
            }
            let parent_slot = slot_of[node];
            let mut b: i64 = 1;
            'search: loop {
                for &c in &codes {
                    let slot = (b + c as i64) as usize;
                    if slot < check.len() && check[slot] != FREE {
                        b += 1;
                        continue 'search;
                    }
                }
                break;
            }
            let max_slot = (b + *codes.last().unwrap() as i64) as usize;
            if max_slot >= check.len() {
                check.resize(max_slot + 1, FREE);
                base.resize(max_slot + 1, 0);
            }
            base[parent_slot as usize] = b;
            for (&code, &child) in &trie[node].children {
                let slot = (b + code as i64) as u32;
                check[slot as usize] = parent_slot as i64;
                slot_of[child] = slot;
                queue.push_back(child);
            }
        }

        // Failure links and merged output sets, in BFS order.
        let n_slots = check.len();
        let mut fail = vec![ROOT; n_slots];
        let mut output: Vec<Vec<u32>> = vec![Vec::new(); n_slots];
        for (node, t) in trie.iter().enumerate() {
            output[slot_of[node] as usize] = t.terminal.clone();
        }
        let mut queue: VecDeque<usize> = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            let s_slot = slot_of[node];
            for (&code, &child) in &trie[node].children {
                let child_slot = slot_of[child];
                if s_slot != ROOT {
                    let mut f = fail[s_slot as usize];
                    let linked = loop {
                        if let Some(next) = goto(&base, &check, f, code) {
                            break next;
                        }
                        if f == ROOT {
                            break ROOT;
                        }
                        f = fail[f as usize];
                    };
                    fail[child_slot as usize] = if linked == child_slot { ROOT } else { linked };
                }
                let inherited = output[fail[child_slot as usize] as usize].clone();
                output[child_slot as usize].extend(inherited);
                queue.push_back(child);
            }
        }

        let lemmatizer_version = lemmatizer.version();
        Self {
            base,
            check,
            fail,
            output,
            code_table,
            patterns,
            lemmatizer,
            lemmatizer_version,
        }
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    pub fn lemmatizer(&self) -> &Lemmatizer {
        &self.lemmatizer
    }

    pub fn lemmatizer_version(&self) -> &str {
        &self.lemmatizer_version
    }

    pub fn patterns(&self) -> impl Iterator<Item = (&str, &BTreeSet<UkfId>)> {
        self.patterns
            .iter()
            .map(|p| (p.surface.as_str(), &p.knowledge_ids))
    }

    /// All occurrences of all patterns in the lemmatized query, sorted by
    /// (start, end). Overlapping and nested matches are all reported.
    pub fn match_all(&self, query: &str) -> Vec<Match> {
        let lemmatized = self.lemmatizer.lemmatize(query);
        self.match_lemmatized(&lemmatized)
    }

    /// Matching over an already-lemmatized query string.
    pub fn match_lemmatized(&self, lemmatized: &str) -> Vec<Match> {
        let mut matches = Vec::new();
        let mut state = ROOT;
        for (i, ch) in lemmatized.chars().enumerate() {
            state = match self.code_table.get(&ch) {
                None => ROOT,
                Some(&code) => {
                    let mut s = state;
                    loop {
                        if let Some(next) = goto(&self.base, &self.check, s, code) {
                            break next;
                        }
                        if s == ROOT {
                            break ROOT;
                        }
                        s = self.fail[s as usize];
                    }
                }
            };
            for &pid in &self.output[state as usize] {
                let p = &self.patterns[pid as usize];
                matches.push(Match {
                    start: i + 1 - p.char_len,
                    end: i + 1,
                    pattern: p.surface.clone(),
                    knowledge_ids: p.knowledge_ids.clone(),
                });
            }
        }
        matches.sort();
        matches
    }

    /// Double-array consistency: every reachable transition satisfies
    /// `check[base[s] + c] = s`.
    pub fn validate(&self) -> bool {
        for slot in 0..self.check.len() {
            if slot != ROOT as usize && self.check[slot] == FREE {
                continue;
            }
            let b = self.base[slot];
            for &code in self.code_table.values() {
                let t = (b + code as i64) as usize;
                if t < self.check.len() && self.check[t] == slot as i64 {
                    // The transition target must in turn be a live slot.
                    if self.fail.len() <= t {
                        return false;
                    }
                }
            }
        }
        true
    }
}

#[inline]
fn goto(base: &[i64], check: &[i64], state: u32, code: u32) -> Option<u32> {
    let t = base[state as usize] + code as i64;
    if t >= 0 && (t as usize) < check.len() && check[t as usize] == state as i64 {
        Some(t as u32)
    } else {
        None
    }
}

/// Reference multi-pattern scanner used as the correctness oracle.
pub fn naive_scan(patterns: &[&str], query: &str) -> Vec<(usize, usize, String)> {
    let q: Vec<char> = query.chars().collect();
    let mut out = Vec::new();
    for p in patterns {
        let pc: Vec<char> = p.chars().collect();
        if pc.is_empty() || pc.len() > q.len() {
            continue;
        }
        for start in 0..=(q.len() - pc.len()) {
            if q[start..start + pc.len()] == pc[..] {
                out.push((start, start + pc.len(), p.to_string()));
            }
        }
    }
    out.sort();
    out
}

/// External source of synonyms for a record (a small LM in production, a
/// fixed map in tests).
pub trait SynonymProvider {
    fn synonyms(&self, record: &UkfRecord) -> Result<Vec<String>, DaacError>;
}

/// Deterministic provider backed by a name -> synonyms map.
#[derive(Debug, Default, Clone)]
pub struct MapSynonymProvider {
    map: BTreeMap<String, Vec<String>>,
}

impl MapSynonymProvider {
    pub fn new(map: BTreeMap<String, Vec<String>>) -> Self {
        Self { map }
    }
}

impl SynonymProvider for MapSynonymProvider {
    fn synonyms(&self, record: &UkfRecord) -> Result<Vec<String>, DaacError> {
        Ok(self.map.get(&record.name).cloned().unwrap_or_default())
    }
}

/// Provider that always fails; used to exercise unavailability handling.
pub struct UnavailableProvider;

impl SynonymProvider for UnavailableProvider {
    fn synonyms(&self, _record: &UkfRecord) -> Result<Vec<String>, DaacError> {
        Err(DaacError::ProviderUnavailable("no provider configured".into()))
    }
}

/// Union of the record's name, its own synonyms, and provider synonyms,
/// deduplicated after lemmatization (first surface per lemma wins).
pub fn augment_synonyms(
    record: &UkfRecord,
    provider: &dyn SynonymProvider,
    lemmatizer: &Lemmatizer,
) -> Result<BTreeSet<String>, DaacError> {
    let provided = provider.synonyms(record)?;
    let mut seen = BTreeSet::new();
    let mut out = BTreeSet::new();
    let candidates = std::iter::once(record.name.clone())
        .chain(record.synonyms.iter().cloned())
        .chain(provided);
    for surface in candidates {
        let lemma = lemmatizer.lemmatize(&surface);
        if lemma.is_empty() {
            continue;
        }
        if seen.insert(lemma) {
            out.insert(surface);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
