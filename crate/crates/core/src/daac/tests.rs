use super::*;
use crate::text::Lemmatizer;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

fn entries(items: &[(&str, &[&str])]) -> Vec<(UkfId, BTreeSet<String>)> {
    items
        .iter()
        .map(|(id, syns)| {
            (
                id.to_string(),
                syns.iter().map(|s| s.to_string()).collect(),
            )
        })
        .collect()
}

#[test]
fn build_counts_patterns_and_unions_ids() {
    let idx = DaacIndex::build(
        &entries(&[("kb1", &["operational", "running"]), ("kb2", &["plants"])]),
        Lemmatizer::rule_based(),
    )
    .unwrap();
    assert_eq!(idx.pattern_count(), 3);

    let dup = DaacIndex::build(
        &entries(&[("kb1", &["status"]), ("kb2", &["status"])]),
        Lemmatizer::rule_based(),
    )
    .unwrap();
    assert_eq!(dup.pattern_count(), 1);
    let (_, ids) = dup.patterns().next().unwrap();
    assert_eq!(ids.len(), 2);
}

#[test]
fn blank_synonym_is_rejected() {
    let err = DaacIndex::build(&entries(&[("kb1", &["  "])]), Lemmatizer::rule_based());
    assert!(matches!(err, Err(DaacError::EmptyPattern(_))));
    assert!(matches!(
        DaacIndex::build(&[], Lemmatizer::rule_based()),
        Err(DaacError::EmptyInput)
    ));
}

#[test]
fn overlapping_and_nested_matches() {
    let idx = DaacIndex::build(
        &entries(&[("a", &["he"]), ("b", &["she"]), ("c", &["hers"])]),
        Lemmatizer::identity(),
    )
    .unwrap();
    let matches = idx.match_all("ushers");
    let got: Vec<(usize, usize, &str)> = matches
        .iter()
        .map(|m| (m.start, m.end, m.pattern.as_str()))
        .collect();
    assert_eq!(got, vec![(1, 4, "she"), (2, 4, "he"), (2, 6, "hers")]);
}

#[test]
fn lemmatized_matching() {
    let idx = DaacIndex::build(
        &entries(&[("a", &["running"]), ("b", &["plants"])]),
        Lemmatizer::rule_based(),
    )
    .unwrap();
    let matches = idx.match_all("running plants");
    assert_eq!(matches.len(), 2);
    assert_eq!(matches[0].pattern, "running");
    assert_eq!(matches[1].pattern, "plant");
    assert!(idx.match_all("").is_empty());
}

#[test]
fn matches_agree_with_naive_scan_on_random_inputs() {
    let mut rng = StdRng::seed_from_u64(7);
    for trial in 0..60 {
        let alphabet: Vec<char> = "abcd".chars().collect();
        let n_patterns = rng.gen_range(1..=12);
        let mut pattern_set = BTreeSet::new();
        for _ in 0..n_patterns {
            let len = rng.gen_range(1..=5);
            let p: String = (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect();
            pattern_set.insert(p);
        }
        let patterns: Vec<String> = pattern_set.into_iter().collect();
        let refs: Vec<&str> = patterns.iter().map(String::as_str).collect();
        let query: String = (0..rng.gen_range(0..200))
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
            .collect();

        let entry_list: Vec<(UkfId, BTreeSet<String>)> = patterns
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("k{i}"), BTreeSet::from([p.clone()])))
            .collect();
        let idx = DaacIndex::build(&entry_list, Lemmatizer::identity()).unwrap();
        assert!(idx.validate());

        let got: Vec<(usize, usize, String)> = idx
            .match_all(&query)
            .into_iter()
            .map(|m| (m.start, m.end, m.pattern))
            .collect();
        let want = naive_scan(&refs, &query);
        assert_eq!(got, want, "trial {trial} query {query:?}");
    }
}

#[test]
fn unicode_patterns_use_char_offsets() {
    let idx = DaacIndex::build(
        &entries(&[("a", &["héllo"]), ("b", &["ll"])]),
        Lemmatizer::identity(),
    )
    .unwrap();
    let matches = idx.match_all("xhéllo");
    assert_eq!(matches.len(), 2);
    assert_eq!((matches[0].start, matches[0].end), (1, 6));
    assert_eq!((matches[1].start, matches[1].end), (3, 5));
}

#[test]
fn serialization_round_trip() {
    let idx = DaacIndex::build(
        &entries(&[("kb1", &["operational", "running"]), ("kb2", &["plants"])]),
        Lemmatizer::rule_based(),
    )
    .unwrap();
    let bytes = idx.to_bytes();
    let back = DaacIndex::from_bytes(&bytes, Lemmatizer::rule_based()).unwrap();
    assert_eq!(back.match_all("running plants"), idx.match_all("running plants"));
    assert_eq!(back.to_bytes(), bytes);

    assert!(matches!(
        DaacIndex::from_bytes(b"nope", Lemmatizer::rule_based()),
        Err(DaacError::InvalidFormat(_))
    ));
    assert!(matches!(
        DaacIndex::from_bytes(&bytes, Lemmatizer::identity()),
        Err(DaacError::InvalidFormat(_))
    ));
}

#[test]
fn augment_unions_and_dedups_after_lemmatization() {
    let record = crate::ukf::UkfRecord::from_value(json!({
        "name": "operational",
        "synonyms": [],
    }))
    .unwrap();
    let provider = MapSynonymProvider::new(BTreeMap::from([(
        "operational".to_string(),
        vec!["functioning".to_string(), "running".to_string()],
    )]));
    let out = augment_synonyms(&record, &provider, &Lemmatizer::rule_based()).unwrap();
    assert_eq!(out.len(), 3);
    assert!(out.contains("operational"));
    assert!(out.contains("functioning"));
    assert!(out.contains("running"));

    let empty = MapSynonymProvider::default();
    let out = augment_synonyms(&record, &empty, &Lemmatizer::rule_based()).unwrap();
    assert_eq!(out, BTreeSet::from(["operational".to_string()]));

    assert!(matches!(
        augment_synonyms(&record, &UnavailableProvider, &Lemmatizer::rule_based()),
        Err(DaacError::ProviderUnavailable(_))
    ));
}

#[test]
fn rebuild_reflects_synonym_edits() {
    let lem = Lemmatizer::rule_based();
    let v1 = DaacIndex::build(&entries(&[("kb1", &["operational"])]), lem.clone()).unwrap();
    assert!(v1.match_all("is it running?").is_empty());
    let v2 = DaacIndex::build(
        &entries(&[("kb1", &["operational", "running"])]),
        lem,
    )
    .unwrap();
    assert_eq!(v2.match_all("is it running?").len(), 1);
}

#[test]
fn degenerate_single_char_and_repeated_patterns() {
    let idx = DaacIndex::build(
        &entries(&[("a", &["a"]), ("b", &["aa"]), ("c", &["aaa"])]),
        Lemmatizer::identity(),
    )
    .unwrap();
    let got = idx.match_all("aaaa");
    let refs = ["a", "aa", "aaa"];
    let want = naive_scan(&refs, "aaaa");
    let got: Vec<(usize, usize, String)> = got.into_iter().map(|m| (m.start, m.end, m.pattern)).collect();
    assert_eq!(got, want);
}

#[test]
fn timing_scales_linearly_in_query_length() {
    let mut rng = StdRng::seed_from_u64(11);
    let alphabet: Vec<char> = "abcdefgh".chars().collect();
    let entry_list: Vec<(UkfId, BTreeSet<String>)> = (0..100)
        .map(|i| {
            let len = rng.gen_range(2..=8);
            let p: String = (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect();
            (format!("k{i}"), BTreeSet::from([p]))
        })
        .collect();
    let idx = DaacIndex::build(&entry_list, Lemmatizer::identity()).unwrap();
    let query: String = (0..2000)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
        .collect();
    let short = &query[..1000];

    let median = |q: &str| {
        let mut times: Vec<u128> = (0..20)
            .map(|_| {
                let t = std::time::Instant::now();
                std::hint::black_box(idx.match_all(q));
                t.elapsed().as_nanos()
            })
            .collect();
        times.sort();
        times[times.len() / 2]
    };
    // warm up
    let _ = idx.match_all(&query);
    let t_short = median(short).max(1);
    let t_long = median(&query);
    let ratio = t_long as f64 / t_short as f64;
    assert!(
        ratio <= 2.5,
        "doubling |Q| should at most 2.5x the median time, got {ratio:.2}"
    );
}
