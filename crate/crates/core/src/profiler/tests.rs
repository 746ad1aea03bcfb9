use super::driver::{SqlDriver, SqliteDriver};
use super::fuzzy::{fuzzy_column, fuzzy_enum, jaccard_containment, Channel};
use super::tool::execute_sql_tool;
use super::*;
use crate::llm::ScriptedLlm;
use crate::text::Lemmatizer;
use crate::vector::{Embedder, StubEmbedder};

fn seeded_db() -> SqliteDriver {
    let db = SqliteDriver::in_memory().unwrap();
    db.execute(
        "CREATE TABLE numbers (n INTEGER);
         CREATE TABLE plants (
             id INTEGER PRIMARY KEY,
             status TEXT,
             output REAL,
             period TEXT,
             note TEXT
         );",
    )
    .unwrap();
    let mut inserts = String::new();
    for i in 1..=100 {
        inserts.push_str(&format!("INSERT INTO numbers VALUES ({i});\n"));
    }
    db.execute(&inserts).unwrap();
    db.execute(
        "INSERT INTO plants VALUES (1, 'a', 1.5, '202401', NULL);
         INSERT INTO plants VALUES (2, 'a', 2.0, '202402', NULL);
         INSERT INTO plants VALUES (3, 'a', 3.25, '202403', NULL);
         INSERT INTO plants VALUES (4, 'b', NULL, '202404', NULL);",
    )
    .unwrap();
    db
}

#[test]
fn numeric_profile_matches_hand_computation() {
    let db = seeded_db();
    let p = profile_column(&db, "numbers", "n", None, &ProfilerConfig::default()).unwrap();
    assert_eq!(p.inferred_type, InferredType::Numeric);
    let stats = p.numeric_stats.unwrap();
    assert!((stats.mean - 50.5).abs() < 1e-9);
    assert_eq!(stats.min, 1.0);
    assert!((stats.p50 - 50.5).abs() < 1e-9);
    assert!((stats.p25 - 25.75).abs() < 1e-9);
    assert!((stats.p75 - 75.25).abs() < 1e-9);
    assert_eq!(stats.max, 100.0);
    assert!(stats.is_integer);
    assert_eq!(p.null_count, 0);
    assert!(p.is_pk || p.name == "n");
}

#[test]
fn float_column_is_not_integer() {
    let db = seeded_db();
    let p = profile_column(&db, "plants", "output", None, &ProfilerConfig::default()).unwrap();
    let stats = p.numeric_stats.unwrap();
    assert!(!stats.is_integer);
    assert_eq!(p.null_count, 1);
}

#[test]
fn all_null_column_profiles_as_text_with_empty_stats() {
    let db = seeded_db();
    let p = profile_column(&db, "plants", "note", None, &ProfilerConfig::default()).unwrap();
    assert_eq!(p.inferred_type, InferredType::Text);
    assert_eq!(p.null_count, 4);
    let stats = p.categorical_stats.unwrap();
    assert_eq!(stats.n_classes, 0);
    assert!(stats.top_values.is_empty());
}

#[test]
fn categorical_top_values_with_frequencies() {
    let db = seeded_db();
    let mut cfg = ProfilerConfig::default();
    cfg.categorical_max_ratio = 0.6; // 2 distinct / 4 rows
    let p = profile_column(&db, "plants", "status", None, &cfg).unwrap();
    assert_eq!(p.inferred_type, InferredType::Categorical);
    let stats = p.categorical_stats.unwrap();
    assert_eq!(stats.n_classes, 2);
    assert_eq!(stats.top_values.len(), 2);
    let a = &stats.top_values[0];
    assert_eq!((a.value.as_str(), a.count), ("a", 3));
    assert!((a.frequency - 0.75).abs() < 1e-12);
    assert!((a.cum_frequency - 0.75).abs() < 1e-12);
    let b = &stats.top_values[1];
    assert_eq!((b.value.as_str(), b.count), ("b", 1));
    assert!((b.frequency - 0.25).abs() < 1e-12);
    assert!((b.cum_frequency - 1.0).abs() < 1e-12);
    assert_eq!(stats.max_len, 1);
}

#[test]
fn temporal_annotation_via_llm_format() {
    let db = seeded_db();
    let llm = ScriptedLlm::new("mock").on_contains("strptime", "%Y%m");
    let p = profile_column(&db, "plants", "period", Some(&llm), &ProfilerConfig::default())
        .unwrap();
    assert_eq!(p.inferred_type, InferredType::Temporal);
    let t = p.temporal_stats.unwrap();
    assert_eq!(t.format, "%Y%m");
    assert_eq!(t.min_time, "2024-01-01 00:00:00");
    assert_eq!(t.max_time, "2024-04-01 00:00:00");
}

#[test]
fn bad_format_falls_back_to_rules() {
    let db = seeded_db();
    // Parses 0% of the sample; the suggestion is rejected.
    let llm = ScriptedLlm::new("mock").on_contains("strptime", "%Y-%m-%d");
    let p =
        profile_column(&db, "plants", "period", Some(&llm), &ProfilerConfig::default()).unwrap();
    assert_eq!(p.inferred_type, InferredType::Numeric);
}

#[test]
fn unknown_column_is_an_error() {
    let db = seeded_db();
    assert!(matches!(
        profile_column(&db, "plants", "ghost", None, &ProfilerConfig::default()),
        Err(ProfilerError::UnknownColumn(_))
    ));
}

#[test]
fn execute_tool_truncates_and_summarizes() {
    let db = seeded_db();
    let r = execute_sql_tool(&db, "SELECT n FROM numbers", 50).unwrap();
    assert!(r.truncated);
    assert_eq!(r.rows.len(), 50);
    assert_eq!(r.total_row_count, 100);
    let s = &r.summary["n"];
    assert_eq!((s.min, s.max, s.nulls), (1.0, 100.0, 0));

    let small = execute_sql_tool(&db, "SELECT id FROM plants", 50).unwrap();
    assert!(!small.truncated);
    assert_eq!(small.rows.len(), 4);
}

#[test]
fn execute_tool_captures_errors() {
    let db = seeded_db();
    let r = execute_sql_tool(&db, "SELEC nonsense", 50).unwrap();
    assert!(r.is_error());
    assert!(r.rows.is_empty());
    assert!(r.render().starts_with("SQL error:"));
}

#[test]
fn summary_covers_untruncated_rows() {
    let db = seeded_db();
    let truncated = execute_sql_tool(&db, "SELECT n FROM numbers ORDER BY n", 10).unwrap();
    // max must come from the full result, not the 10 returned rows.
    assert_eq!(truncated.summary["n"].max, 100.0);
}

#[test]
fn jaccard_containment_examples() {
    let lem = Lemmatizer::rule_based();
    let j = jaccard_containment("north america", "north america region", 1, &lem).unwrap();
    assert_eq!(j, 1.0);
    let j = jaccard_containment("latin america", "north america region", 1, &lem).unwrap();
    assert_eq!(j, 0.5);
    let j = jaccard_containment("north america region", "north america region", 2, &lem).unwrap();
    assert_eq!(j, 1.0);
    assert!(jaccard_containment("  ", "x", 1, &lem).is_err());
}

#[test]
fn jaccard_is_asymmetric() {
    let lem = Lemmatizer::rule_based();
    let a = jaccard_containment("north america", "north america region", 1, &lem).unwrap();
    let b = jaccard_containment("north america region", "north america", 1, &lem).unwrap();
    assert_ne!(a, b);
}

#[test]
fn fuzzy_enum_semantic_channel_wins_for_synonyms() {
    let lem = Lemmatizer::rule_based();
    let embedder = StubEmbedder::new(8)
        .pin("running", vec![1.0, 0.05, 0.0, 0.0])
        .pin("Operational", vec![0.97, 0.1, 0.0, 0.0])
        .pin("Decommissioned", vec![0.0, 0.0, 1.0, 0.0]);
    let values = vec!["Operational".to_string(), "Decommissioned".to_string()];
    let hits = fuzzy_enum(&values, "running", 2, 2, &lem, Some(&embedder)).unwrap();
    assert_eq!(hits[0].value, "Operational");
    assert_eq!(hits[0].channel, Channel::Semantic);
    assert!(hits[0].score > 0.9);
}

#[test]
fn fuzzy_exact_value_scores_one_lexically() {
    let lem = Lemmatizer::rule_based();
    let values = vec!["Operational".to_string(), "Decommissioned".to_string()];
    let hits = fuzzy_enum(&values, "Operational", 2, 2, &lem, None).unwrap();
    assert_eq!(hits[0].value, "Operational");
    assert_eq!(hits[0].score, 1.0);
    assert_eq!(hits[0].channel, Channel::Lexical);
}

#[test]
fn fuzzy_k_larger_than_candidates_returns_all() {
    let lem = Lemmatizer::rule_based();
    let values = vec!["a".to_string(), "b".to_string()];
    let hits = fuzzy_enum(&values, "a", 10, 1, &lem, None).unwrap();
    assert_eq!(hits.len(), 2);
}

#[test]
fn fuzzy_column_reports_column_names() {
    let lem = Lemmatizer::rule_based();
    let cols = vec![
        ("cust_name".to_string(), "customer display name".to_string()),
        ("order_total".to_string(), "order amount".to_string()),
    ];
    let hits = fuzzy_column(&cols, "customer name", 1, 2, &lem, None).unwrap();
    assert_eq!(hits[0].value, "cust_name");
}

#[test]
fn export_produces_table_and_column_records() {
    let db = seeded_db();
    let profile = profile_db(&db, None, &ProfilerConfig::default()).unwrap();
    let records = export::export_profiles(&profile).unwrap();
    // 2 tables + 1 + 5 columns
    assert_eq!(records.len(), 8);
    let table = records.iter().find(|r| r.kind == "table").unwrap();
    assert!(table.slots.contains_key("TABLE"));
    let column = records
        .iter()
        .find(|r| r.kind == "column" && r.name == "status")
        .unwrap();
    assert_eq!(
        column.content_resources["predicate"]["physical"],
        serde_json::json!("status")
    );
    assert_eq!(column.collection, "plants");
}

#[test]
fn mock_embedder_orthogonalish_for_unrelated_tokens() {
    let e = crate::vector::MockEmbedder::new(64);
    let a = e.embed("revenue");
    let b = e.embed("penguin");
    let cos: f64 = crate::vector::cosine(&a, &b);
    assert!(cos.abs() < 0.5);
}
