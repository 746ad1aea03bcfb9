use super::*;
use crate::kb::{KnowledgeBase, TrustMark};
use crate::llm::ScriptedLlm;
use crate::profiler::driver::SqliteDriver;
use serde_json::json;

const GOLD_SQL: &str = "SELECT \"Country\" FROM \"nuclear_power_plants\" WHERE \"Status\" = 'Operational' GROUP BY \"Country\" ORDER BY COUNT(\"Name\") DESC LIMIT 10";

fn fixture_db() -> SqliteDriver {
    let db = SqliteDriver::in_memory().unwrap();
    db.execute(
        "CREATE TABLE nuclear_power_plants (Country TEXT, Name TEXT, Status TEXT);
         INSERT INTO nuclear_power_plants VALUES ('FR', 'A', 'Operational');
         INSERT INTO nuclear_power_plants VALUES ('FR', 'B', 'Operational');
         INSERT INTO nuclear_power_plants VALUES ('DE', 'C', 'Decommissioned');",
    )
    .unwrap();
    db
}

#[test]
fn parse_gold_sql_summary() {
    let ast = parse_sql_ast(GOLD_SQL).unwrap();
    assert_eq!(ast.table_refs, vec!["nuclear_power_plants"]);
    assert_eq!(ast.predicates.len(), 1);
    let p = &ast.predicates[0];
    assert_eq!((p.column.as_str(), p.operator.as_str(), p.literal.as_str()),
               ("Status", "=", "Operational"));
    assert_eq!(ast.group_keys, vec!["\"Country\""]);
    assert_eq!(ast.order_keys.len(), 1);
    assert_eq!(ast.limit.as_deref(), Some("10"));
    assert!(ast.cte_names.is_empty());
}

#[test]
fn parse_minimal_and_invalid() {
    let ast = parse_sql_ast("SELECT 1").unwrap();
    assert_eq!(ast.statement_count(), 1);
    assert!(matches!(
        parse_sql_ast("SELEC 1"),
        Err(MiningError::UnparsableSql(_))
    ));
}

#[test]
fn parse_collects_ctes_and_nested_tables() {
    let sql = "WITH rev AS (SELECT Country, COUNT(*) AS n FROM nuclear_power_plants GROUP BY Country) \
               SELECT * FROM rev WHERE n BETWEEN 1 AND 5";
    let ast = parse_sql_ast(sql).unwrap();
    assert_eq!(ast.cte_names, vec!["rev"]);
    assert!(ast.table_refs.contains(&"nuclear_power_plants".to_string()));
    assert_eq!(ast.predicates[0].operator, "BETWEEN");
    let bodies = ast.cte_bodies();
    assert_eq!(bodies.len(), 1);
    assert_eq!(bodies[0].0, "rev");
}

#[test]
fn reserialization_is_execution_equivalent() {
    let db = fixture_db();
    for sql in [
        GOLD_SQL,
        "SELECT Country, COUNT(*) FROM nuclear_power_plants GROUP BY Country",
        "SELECT * FROM (SELECT Name FROM nuclear_power_plants WHERE Status = 'Operational') t",
        "SELECT Status, CASE WHEN Status = 'Operational' THEN 1 ELSE 0 END FROM nuclear_power_plants",
    ] {
        let ast = parse_sql_ast(sql).unwrap();
        let round = ast.to_sql();
        let a = crate::eval::batch::execute_to_result(&db, sql).unwrap();
        let b = crate::eval::batch::execute_to_result(&db, &round).unwrap();
        assert_eq!(
            a.fingerprint(false),
            b.fingerprint(false),
            "round-trip changed semantics for {sql}"
        );
    }
}

#[test]
fn sie_extracts_indicator_records() {
    let llm = ScriptedLlm::new("sie").on_contains(
        "profit",
        r#"[{"template": "Indicator", "name": "profit", "content": "profit = revenue - cost"}]"#,
    );
    let outcome = sie_extract(
        "The profit indicator is defined as profit = revenue - cost.",
        &llm,
        &["Knowledge", "Indicator"],
    )
    .unwrap();
    assert_eq!(outcome.records.len(), 1);
    assert_eq!(outcome.records[0].kind, "indicator");
    assert_eq!(outcome.dropped, 0);
}

#[test]
fn sie_empty_chunk_and_malformed_items() {
    let llm = ScriptedLlm::new("sie").always(
        r#"[{"template": "Knowledge", "content": "no name"}, {"template": "Knowledge", "name": "ok"}]"#,
    );
    let empty = sie_extract("   ", &llm, &["Knowledge"]).unwrap();
    assert!(empty.records.is_empty());
    assert_eq!(llm.call_count(), 0);

    let outcome = sie_extract("something", &llm, &["Knowledge"]).unwrap();
    assert_eq!(outcome.records.len(), 1);
    assert_eq!(outcome.dropped, 1);
}

#[test]
fn mine_labeled_extracts_table_and_enum() {
    let db = fixture_db();
    let llm = ScriptedLlm::new("miner").on_contains(
        "running plants",
        r#"[
            {"kind": "table", "name": "nuclear_power_plants", "synonyms": ["plants"], "table": "nuclear_power_plants"},
            {"kind": "enum", "name": "Operational", "synonyms": ["running"], "table": "nuclear_power_plants", "column": "Status", "value": "Operational"}
        ]"#,
    );
    let entries = mine_labeled(
        "What are the top 10 countries with the most number of running plants?",
        GOLD_SQL,
        &db,
        &llm,
        None,
    )
    .unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0].verification, Verification::SchemaVerified);
    assert!(entries[0].candidate.synonyms.contains("plants"));
    assert_eq!(entries[1].verification, Verification::ExecutionVerified);
    assert!(entries[1].candidate.synonyms.contains("running"));
    assert_eq!(to_merge_batch(&entries).len(), 2);
}

#[test]
fn mine_labeled_rejects_nonexistent_entities() {
    let db = fixture_db();
    let llm = ScriptedLlm::new("miner").always(
        r#"[{"kind": "column", "name": "ghost", "table": "nuclear_power_plants", "column": "ghost"}]"#,
    );
    let entries = mine_labeled("q", GOLD_SQL, &db, &llm, None).unwrap();
    assert_eq!(entries[0].verification, Verification::Unverified);
    assert!(to_merge_batch(&entries).is_empty());
}

#[test]
fn mine_labeled_gold_must_execute() {
    let db = fixture_db();
    let llm = ScriptedLlm::new("miner").always("[]");
    assert!(matches!(
        mine_labeled("q", "SELECT nope FROM nuclear_power_plants", &db, &llm, None),
        Err(MiningError::GoldSqlFails(_))
    ));
}

#[test]
fn mine_labeled_with_failed_sql_extracts_predicate() {
    let db = fixture_db();
    let llm = ScriptedLlm::new("miner").on_contains(
        "incorrect SQLs",
        r#"[{"kind": "predicate", "name": "status_operational",
             "synonyms": ["running"], "table": "nuclear_power_plants",
             "sql": "\"Status\" = 'Operational'"}]"#,
    );
    let failed = "SELECT \"Country\" FROM \"nuclear_power_plants\" GROUP BY \"Country\"";
    let entries = mine_labeled("top countries by running plants", GOLD_SQL, &db, &llm, Some(failed))
        .unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].candidate.kind, "predicate");
    assert_eq!(entries[0].verification, Verification::ExecutionVerified);
}

#[test]
fn mine_unlabeled_verifies_enum_via_alias() {
    let db = fixture_db();
    let kb = KnowledgeBase::in_memory();
    let llm = ScriptedLlm::new("agent")
        .on_sample("User query", 0, r#"{"tool": "fuzzy_enum", "args": {"keyword": "running", "table": "nuclear_power_plants", "column": "Status"}}"#)
        .on_sample("Observation", 1, r#"{"entries": [{"kind": "enum", "name": "Operational", "synonyms": ["running"], "table": "nuclear_power_plants", "column": "Status", "value": "Operational"}]}"#);
    let entries = mine_unlabeled("plants that are running", &db, &kb, &llm, 5).unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].verification, Verification::ExecutionVerified);
}

#[test]
fn mine_unlabeled_absent_entities_stay_unverified() {
    let db = fixture_db();
    let kb = KnowledgeBase::in_memory();
    let llm = ScriptedLlm::new("agent").always(
        r#"{"entries": [{"kind": "table", "name": "warehouses"}]}"#,
    );
    let entries = mine_unlabeled("warehouse usage", &db, &kb, &llm, 3).unwrap();
    assert_eq!(entries[0].verification, Verification::Unverified);
    assert!(to_merge_batch(&entries).is_empty());
}

#[test]
fn mine_unlabeled_budget_zero() {
    let db = fixture_db();
    let kb = KnowledgeBase::in_memory();
    let llm = ScriptedLlm::new("agent").always("{}");
    match mine_unlabeled("q", &db, &kb, &llm, 0) {
        Err(MiningError::BudgetExhausted { spent, partial }) => {
            assert_eq!(spent, 0);
            assert!(partial.is_empty());
        }
        other => panic!("expected BudgetExhausted, got {other:?}"),
    }
}

#[test]
fn mine_unlabeled_budget_exhaustion_returns_partial() {
    let db = fixture_db();
    let kb = KnowledgeBase::in_memory();
    // The script keeps calling tools and never finishes.
    let llm = ScriptedLlm::new("agent")
        .always(r#"{"tool": "table_info", "args": {"table": "nuclear_power_plants"}}"#);
    match mine_unlabeled("q", &db, &kb, &llm, 2) {
        Err(MiningError::BudgetExhausted { spent, .. }) => assert_eq!(spent, 2),
        other => panic!("expected BudgetExhausted, got {other:?}"),
    }
}

#[test]
fn pseudo_label_path_intersects_with_loop_entries() {
    let db = fixture_db();
    let kb = KnowledgeBase::in_memory();
    let llm = ScriptedLlm::new("agent")
        .on_sample("User query", 0, r#"{"pseudo_sql": "SELECT Country FROM nuclear_power_plants WHERE Status = 'Operational'"}"#)
        .on_sample("Observation", 1, r#"{"entries": [
            {"kind": "enum", "name": "Operational", "table": "nuclear_power_plants", "column": "Status", "value": "Operational"},
            {"kind": "table", "name": "imaginary_table", "table": "imaginary_table"}
        ]}"#);
    let entries = mine_unlabeled("running plants by country", &db, &kb, &llm, 5).unwrap();
    // The imaginary table is not in the AST candidates, so it drops out.
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].candidate.name, "Operational");
}

#[test]
fn synonym_entries_attach_to_existing_records() {
    let db = fixture_db();
    let mut kb = KnowledgeBase::in_memory();
    let existing = crate::ukf::UkfRecord::from_value(json!({
        "name": "Operational", "type": "enum", "source": "auto",
    }))
    .unwrap();
    let existing_id = existing.id.clone();
    kb.insert(existing, TrustMark::Mined).unwrap();

    let llm = ScriptedLlm::new("agent").always(
        r#"{"entries": [{"kind": "synonym", "name": "Operational", "synonyms": ["running"]}]}"#,
    );
    let entries = mine_unlabeled("running plants", &db, &kb, &llm, 3).unwrap();
    assert_eq!(entries.len(), 1);
    // Same identity: the merge policy unions the synonyms into the original.
    assert_eq!(entries[0].candidate.id, existing_id);
    let report = kb.merge_incoming(to_merge_batch(&entries)).unwrap();
    assert_eq!(report.merged_synonyms.len(), 1);
    assert!(kb.get(&existing_id).unwrap().synonyms.contains("running"));
}

#[test]
fn merge_rule_2_protects_trusted_records_end_to_end() {
    let db = fixture_db();
    let mut kb = KnowledgeBase::in_memory();
    let trusted = crate::ukf::UkfRecord::from_value(json!({
        "name": "Operational", "type": "enum", "source": "auto",
        "content": "The human-verified definition.",
        "collection": "nuclear_power_plants",
        "tags": ["[ENUM:Operational]", "[COLUMN:Status]", "[TABLE:nuclear_power_plants]"],
        "content_resources": {"table_id": "nuclear_power_plants", "column_id": "Status", "value": "Operational"},
    }))
    .unwrap();
    let trusted_id = trusted.id.clone();
    kb.insert(trusted, TrustMark::HumanVerified).unwrap();

    let llm = ScriptedLlm::new("miner").always(
        r#"[{"kind": "enum", "name": "Operational", "table": "nuclear_power_plants", "column": "Status", "value": "Operational"}]"#,
    );
    let entries = mine_labeled("running plants", GOLD_SQL, &db, &llm, None).unwrap();
    // The mined candidate collides with the trusted record id but carries
    // different content, so the merge discards it.
    assert_eq!(entries[0].candidate.id, trusted_id);
    let report = kb.merge_incoming(to_merge_batch(&entries)).unwrap();
    assert_eq!(report.discarded_conflicts.len(), 1);
    assert_eq!(
        kb.get(&trusted_id).unwrap().content,
        "The human-verified definition."
    );
}
