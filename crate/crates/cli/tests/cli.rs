//! End-to-end command tests against a temp workspace with a seeded fixture
//! database and scripted model responses.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Workspace {
    dir: tempfile::TempDir,
}

const FIXTURE_SQL: &str = "CREATE TABLE nuclear_power_plants (Country TEXT, Name TEXT, Status TEXT);
INSERT INTO nuclear_power_plants VALUES ('FR', 'A', 'Operational');
INSERT INTO nuclear_power_plants VALUES ('FR', 'B', 'Operational');
INSERT INTO nuclear_power_plants VALUES ('DE', 'C', 'Decommissioned');";

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let db = rubik_core::profiler::driver::SqliteDriver::open(dir.path().join("fixture.db"))
            .unwrap();
        use rubik_core::profiler::driver::SqlDriver;
        db.execute(FIXTURE_SQL).unwrap();
        std::fs::create_dir_all(dir.path().join("kb")).unwrap();
        let config = format!(
            r#"
[db]
conn = "sqlite:{db}"

[kb]
path = "{kb}"
backend = "dir"

[[llm.gen.script]]
contains = "Link phrases"
response = '[{{"kind": "enum", "name": "Operational", "synonyms": ["running"], "table": "nuclear_power_plants", "column": "Status", "value": "Operational"}}]'

[[llm.gen.script]]
contains = "User query"
response = '{{"entries": [{{"kind": "table", "name": "nuclear_power_plants", "synonyms": ["plants"], "table": "nuclear_power_plants"}}]}}'

[[llm.gen.script]]
contains = "Question"
response = "Filter on status.\n```sql\nSELECT \"Country\" FROM \"nuclear_power_plants\" WHERE \"Status\" = 'Operational'\n```"

[[llm.judge.script]]
contains = "Score this reasoning"
response = '{{"information_completeness": 5, "robustness": 5, "sql_structure_clarity": 5, "example_referencing": 5, "structured_thinking": 5, "non_repetitiveness": 5}}'
"#,
            db = dir.path().join("fixture.db").display(),
            kb = dir.path().join("kb").display(),
        );
        std::fs::write(dir.path().join("rubik.toml"), config).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let path = self.path(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    fn run(&self, args: &[&str]) -> Output {
        let config = self.path("rubik.toml");
        let mut all = vec!["--config", config.to_str().unwrap()];
        all.extend_from_slice(args);
        Command::new(env!("CARGO_BIN_EXE_rubik"))
            .args(&all)
            .env("RUBIK_NOW", "2025-05-01T00:00:00Z")
            .current_dir(self.dir.path())
            .output()
            .expect("binary runs")
    }
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    let ws = Workspace::new();
    let out = ws.run(&["ask", "--query", ""]);
    assert_eq!(out.status.code(), Some(2));
    let out = ws.run(&["definitely-not-a-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dry_run_prints_prompt_without_model() {
    let ws = Workspace::new();
    // No scripted rule could answer an empty-script role, so a model call
    // would fail; dry-run must succeed regardless.
    let out = ws.run(&["ask", "--query", "anything at all", "--dry-run"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("[system]"));
    assert!(stdout(&out).contains("anything at all"));
}

#[test]
fn update_routes_labeled_and_unlabeled_lines() {
    let ws = Workspace::new();
    let batch = ws.write(
        "batch.jsonl",
        concat!(
            r#"{"nl": "top countries with running plants", "sql": "SELECT Country FROM nuclear_power_plants WHERE Status = 'Operational' GROUP BY Country"}"#,
            "\n",
            r#"{"nl": "how many plants are decommissioned", "sql": "SELECT COUNT(*) FROM nuclear_power_plants WHERE Status = 'Decommissioned'"}"#,
            "\n",
            r#"{"nl": "which plants exist"}"#,
            "\n",
        ),
    );
    let out = ws.run(&["--format", "json", "update", "--in", batch.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report["inserted_low_priority"].as_u64().unwrap() > 0);
    assert_eq!(report["errors"], serde_json::json!(0));

    // The knowledge landed in the store.
    let kb = rubik_core::kb::KnowledgeBase::open_dir(ws.path("kb")).unwrap();
    assert!(kb.live_records().any(|r| r.name == "Operational"));
}

#[test]
fn update_empty_batch_reports_zeroes() {
    let ws = Workspace::new();
    let batch = ws.write("empty.jsonl", "");
    let out = ws.run(&["--format", "json", "update", "--in", batch.to_str().unwrap()]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in [
        "merged_synonyms",
        "discarded_conflicts",
        "dropped_same_id",
        "inserted_low_priority",
        "errors",
    ] {
        assert_eq!(report[key], serde_json::json!(0), "{key}");
    }
}

#[test]
fn update_counts_malformed_lines() {
    let ws = Workspace::new();
    let batch = ws.write(
        "bad.jsonl",
        "this is not json\n{\"nl\": \"which plants exist\"}\n",
    );
    let out = ws.run(&["--format", "json", "update", "--in", batch.to_str().unwrap()]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["errors"], serde_json::json!(1));
}

#[test]
fn eval_writes_csv_report() {
    let ws = Workspace::new();
    let preds = ws.write(
        "preds.jsonl",
        concat!(
            r#"{"id": "q1", "sql": "SELECT Country FROM nuclear_power_plants"}"#,
            "\n",
            r#"{"id": "q2", "sql": "SELECT broken FROM nuclear_power_plants"}"#,
            "\n",
        ),
    );
    let golds = ws.write(
        "golds.jsonl",
        concat!(
            r#"{"id": "q1", "sql": "SELECT Country FROM nuclear_power_plants"}"#,
            "\n",
            r#"{"id": "q2", "sql": "SELECT Name FROM nuclear_power_plants"}"#,
            "\n",
        ),
    );
    let report = ws.path("report.csv");
    let out = ws.run(&[
        "eval",
        "bfbeta",
        "--pred",
        preds.to_str().unwrap(),
        "--gold",
        golds.to_str().unwrap(),
        "--beta",
        "1.0",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("ex=0.5000"));
    let csv = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "id,ex,bfbeta,error");
    assert!(lines[1].starts_with("q1,1,1.000000"));
    assert!(lines[2].starts_with("q2,0,0.000000,pred execution failed"));
}

#[test]
fn profile_output_is_deterministic() {
    let ws = Workspace::new();
    let out1 = ws.run(&["profile", "db", "--out", "profiles_a"]);
    assert!(out1.status.success());
    let out2 = ws.run(&["profile", "db", "--out", "profiles_b"]);
    assert!(out2.status.success());
    let read_all = |dir: &Path| -> Vec<(String, String)> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read_to_string(&p).unwrap(),
                )
            })
            .collect()
    };
    let a = read_all(&ws.path("profiles_a"));
    let b = read_all(&ws.path("profiles_b"));
    assert_eq!(a, b, "profile export must be byte-stable under a fixed clock");
    assert_eq!(a.len(), 4); // one table + three columns
}

#[test]
fn kb_import_get_round_trip() {
    let ws = Workspace::new();
    let record = serde_json::json!({
        "name": "yoy_metric",
        "type": "metric",
        "content": "YoY = (current - prior) / ABS(prior), zero when prior is 0",
    });
    let doc = ws.write("record.json", &record.to_string());
    let out = ws.run(&[
        "--format",
        "json",
        "kb",
        "import",
        "--in",
        doc.to_str().unwrap(),
        "--trust",
        "human_verified",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let imported: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let id = imported["imported"][0].as_str().unwrap().to_string();
    let out = ws.run(&["kb", "get", "--id", &id]);
    assert!(out.status.success());
    let loaded: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(loaded["name"], "yoy_metric");
    assert_eq!(loaded["_id"], serde_json::json!(id));

    let missing = ws.run(&["kb", "get", "--id", "doesnotexist"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn index_match_uses_serialized_automaton() {
    let ws = Workspace::new();
    let record = serde_json::json!({
        "name": "Operational",
        "type": "enum",
        "synonyms": ["running"],
    });
    let doc = ws.write("enum.json", &record.to_string());
    assert!(ws
        .run(&["kb", "import", "--in", doc.to_str().unwrap(), "--trust", "labeled"])
        .status
        .success());
    let index_path = ws.path("daac.bin");
    assert!(ws
        .run(&["index", "build-daac", "--out", index_path.to_str().unwrap()])
        .status
        .success());
    let out = ws.run(&[
        "--format",
        "json",
        "index",
        "match",
        "--query",
        "plants that are running",
        "--index",
        index_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let matches: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(matches[0]["pattern"], "running");
}

#[test]
fn interleaved_update_and_ask_stay_consistent() {
    let ws = Workspace::new();
    let ask = |ws: &Workspace| {
        let out = ws.run(&[
            "--format",
            "json",
            "ask",
            "--query",
            "countries with running plants",
        ]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_str::<serde_json::Value>(&stdout(&out)).unwrap()
    };
    let first = ask(&ws);
    assert!(first["sql"].as_str().unwrap().contains("SELECT"));
    let batch = ws.write(
        "batch.jsonl",
        concat!(
            r#"{"nl": "top countries with running plants", "sql": "SELECT Country FROM nuclear_power_plants WHERE Status = 'Operational' GROUP BY Country"}"#,
            "\n",
        ),
    );
    assert!(ws
        .run(&["update", "--in", batch.to_str().unwrap()])
        .status
        .success());
    let second = ask(&ws);
    // The knowledge base grew; retrieval now carries the mined enum record.
    assert!(
        second["bundle_trace"]["knowledge_ids"].as_array().unwrap().len()
            >= first["bundle_trace"]["knowledge_ids"].as_array().unwrap().len()
    );
    // Repeating the ask after the update is still deterministic.
    let third = ask(&ws);
    assert_eq!(second, third);
}
