//! Subcommand implementations.

use crate::context::{apply_seed, CliContext};
use crate::io::{inline_or_file, read_jsonl, write_jsonl};
use crate::{AskArgs, CurateCmd, EvalCmd, Format, IndexCmd, KbCmd, MineCmd, ProfileCmd, UpdateArgs};
use rubik_core::agents::{
    self, majority_vote, rag_retrieve, RagConfig, SqlCandidate, TieBreaker,
};
use rubik_core::curation::{self, CurationRecord};
use rubik_core::eval::batch::{batch_accuracy, batch_accuracy_parallel, EvalPair};
use rubik_core::fusion::KnowledgeBundle;
use rubik_core::kb::{KnowledgeBase, TrustMark};
use rubik_core::llm::{request_digest, GenParams, LlmClient};
use rubik_core::mining::{self, to_merge_batch};
use rubik_core::profiler::{self, driver::SqlDriver, tool::execute_sql_tool};
use rubik_core::ukf::{Context as QueryContext, UkfRecord};
use rubik_core::vector::{SearchMode, Serializer};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug)]
pub enum CmdError {
    /// Exit code 2.
    Usage(String),
    /// Exit code 1.
    Failed(String),
}

fn failed<E: std::fmt::Display>(e: E) -> CmdError {
    CmdError::Failed(e.to_string())
}

fn parse_context(raw: Option<&str>) -> Result<QueryContext, CmdError> {
    match raw {
        None => Ok(QueryContext::new()),
        Some(text) => {
            let value: Value = serde_json::from_str(text)
                .map_err(|e| CmdError::Usage(format!("--context must be a JSON object: {e}")))?;
            value
                .as_object()
                .cloned()
                .ok_or_else(|| CmdError::Usage("--context must be a JSON object".into()))
        }
    }
}

fn print_json(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

// ---------------------------------------------------------------------------
// ask / gen

pub fn ask(ctx: &CliContext, args: &AskArgs, full: bool) -> Result<(), CmdError> {
    if args.query.trim().is_empty() {
        return Err(CmdError::Usage("--query must not be empty".into()));
    }
    let kb = ctx.open_kb()?;
    let indices = ctx.indices(&kb)?;
    let query_ctx = parse_context(args.context.as_deref())?;
    let rag_config = RagConfig {
        vector_k: ctx.config.index.vector_k,
        limit: ctx.config.index.limit,
        ..Default::default()
    };
    let bundle = rag_retrieve(&args.query, &query_ctx, &kb, &indices, &rag_config, None)
        .map_err(failed)?;

    let prompt = agents::build_gen_prompt(&args.query, &bundle, &[], &query_ctx);
    let prompt_digest = request_digest(&prompt, &GenParams::default());
    if args.dry_run {
        for message in &prompt {
            println!("[{}]\n{}\n", message.role, message.content);
        }
        return Ok(());
    }

    let db = ctx.open_db(None)?;
    apply_seed(db.as_ref())?;
    let gen_llm = ctx.llm_role("gen", args.mock_fixtures.as_deref())?;

    let winner = run_tts(ctx, &args.query, &bundle, gen_llm.as_ref(), db.as_ref(), &query_ctx, args)?;
    let winner = if full {
        agents::refine_sql(&args.query, winner, &bundle, db.as_ref(), gen_llm.as_ref(), 2, &query_ctx)
    } else {
        winner
    };

    let preview = if full {
        let result = execute_sql_tool(db.as_ref(), &winner.sql, 10).map_err(failed)?;
        Some(result)
    } else {
        None
    };

    let trace = json!({
        "knowledge_ids": bundle.ids(),
        "prompt_digest": prompt_digest,
    });
    match ctx.format {
        Format::Json => {
            let preview_json = preview.as_ref().map(|p| {
                json!({
                    "columns": p.columns,
                    "rows": p.rows.iter().map(|row| {
                        row.iter().map(|v| v.display()).collect::<Vec<_>>()
                    }).collect::<Vec<_>>(),
                    "total_row_count": p.total_row_count,
                    "error": p.error.as_ref().map(|e| e.message.clone()),
                })
            });
            print_json(&json!({
                "sql": winner.sql,
                "cot": winner.cot,
                "result_preview": preview_json,
                "bundle_trace": trace,
            }));
        }
        _ => {
            println!("{}", winner.sql);
            if let Some(p) = &preview {
                print!("{}", p.render());
            }
            println!("trace: {trace}");
        }
    }
    Ok(())
}

fn run_tts(
    ctx: &CliContext,
    query: &str,
    bundle: &KnowledgeBundle,
    gen_llm: &dyn LlmClient,
    db: &dyn SqlDriver,
    query_ctx: &QueryContext,
    args: &AskArgs,
) -> Result<SqlCandidate, CmdError> {
    if ctx.config.cascade.enabled {
        let factory = ctx.db_factory(None)?;
        let mut models: BTreeMap<String, std::sync::Arc<dyn LlmClient>> = BTreeMap::new();
        for rung in &ctx.config.cascade.ladder {
            models.insert(
                rung.model.clone(),
                ctx.llm_role("gen", args.mock_fixtures.as_deref())?,
            );
        }
        return agents::cascade(
            &ctx.config.cascade_ladder(),
            query,
            bundle,
            factory,
            std::sync::Arc::new(models),
            ctx.config.cascade.deadline_ms.max(1),
            query_ctx,
        )
        .map_err(failed);
    }
    let n = ctx.config.tts.n.max(1);
    if n == 1 {
        let mut cand = agents::generate_sql(
            query,
            bundle,
            gen_llm,
            &GenParams::default(),
            Some(db),
            &[],
            query_ctx,
        )
        .map_err(failed)?;
        if cand.compile_ok {
            agents::execute_candidate(&mut cand, db);
        }
        return Ok(cand);
    }
    let candidates = agents::sample_candidates(query, bundle, gen_llm, db, n, &GenParams::default(), query_ctx);
    let judge = ctx.llm_role("judge", args.mock_fixtures.as_deref())?;
    let tie = match ctx.config.tts.tie_breaker.as_str() {
        "llm_judge" => TieBreaker::LlmJudge(judge.as_ref()),
        _ => TieBreaker::FirstCompleted,
    };
    majority_vote(&candidates, tie).map_err(failed)
}

// ---------------------------------------------------------------------------
// update

#[derive(serde::Deserialize)]
struct UpdateLine {
    nl: String,
    #[serde(default)]
    sql: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    context: Option<Value>,
}

pub fn update(ctx: &CliContext, args: &UpdateArgs) -> Result<(), CmdError> {
    let (lines, malformed): (Vec<UpdateLine>, usize) = read_jsonl(&args.input)?;
    let mut kb = ctx.open_kb()?;
    let db = ctx.open_db(None)?;
    apply_seed(db.as_ref())?;
    let llm = ctx.llm_role("gen", None)?;

    let mut batch: Vec<UkfRecord> = Vec::new();
    let mut errors = malformed;
    for line in &lines {
        let outcome = match &line.sql {
            Some(sql) => mining::mine_labeled(&line.nl, sql, db.as_ref(), llm.as_ref(), None).map(|entries| {
                let mut records = to_merge_batch(&entries);
                // Keep the pair itself as an experience with its profile header.
                if let Ok(profiled) = curation::profile_sql(
                    &line.nl,
                    sql,
                    rubik_core::now(),
                    &[],
                    db.as_ref(),
                    None,
                ) {
                    if let Some(tpl) = rubik_core::ukf::template::template("Experience") {
                        let name = format!(
                            "exp_{}",
                            &rubik_core::ukf::hash::sha256_hex(line.nl.as_bytes())[..12]
                        );
                        if let Ok(record) = tpl.instantiate(json!({
                            "name": name,
                            "content": line.nl,
                            "content_resources": {
                                "sql": sql,
                                "header": profiled.header_comment,
                            },
                            "source": "user",
                        })) {
                            records.push(record);
                        }
                    }
                }
                records
            }),
            None => mining::mine_unlabeled(&line.nl, db.as_ref(), &kb, llm.as_ref(), args.budget)
                .map(|entries| to_merge_batch(&entries)),
        };
        match outcome {
            Ok(records) => batch.extend(records),
            Err(e) => {
                log::warn!("mining failed for {:?}: {e}", line.nl);
                errors += 1;
            }
        }
    }
    let report = kb.merge_incoming(batch).map_err(failed)?;
    rebuild_daac_file(ctx, &kb)?;
    match ctx.format {
        Format::Json => print_json(&json!({
            "merged_synonyms": report.merged_synonyms.len(),
            "discarded_conflicts": report.discarded_conflicts.len(),
            "dropped_same_id": report.dropped_same_id.len(),
            "inserted_low_priority": report.inserted_low_priority.len(),
            "errors": errors,
        })),
        _ => println!(
            "merged_synonyms={} discarded_conflicts={} dropped_same_id={} inserted={} errors={}",
            report.merged_synonyms.len(),
            report.discarded_conflicts.len(),
            report.dropped_same_id.len(),
            report.inserted_low_priority.len(),
            errors
        ),
    }
    Ok(())
}

/// Keep the serialized string index in step with the store when it exists.
fn rebuild_daac_file(ctx: &CliContext, kb: &KnowledgeBase) -> Result<(), CmdError> {
    let path = Path::new(&ctx.config.kb.path).join("daac.bin");
    if !path.exists() {
        return Ok(());
    }
    let index = build_daac_index(kb)?;
    std::fs::write(&path, index.to_bytes()).map_err(failed)?;
    Ok(())
}

fn build_daac_index(kb: &KnowledgeBase) -> Result<rubik_core::daac::DaacIndex, CmdError> {
    let entries: Vec<(String, std::collections::BTreeSet<String>)> = kb
        .live_records()
        .map(|r| {
            let mut surfaces = r.synonyms.clone();
            surfaces.insert(r.name.clone());
            (r.id.clone(), surfaces)
        })
        .collect();
    rubik_core::daac::DaacIndex::build(&entries, rubik_core::text::Lemmatizer::rule_based())
        .map_err(failed)
}

// ---------------------------------------------------------------------------
// kb

fn load_records(path: &Path) -> Result<Vec<UkfRecord>, CmdError> {
    let mut records = Vec::new();
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(failed)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
            .collect();
        files.sort();
        for file in files {
            let text = std::fs::read_to_string(&file).map_err(failed)?;
            records.push(UkfRecord::from_json_str(&text).map_err(failed)?);
        }
    } else {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::Usage(format!("cannot read {}: {e}", path.display())))?;
        // A single document or one document per line.
        if let Ok(record) = UkfRecord::from_json_str(&text) {
            records.push(record);
        } else {
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                records.push(UkfRecord::from_json_str(line).map_err(failed)?);
            }
        }
    }
    Ok(records)
}

pub fn kb(ctx: &CliContext, cmd: KbCmd) -> Result<(), CmdError> {
    let mut kb = ctx.open_kb()?;
    match cmd {
        KbCmd::Import { input, trust } => {
            let trust = TrustMark::from_str(&trust).map_err(CmdError::Usage)?;
            let records = load_records(&input)?;
            let mut ids = Vec::new();
            for record in records {
                ids.push(kb.insert(record, trust).map_err(failed)?);
            }
            match ctx.format {
                Format::Json => print_json(&json!({"imported": ids})),
                _ => println!("imported {} records", ids.len()),
            }
        }
        KbCmd::Merge { input } => {
            let records = load_records(&input)?;
            let report = kb.merge_incoming(records).map_err(failed)?;
            match ctx.format {
                Format::Json => {
                    print_json(&serde_json::to_value(&report).map_err(failed)?)
                }
                _ => println!(
                    "merged_synonyms={} discarded_conflicts={} dropped_same_id={} inserted={}",
                    report.merged_synonyms.len(),
                    report.discarded_conflicts.len(),
                    report.dropped_same_id.len(),
                    report.inserted_low_priority.len()
                ),
            }
        }
        KbCmd::Sweep { now } => {
            let now = match now {
                Some(text) => chrono::DateTime::parse_from_rfc3339(&text)
                    .map_err(|e| CmdError::Usage(format!("--now: {e}")))?
                    .with_timezone(&chrono::Utc),
                None => rubik_core::now(),
            };
            let count = kb.sweep_expired(now).map_err(failed)?;
            println!("{count}");
        }
        KbCmd::Get { id } => match kb.get(&id) {
            Some(record) => println!("{}", record.to_json_pretty()),
            None => return Err(CmdError::Failed(format!("unknown id {id}"))),
        },
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// index

pub fn index(ctx: &CliContext, cmd: IndexCmd) -> Result<(), CmdError> {
    let kb = ctx.open_kb()?;
    match cmd {
        IndexCmd::BuildDaac { out } => {
            let index = build_daac_index(&kb)?;
            if let Some(parent) = out.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(failed)?;
                }
            }
            std::fs::write(&out, index.to_bytes()).map_err(failed)?;
            println!(
                "wrote {} patterns to {}",
                index.pattern_count(),
                out.display()
            );
        }
        IndexCmd::Match { query, index } => {
            let daac = match index {
                Some(path) => {
                    let bytes = std::fs::read(&path).map_err(failed)?;
                    rubik_core::daac::DaacIndex::from_bytes(
                        &bytes,
                        rubik_core::text::Lemmatizer::rule_based(),
                    )
                    .map_err(failed)?
                }
                None => build_daac_index(&kb)?,
            };
            let matches = daac.match_all(&query);
            let rows: Vec<Value> = matches
                .iter()
                .map(|m| {
                    json!({
                        "start": m.start,
                        "end": m.end,
                        "pattern": m.pattern,
                        "knowledge_ids": m.knowledge_ids,
                    })
                })
                .collect();
            match ctx.format {
                Format::Json => print_json(&Value::Array(rows)),
                _ => {
                    for m in &matches {
                        println!("[{}..{}) {}", m.start, m.end, m.pattern);
                    }
                }
            }
        }
        IndexCmd::FacetQuery { filters, strict } => {
            let mut store = rubik_core::facet::FacetStore::in_memory().map_err(failed)?;
            store.rebuild(&kb).map_err(failed)?;
            store.set_strict(strict);
            let mut filter_map = BTreeMap::new();
            for item in filters {
                let (slot, pattern) = item.split_once('=').ok_or_else(|| {
                    CmdError::Usage(format!("--filter must be SLOT=PATTERN, got {item:?}"))
                })?;
                filter_map.insert(slot.to_string(), pattern.to_string());
            }
            let ids = store
                .facet_query(&filter_map, &rubik_core::facet::FacetPredicates::default())
                .map_err(failed)?;
            match ctx.format {
                Format::Json => print_json(&json!(ids)),
                _ => {
                    for id in ids {
                        println!("{id}");
                    }
                }
            }
        }
        IndexCmd::VectorSearch { text, k, mmr, lambda } => {
            let embedder = ctx.embedder();
            let mut index = rubik_core::vector::VectorIndex::new(embedder.as_ref());
            for record in kb.live_records() {
                index
                    .index_record(record, Serializer::Query, embedder.as_ref())
                    .map_err(failed)?;
            }
            let mode = if mmr || ctx.config.index.mmr {
                SearchMode::Mmr
            } else {
                SearchMode::Ann
            };
            let lambda = lambda.unwrap_or(ctx.config.index.lambda);
            let hits = index
                .search(Serializer::Query, &embedder.embed(&text), k, mode, lambda)
                .map_err(failed)?;
            match ctx.format {
                Format::Json => print_json(&json!(hits
                    .iter()
                    .map(|(id, score)| json!({"id": id, "score": score}))
                    .collect::<Vec<_>>())),
                _ => {
                    for (id, score) in hits {
                        println!("{score:.4} {id}");
                    }
                }
            }
        }
        IndexCmd::Graph {
            start,
            relations,
            hops,
        } => {
            let filter: std::collections::BTreeSet<String> = relations.into_iter().collect();
            let ids = rubik_core::graph::graph_neighbors(&kb, &start, &filter, hops)
                .map_err(failed)?;
            match ctx.format {
                Format::Json => print_json(&json!(ids)),
                _ => {
                    for id in ids {
                        println!("{id}");
                    }
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// profile

pub fn profile(ctx: &CliContext, cmd: ProfileCmd) -> Result<(), CmdError> {
    match cmd {
        ProfileCmd::Db { conn, out, use_llm } => {
            let db = ctx.open_db(conn.as_deref())?;
            apply_seed(db.as_ref())?;
            let llm = if use_llm {
                Some(ctx.llm_role("gen", None)?)
            } else {
                None
            };
            let profile = profiler::profile_db(
                db.as_ref(),
                llm.as_deref().map(|l| l as &dyn LlmClient),
                &profiler::ProfilerConfig::default(),
            )
            .map_err(failed)?;
            let records = profiler::export::export_profiles(&profile).map_err(failed)?;
            std::fs::create_dir_all(&out).map_err(failed)?;
            for record in &records {
                let path = out.join(format!("{}.json", record.id));
                std::fs::write(path, record.to_json_pretty()).map_err(failed)?;
            }
            println!("wrote {} records to {}", records.len(), out.display());
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(serde::Deserialize)]
struct SqlLine {
    id: String,
    sql: String,
}

pub fn eval(ctx: &CliContext, cmd: EvalCmd) -> Result<(), CmdError> {
    match cmd {
        EvalCmd::Bfbeta {
            pred,
            gold,
            conn,
            beta,
            report,
            workers,
        } => {
            let beta = beta.unwrap_or(ctx.config.eval.beta);
            if beta <= 0.0 {
                return Err(CmdError::Usage("--beta must be positive".into()));
            }
            let (preds, _): (Vec<SqlLine>, usize) = read_jsonl(&pred)?;
            let (golds, _): (Vec<SqlLine>, usize) = read_jsonl(&gold)?;
            let gold_map: BTreeMap<String, String> =
                golds.into_iter().map(|l| (l.id, l.sql)).collect();
            let mut pairs = Vec::new();
            let mut missing = Vec::new();
            for p in preds {
                match gold_map.get(&p.id) {
                    Some(gold_sql) => pairs.push(EvalPair {
                        id: p.id,
                        pred_sql: p.sql,
                        gold_sql: gold_sql.clone(),
                    }),
                    None => missing.push(p.id),
                }
            }
            let conn_str = conn.as_deref().unwrap_or(&ctx.config.db.conn);
            let file_backed = conn_str != "sqlite::memory:" && conn_str != "sqlite:";
            let batch = if workers > 1 && file_backed {
                let factory = ctx.db_factory(conn.as_deref())?;
                batch_accuracy_parallel(&pairs, factory.as_ref(), beta, workers)
            } else {
                let db = ctx.open_db(conn.as_deref())?;
                apply_seed(db.as_ref())?;
                batch_accuracy(&pairs, db.as_ref(), beta)
            };
            if let Some(report_path) = report {
                let mut writer = csv::Writer::from_path(&report_path).map_err(failed)?;
                writer
                    .write_record(["id", "ex", "bfbeta", "error"])
                    .map_err(failed)?;
                for item in &batch.per_item {
                    writer
                        .write_record([
                            item.id.as_str(),
                            if item.ex { "1" } else { "0" },
                            &format!("{:.6}", item.bfbeta),
                            item.error.as_deref().unwrap_or(""),
                        ])
                        .map_err(failed)?;
                }
                writer.flush().map_err(failed)?;
            }
            match ctx.format {
                Format::Json => print_json(&serde_json::to_value(&batch).map_err(failed)?),
                Format::Csv => {
                    println!("id,ex,bfbeta,error");
                    for item in &batch.per_item {
                        println!(
                            "{},{},{:.6},{}",
                            item.id,
                            item.ex as u8,
                            item.bfbeta,
                            item.error.as_deref().unwrap_or("")
                        );
                    }
                }
                Format::Text => println!(
                    "n={} ex={:.4} bfbeta={:.4} missing_gold={}",
                    batch.per_item.len(),
                    batch.ex,
                    batch.bfbeta,
                    missing.len()
                ),
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// mine

#[derive(serde::Deserialize)]
struct MineLine {
    nl: String,
    #[serde(default)]
    sql: Option<String>,
    #[serde(default)]
    failed_sql: Option<String>,
}

fn entries_to_json(entries: &[mining::MinedEntry]) -> Value {
    Value::Array(
        entries
            .iter()
            .map(|e| {
                json!({
                    "name": e.candidate.name,
                    "type": e.candidate.kind,
                    "id": e.candidate.id,
                    "verification": serde_json::to_value(e.verification).unwrap(),
                    "evidence": serde_json::to_value(&e.evidence).unwrap(),
                })
            })
            .collect(),
    )
}

pub fn mine(ctx: &CliContext, cmd: MineCmd) -> Result<(), CmdError> {
    let db = ctx.open_db(None)?;
    apply_seed(db.as_ref())?;
    let llm = ctx.llm_role("gen", None)?;
    let mut kb = ctx.open_kb()?;
    let (entries, errors) = match cmd {
        MineCmd::Labeled { ref input, .. } => {
            let (lines, malformed): (Vec<MineLine>, usize) = read_jsonl(input)?;
            let mut entries = Vec::new();
            let mut errors = malformed;
            for line in lines {
                let Some(sql) = line.sql else {
                    errors += 1;
                    continue;
                };
                match mining::mine_labeled(
                    &line.nl,
                    &sql,
                    db.as_ref(),
                    llm.as_ref(),
                    line.failed_sql.as_deref(),
                ) {
                    Ok(mut found) => entries.append(&mut found),
                    Err(e) => {
                        log::warn!("mine labeled failed: {e}");
                        errors += 1;
                    }
                }
            }
            (entries, errors)
        }
        MineCmd::Unlabeled {
            ref input, budget, ..
        } => {
            let (lines, malformed): (Vec<MineLine>, usize) = read_jsonl(input)?;
            let mut entries = Vec::new();
            let mut errors = malformed;
            for line in lines {
                match mining::mine_unlabeled(&line.nl, db.as_ref(), &kb, llm.as_ref(), budget) {
                    Ok(mut found) => entries.append(&mut found),
                    Err(mining::MiningError::BudgetExhausted { mut partial, .. }) => {
                        entries.append(&mut partial);
                        errors += 1;
                    }
                    Err(e) => {
                        log::warn!("mine unlabeled failed: {e}");
                        errors += 1;
                    }
                }
            }
            (entries, errors)
        }
    };
    let do_merge = matches!(
        cmd,
        MineCmd::Labeled { merge: true, .. } | MineCmd::Unlabeled { merge: true, .. }
    );
    if do_merge {
        let report = kb.merge_incoming(to_merge_batch(&entries)).map_err(failed)?;
        rebuild_daac_file(ctx, &kb)?;
        match ctx.format {
            Format::Json => print_json(&json!({
                "entries": entries_to_json(&entries),
                "report": serde_json::to_value(&report).map_err(failed)?,
                "errors": errors,
            })),
            _ => println!(
                "mined {} entries; merged: +{} inserted, {} merged synonyms, {} discarded, {} dropped; errors={errors}",
                entries.len(),
                report.inserted_low_priority.len(),
                report.merged_synonyms.len(),
                report.discarded_conflicts.len(),
                report.dropped_same_id.len()
            ),
        }
    } else {
        match ctx.format {
            Format::Json => print_json(&entries_to_json(&entries)),
            _ => {
                for e in &entries {
                    println!(
                        "{:?} {} ({})",
                        e.verification, e.candidate.name, e.candidate.kind
                    );
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// curate

#[derive(serde::Deserialize)]
struct TupleLine {
    nl: String,
    #[serde(default)]
    cot: String,
    sql: String,
    #[serde(default)]
    model_outcomes: Vec<(String, bool)>,
}

pub fn curate(ctx: &CliContext, cmd: CurateCmd) -> Result<(), CmdError> {
    match cmd {
        CurateCmd::Score { input, out } => {
            let (lines, _): (Vec<TupleLine>, usize) = read_jsonl(&input)?;
            if lines.is_empty() {
                write_jsonl::<CurationRecord>(&out, &[])?;
                println!("scored 0 tuples");
                return Ok(());
            }
            let judge = ctx.llm_role("judge", None)?;
            let embedder = ctx.embedder();
            let queries: Vec<String> = lines.iter().map(|l| l.nl.clone()).collect();
            let k = ctx
                .config
                .curation
                .diversity_k
                .min(queries.len().saturating_sub(1));
            let diversity_scores = if k >= 1 {
                curation::diversity(&queries, k, embedder.as_ref())
            } else {
                vec![0.0; queries.len()]
            };
            let coeff = ctx.config.coefficients();
            let mut records = Vec::new();
            for (line, v) in lines.into_iter().zip(diversity_scores) {
                let outcomes: Vec<bool> = line.model_outcomes.iter().map(|(_, ok)| *ok).collect();
                let (q, dims) = curation::quality(
                    &line.cot,
                    judge.as_ref(),
                    &curation::whitespace_tokens,
                    ctx.config.curation.t_max,
                )
                .map_err(failed)?;
                let mut record = CurationRecord {
                    nl: line.nl,
                    cot: line.cot,
                    sql: line.sql,
                    model_outcomes: line.model_outcomes,
                    hardness: curation::hardness(&outcomes),
                    quality: q,
                    diversity: v,
                    tie_break: 0.0,
                    total: 0.0,
                    quality_dims: dims,
                };
                record.total = curation::total_score(&record, &coeff);
                records.push(record);
            }
            write_jsonl(&out, &records)?;
            println!("scored {} tuples", records.len());
        }
        CurateCmd::Select { input, budget, out } => {
            let (records, _): (Vec<CurationRecord>, usize) = read_jsonl(&input)?;
            let selected = curation::select_top(records, &ctx.config.coefficients(), None, budget);
            match &out {
                Some(path) => {
                    write_jsonl(path, &selected)?;
                    println!("selected {} tuples", selected.len());
                }
                None => {
                    for record in &selected {
                        println!("{}", serde_json::to_string(record).map_err(failed)?);
                    }
                }
            }
        }
        CurateCmd::Synthesize {
            seeds,
            template,
            indicator,
            ontology,
            seed,
        } => {
            #[derive(serde::Deserialize)]
            struct SeedLine {
                nl: String,
                sql: String,
            }
            let (lines, _): (Vec<SeedLine>, usize) = read_jsonl(&seeds)?;
            let pairs: Vec<(String, String)> =
                lines.into_iter().map(|l| (l.nl, l.sql)).collect();
            let template = match template.as_str() {
                "with" => curation::CteTemplate::With,
                "union" => curation::CteTemplate::Union,
                "join" => curation::CteTemplate::Join,
                other => {
                    return Err(CmdError::Usage(format!(
                        "--template must be with|union|join, got {other}"
                    )))
                }
            };
            let indicator: Option<curation::Indicator> = match indicator {
                Some(text) => Some(
                    serde_json::from_str(&text)
                        .map_err(|e| CmdError::Usage(format!("--indicator: {e}")))?,
                ),
                None => None,
            };
            let ontology = match ontology {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(failed)?;
                    serde_json::from_str(&text)
                        .map_err(|e| CmdError::Usage(format!("--ontology: {e}")))?
                }
                None => curation::Ontology::default(),
            };
            let db = ctx.open_db(None)?;
            apply_seed(db.as_ref())?;
            let llm = ctx.llm_role("gen", None)?;
            let out_pairs = curation::synthesize_composed(
                &pairs,
                template,
                &ontology,
                indicator.as_ref(),
                llm.as_ref(),
                db.as_ref(),
                seed,
            );
            for (nl, sql) in &out_pairs {
                println!("{}", json!({"nl": nl, "sql": sql}));
            }
        }
        CurateCmd::Transfer { input, schema } => {
            #[derive(serde::Deserialize)]
            struct PairLine {
                nl: String,
                sql: String,
            }
            let (lines, _): (Vec<PairLine>, usize) = read_jsonl(&input)?;
            let schema = inline_or_file(&schema)?;
            let db = ctx.open_db(None)?;
            apply_seed(db.as_ref())?;
            let llm = ctx.llm_role("gen", None)?;
            for line in lines {
                let source = (line.nl, line.sql);
                for (nl, sql) in
                    curation::query_transfer(&source, db.as_ref(), &schema, llm.as_ref())
                {
                    println!("{}", json!({"nl": nl, "sql": sql}));
                }
            }
        }
    }
    Ok(())
}
