//! Process-wide registry resolving composer and trigger names to functions.
//!
//! Records persist composer/trigger *names*; the functions live here. The
//! registry is read-mostly; registration is serialized behind a write lock.

use super::{Context, UkfRecord};
use once_cell::sync::Lazy;
use serde_json::Value;
use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

pub type ComposerFn = Arc<dyn Fn(&UkfRecord, &Context) -> String + Send + Sync>;
pub type TriggerFn = Arc<dyn Fn(&UkfRecord, &Context) -> bool + Send + Sync>;

pub const DEFAULT_KEY: &str = "default";

struct Registry {
    composers: BTreeMap<String, ComposerFn>,
    triggers: BTreeMap<String, TriggerFn>,
}

static REGISTRY: Lazy<RwLock<Registry>> = Lazy::new(|| RwLock::new(Registry::with_builtins()));

impl Registry {
    fn with_builtins() -> Self {
        let mut composers: BTreeMap<String, ComposerFn> = BTreeMap::new();
        composers.insert(
            DEFAULT_KEY.into(),
            Arc::new(|record, _ctx| record.content.clone()),
        );
        composers.insert("column_rule".into(), Arc::new(compose_column_rule));
        composers.insert("table_rule".into(), Arc::new(compose_table_rule));
        composers.insert("enum_rule".into(), Arc::new(compose_enum_rule));
        composers.insert("predicate_rule".into(), Arc::new(compose_predicate_rule));
        composers.insert("indicator_rule".into(), Arc::new(compose_indicator_rule));
        composers.insert("synonym_rule".into(), Arc::new(compose_synonym_rule));

        let mut triggers: BTreeMap<String, TriggerFn> = BTreeMap::new();
        triggers.insert(DEFAULT_KEY.into(), Arc::new(|_record, _ctx| true));
        triggers.insert("context_match".into(), Arc::new(trigger_context_match));

        Self { composers, triggers }
    }
}

pub fn register_composer(name: &str, f: ComposerFn) {
    REGISTRY
        .write()
        .expect("registry lock poisoned")
        .composers
        .insert(name.to_string(), f);
}

pub fn register_trigger(name: &str, f: TriggerFn) {
    REGISTRY
        .write()
        .expect("registry lock poisoned")
        .triggers
        .insert(name.to_string(), f);
}

/// Resolve a composer by registry name; unknown names fall back to "default"
/// with a warning so persisted records stay loadable.
pub fn resolve_composer(name: &str) -> ComposerFn {
    let reg = REGISTRY.read().expect("registry lock poisoned");
    if let Some(f) = reg.composers.get(name) {
        return f.clone();
    }
    log::warn!("unknown composer `{name}`, falling back to default");
    reg.composers[DEFAULT_KEY].clone()
}

pub fn resolve_trigger(name: &str) -> TriggerFn {
    let reg = REGISTRY.read().expect("registry lock poisoned");
    if let Some(f) = reg.triggers.get(name) {
        return f.clone();
    }
    log::warn!("unknown trigger `{name}`, falling back to default");
    reg.triggers[DEFAULT_KEY].clone()
}

/// Look up a dotted path (e.g. `user.region`) in a context object.
pub fn context_get<'a>(ctx: &'a Context, path: &str) -> Option<&'a Value> {
    let mut parts = path.split('.');
    let first = parts.next()?;
    let mut cur = ctx.get(first)?;
    for part in parts {
        cur = cur.as_object()?.get(part)?;
    }
    Some(cur)
}

fn context_str<'a>(ctx: &'a Context, key: &str) -> Option<&'a str> {
    context_get(ctx, key).and_then(Value::as_str)
}

/// Name followed by sorted synonyms, each quoted, joined with "/". A
/// `matches` context entry (spans found at retrieval time) overrides the
/// record's own surfaces.
fn surface_list(record: &UkfRecord, ctx: &Context) -> String {
    let mut seen = Vec::new();
    let from_ctx: Option<Vec<String>> = ctx.get("matches").and_then(|v| {
        v.as_array().map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
    });
    let surfaces: Vec<String> = match from_ctx {
        Some(m) if !m.is_empty() => m,
        _ => std::iter::once(record.name.clone())
            .chain(record.synonyms.iter().cloned())
            .collect(),
    };
    for s in surfaces {
        if !seen.contains(&s) {
            seen.push(s);
        }
    }
    seen.iter()
        .map(|s| format!("\"{s}\""))
        .collect::<Vec<_>>()
        .join("/")
}

fn resource_str<'a>(record: &'a UkfRecord, key: &str) -> Option<&'a str> {
    record.content_resources.get(key).and_then(Value::as_str)
}

fn compose_column_rule(record: &UkfRecord, ctx: &Context) -> String {
    let table_id = context_str(ctx, "table_id")
        .map(str::to_string)
        .or_else(|| resource_str(record, "table_id").map(str::to_string))
        .unwrap_or_default();
    let column_id = record
        .content_resources
        .get("predicate")
        .and_then(|p| p.get("physical"))
        .and_then(Value::as_str)
        .unwrap_or(&record.name)
        .to_string();
    format!(
        "- {} in query could be referring to column `\"{}\".\"{}\" -- Column: {}`.",
        surface_list(record, ctx),
        table_id,
        column_id,
        record.name
    )
}

fn compose_table_rule(record: &UkfRecord, ctx: &Context) -> String {
    let table_id = resource_str(record, "table_id").unwrap_or(&record.name);
    format!(
        "- {} in query could be referring to table `\"{}\" -- Table: {}`.",
        surface_list(record, ctx),
        table_id,
        record.name
    )
}

fn compose_enum_rule(record: &UkfRecord, ctx: &Context) -> String {
    let table_id = resource_str(record, "table_id").unwrap_or_default();
    let column_id = resource_str(record, "column_id").unwrap_or_default();
    let value = resource_str(record, "value").unwrap_or(&record.name);
    format!(
        "- {} in query could be referring to value `'{}'` of column `\"{}\".\"{}\"`.",
        surface_list(record, ctx),
        value,
        table_id,
        column_id
    )
}

fn compose_predicate_rule(record: &UkfRecord, ctx: &Context) -> String {
    let sql = resource_str(record, "sql").unwrap_or(&record.content);
    format!(
        "- {} in query could be referring to predicate `{}`.",
        surface_list(record, ctx),
        sql
    )
}

fn compose_indicator_rule(record: &UkfRecord, _ctx: &Context) -> String {
    format!("- {}: {}", record.name, record.content)
}

fn compose_synonym_rule(record: &UkfRecord, ctx: &Context) -> String {
    let target = resource_str(record, "target").unwrap_or(&record.name);
    format!(
        "- {} are synonyms of \"{}\".",
        surface_list(record, ctx),
        target
    )
}

/// Declarative trigger: every rule in `metadata.trigger_rules` must hold.
/// A rule is `{path, op: "equals"|"contains", value}` evaluated against the
/// query context; a missing path fails the rule.
fn trigger_context_match(record: &UkfRecord, ctx: &Context) -> bool {
    let rules = match record.metadata.get("trigger_rules").and_then(Value::as_array) {
        Some(r) => r,
        None => return true,
    };
    rules.iter().all(|rule| {
        let path = rule.get("path").and_then(Value::as_str).unwrap_or("");
        let op = rule.get("op").and_then(Value::as_str).unwrap_or("equals");
        let expect = rule.get("value").cloned().unwrap_or(Value::Null);
        match context_get(ctx, path) {
            None => false,
            Some(actual) => match op {
                "contains" => match (actual.as_str(), expect.as_str()) {
                    (Some(a), Some(e)) => a.contains(e),
                    _ => false,
                },
                _ => *actual == expect,
            },
        }
    })
}
