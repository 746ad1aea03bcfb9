//! Built-in record templates. A template pins the record type and installs
//! default composers/triggers; the constructor hint guides LLM-side
//! extraction into the template.

use super::{Context, UkfError, UkfRecord};
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UkfTemplate {
    pub template_name: String,
    pub fixed_type: String,
    pub default_composers: BTreeMap<String, String>,
    pub default_triggers: BTreeMap<String, String>,
    pub constructor_hint: String,
}

impl UkfTemplate {
    fn new(name: &str, composer: &str, hint: &str) -> Self {
        Self {
            template_name: name.to_string(),
            fixed_type: name.to_lowercase(),
            default_composers: BTreeMap::from([("default".to_string(), composer.to_string())]),
            default_triggers: BTreeMap::from([("default".to_string(), "default".to_string())]),
            constructor_hint: hint.to_string(),
        }
    }

    /// Instantiate a record from this template. The record type is forced to
    /// the template's `fixed_type`; composers/triggers default to the
    /// template's unless the spec overrides them.
    pub fn instantiate(&self, spec: Value) -> Result<UkfRecord, UkfError> {
        let mut fields: Context = match spec {
            Value::Object(map) => map,
            Value::Null => Context::new(),
            other => {
                return Err(UkfError::InvalidDocument(format!(
                    "template spec must be an object, got {other}"
                )))
            }
        };
        fields.insert("type".into(), Value::String(self.fixed_type.clone()));
        if !fields.contains_key("content_composers") {
            fields.insert(
                "content_composers".into(),
                serde_json::to_value(&self.default_composers).unwrap(),
            );
        }
        if !fields.contains_key("triggers") {
            fields.insert(
                "triggers".into(),
                serde_json::to_value(&self.default_triggers).unwrap(),
            );
        }
        UkfRecord::from_value(Value::Object(fields))
    }
}

static TEMPLATES: Lazy<BTreeMap<String, UkfTemplate>> = Lazy::new(|| {
    let list = [
        UkfTemplate::new(
            "Knowledge",
            "default",
            "Free-form short domain knowledge; put the statement in `content`.",
        ),
        UkfTemplate::new(
            "Document",
            "default",
            "A documentation chunk; store the chunk text in `content` and its origin in `parents`.",
        ),
        UkfTemplate::new(
            "Experience",
            "default",
            "A historical NL query; store the question in `content` and sql/cot/header in `content_resources`.",
        ),
        UkfTemplate::new(
            "Table",
            "table_rule",
            "A database table; set `content_resources.table_id` to the physical name.",
        ),
        UkfTemplate::new(
            "Column",
            "column_rule",
            "A database column; set `content_resources.table_id` and `content_resources.predicate.physical`.",
        ),
        UkfTemplate::new(
            "Enum",
            "enum_rule",
            "A value of a column; set `content_resources.{table_id,column_id,value}`.",
        ),
        UkfTemplate::new(
            "Taxonomy",
            "default",
            "A grouping of columns or values; store member ids under `content_resources.members`.",
        ),
        UkfTemplate::new(
            "Dependency",
            "default",
            "A functional dependency between columns; describe it in `content`.",
        ),
        UkfTemplate::new(
            "Predicate",
            "predicate_rule",
            "A reusable WHERE condition; set `content_resources.sql` to the clause text.",
        ),
        UkfTemplate::new(
            "Synonym",
            "synonym_rule",
            "Context-aware synonyms for another record; set `content_resources.target`.",
        ),
        UkfTemplate::new(
            "Indicator",
            "indicator_rule",
            "A domain formula such as `profit = revenue - cost`; put it in `content`.",
        ),
        UkfTemplate::new(
            "Term",
            "indicator_rule",
            "A named business term with its definition in `content`.",
        ),
        UkfTemplate::new(
            "Metric",
            "indicator_rule",
            "A computation metric (YoY, CAGR); put the formula template in `content`.",
        ),
        UkfTemplate::new(
            "Special",
            "default",
            "A special rule (temporal, validity, implicit intent); state it in `content`.",
        ),
    ];
    list.into_iter()
        .map(|t| (t.template_name.clone(), t))
        .collect()
});

/// The built-in template set, keyed by template name.
pub fn builtin_templates() -> &'static BTreeMap<String, UkfTemplate> {
    &TEMPLATES
}

/// Look up a built-in template case-insensitively.
pub fn template(name: &str) -> Option<&'static UkfTemplate> {
    TEMPLATES
        .values()
        .find(|t| t.template_name.eq_ignore_ascii_case(name))
}
