//! The UKF 1.0 record model: six attribute groups, dynamic content
//! composition, trigger evaluation, tag slots, and identity/content hashing.

pub mod hash;
pub mod registry;
pub mod tags;
pub mod template;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub use registry::{register_composer, register_trigger, ComposerFn, TriggerFn};
pub use tags::Slots;
pub use template::{builtin_templates, UkfTemplate};

/// Record identifier: lowercase hex of the identity digest.
pub type UkfId = String;

/// Query context passed to composers and triggers: a JSON object.
pub type Context = serde_json::Map<String, Value>;

#[derive(Debug, Error)]
pub enum UkfError {
    #[error("record name is required")]
    MissingName,
    #[error("malformed tag `{0}`")]
    MalformedTag(String),
    #[error("invalid source `{0}`; expected one of system/user/auto/tool/derived/unknown")]
    InvalidSource(String),
    #[error("unknown composer `{0}`")]
    UnknownComposer(String),
    #[error("unknown trigger `{0}`")]
    UnknownTrigger(String),
    #[error("field `{0}` is immutable; create a new version instead")]
    ImmutableField(String),
    #[error("invalid record document: {0}")]
    InvalidDocument(String),
}

/// Provenance class of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    System,
    User,
    Auto,
    Tool,
    Derived,
    #[default]
    Unknown,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::System => "system",
            Source::User => "user",
            Source::Auto => "auto",
            Source::Tool => "tool",
            Source::Derived => "derived",
            Source::Unknown => "unknown",
        }
    }
}

impl FromStr for Source {
    type Err = UkfError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "system" => Ok(Source::System),
            "user" => Ok(Source::User),
            "auto" => Ok(Source::Auto),
            "tool" => Ok(Source::Tool),
            "derived" => Ok(Source::Derived),
            "unknown" => Ok(Source::Unknown),
            other => Err(UkfError::InvalidSource(other.to_string())),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knowledge-graph tuple stored on a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub subject_id: UkfId,
    pub relation: String,
    pub object_id: UkfId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_id: Option<UkfId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_resources: Option<BTreeMap<String, Value>>,
}

impl Relation {
    pub fn new(subject: impl Into<UkfId>, relation: impl Into<String>, object: impl Into<UkfId>) -> Self {
        Self {
            subject_id: subject.into(),
            relation: relation.into(),
            object_id: object.into(),
            relation_id: None,
            relation_resources: None,
        }
    }

    fn sort_key(&self) -> (String, String, String, String, String) {
        let res = self
            .relation_resources
            .as_ref()
            .map(|m| hash::canonical_json(&serde_json::to_value(m).unwrap_or(Value::Null)))
            .unwrap_or_default();
        (
            self.subject_id.clone(),
            self.relation.clone(),
            self.object_id.clone(),
            self.relation_id.clone().unwrap_or_default(),
            res,
        )
    }
}

impl PartialOrd for Relation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Relation {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

fn default_kind() -> String {
    "general".to_string()
}
fn default_version() -> String {
    "v0.1.0".to_string()
}
fn default_variant() -> String {
    "default".to_string()
}
fn default_unknown() -> String {
    "unknown".to_string()
}
fn default_collection() -> String {
    "general".to_string()
}
fn default_expiration() -> i64 {
    -1
}
fn default_now() -> DateTime<Utc> {
    crate::now()
}
fn default_fn_map() -> BTreeMap<String, String> {
    BTreeMap::from([(registry::DEFAULT_KEY.to_string(), registry::DEFAULT_KEY.to_string())])
}

/// A UKF 1.0 knowledge record. Values are immutable after construction and
/// safe to share across threads; the sanctioned mutation paths are
/// [`UkfRecord::with_changes`] and versioning through the knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UkfRecord {
    pub name: String,
    #[serde(default)]
    pub notes: String,
    #[serde(default)]
    pub short_description: String,
    #[serde(default)]
    pub description: String,
    #[serde(rename = "type", default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_version")]
    pub version: String,
    #[serde(default)]
    pub version_notes: String,
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default)]
    pub variant_notes: String,
    #[serde(default)]
    pub content: String,
    #[serde(default)]
    pub content_resources: BTreeMap<String, Value>,
    /// Composer slot -> registry function name; always holds "default".
    #[serde(default = "default_fn_map")]
    pub content_composers: BTreeMap<String, String>,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub parents: BTreeMap<String, Value>,
    #[serde(default = "default_unknown")]
    pub owner: String,
    #[serde(default = "default_unknown")]
    pub workspace: String,
    #[serde(default = "default_unknown")]
    pub creator: String,
    #[serde(default = "default_collection")]
    pub collection: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default)]
    pub synonyms: BTreeSet<String>,
    /// Trigger slot -> registry function name; always holds "default".
    #[serde(default = "default_fn_map")]
    pub triggers: BTreeMap<String, String>,
    #[serde(default)]
    pub priority: i64,
    #[serde(default)]
    pub related: BTreeSet<Relation>,
    #[serde(default)]
    pub auths: BTreeSet<(String, String)>,
    #[serde(default)]
    pub timefluid: bool,
    #[serde(default = "default_now")]
    pub timestamp: DateTime<Utc>,
    #[serde(default = "default_now")]
    pub last_verified: DateTime<Utc>,
    /// Seconds since `last_verified` after which the record expires; -1 never.
    #[serde(default = "default_expiration")]
    pub expiration: i64,
    #[serde(default)]
    pub inactive_mark: bool,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
    #[serde(default)]
    pub profile: BTreeMap<String, Value>,
    #[serde(rename = "_id", default, skip_serializing_if = "String::is_empty")]
    pub id: UkfId,
    #[serde(
        rename = "_content_hash",
        default,
        skip_serializing_if = "String::is_empty"
    )]
    pub content_hash: String,
    #[serde(skip)]
    pub slots: Slots,
}

/// Fields rejected by [`UkfRecord::with_changes`]; a new version is the
/// sanctioned way to change them.
pub const IMMUTABLE_FIELDS: &[&str] = &[
    "name",
    "type",
    "version",
    "variant",
    "content",
    "content_resources",
    "content_composers",
    "source",
    "parents",
    "owner",
    "workspace",
    "creator",
    "collection",
    "tags",
    "priority",
    "timefluid",
    "timestamp",
    "_id",
    "_content_hash",
];

impl UkfRecord {
    /// Build a record from a partial field map; absent fields take their
    /// defaults, hashes and the slot cache are populated.
    pub fn from_value(spec: Value) -> Result<Self, UkfError> {
        if spec.get("name").and_then(Value::as_str).unwrap_or("").is_empty() {
            return Err(UkfError::MissingName);
        }
        if let Some(src) = spec.get("source") {
            let s = src
                .as_str()
                .ok_or_else(|| UkfError::InvalidSource(src.to_string()))?;
            Source::from_str(s)?;
        }
        let mut record: UkfRecord = serde_json::from_value(spec)
            .map_err(|e| UkfError::InvalidDocument(e.to_string()))?;
        record.finalize()?;
        Ok(record)
    }

    pub fn from_json_str(doc: &str) -> Result<Self, UkfError> {
        let value: Value =
            serde_json::from_str(doc).map_err(|e| UkfError::InvalidDocument(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn builder(name: impl Into<String>) -> RecordBuilder {
        RecordBuilder::new(name)
    }

    /// Validate invariants, canonicalize tags, rebuild the slot cache, and
    /// fill in any missing hash.
    pub fn finalize(&mut self) -> Result<(), UkfError> {
        if self.name.is_empty() {
            return Err(UkfError::MissingName);
        }
        let canonical: BTreeSet<String> = self
            .tags
            .iter()
            .map(|t| tags::canonicalize_tag(t))
            .collect::<Result<_, _>>()?;
        self.tags = canonical;
        self.slots = tags::parse_tags(self.tags.iter().map(String::as_str))?;
        self.content_composers
            .entry(registry::DEFAULT_KEY.to_string())
            .or_insert_with(|| registry::DEFAULT_KEY.to_string());
        self.triggers
            .entry(registry::DEFAULT_KEY.to_string())
            .or_insert_with(|| registry::DEFAULT_KEY.to_string());
        if self.id.is_empty() {
            self.id = self.identity_digest();
        }
        if self.content_hash.is_empty() {
            self.content_hash = self.content_digest();
        }
        Ok(())
    }

    /// Digest over exactly the identity fields, with sets canonically ordered.
    pub fn identity_digest(&self) -> UkfId {
        let mut d = hash::FieldDigest::new();
        d.str_field("type", &self.kind);
        d.str_field("name", &self.name);
        d.str_field("version", &self.version);
        d.str_field("variant", &self.variant);
        d.str_field("source", self.source.as_str());
        d.str_field("creator", &self.creator);
        d.str_field("owner", &self.owner);
        d.str_field("workspace", &self.workspace);
        d.str_field("collection", &self.collection);
        d.sorted_set_field("tags", self.tags.iter().map(String::as_str));
        d.bool_field("timefluid", self.timefluid);
        d.finish()
    }

    /// Digest over exactly the content fields with canonical key ordering.
    pub fn content_digest(&self) -> String {
        let mut d = hash::FieldDigest::new();
        d.str_field("content", &self.content);
        let resources = serde_json::to_value(&self.content_resources).unwrap_or(Value::Null);
        d.str_field("content_resources", &hash::canonical_json(&resources));
        d.finish()
    }

    /// Render the record through the named composer slot.
    pub fn compose_content(&self, composer: &str, ctx: &Context) -> Result<String, UkfError> {
        let fn_name = self
            .content_composers
            .get(composer)
            .ok_or_else(|| UkfError::UnknownComposer(composer.to_string()))?;
        Ok(registry::resolve_composer(fn_name)(self, ctx))
    }

    /// Evaluate the named trigger slot against a query context.
    pub fn eval_trigger(&self, trigger: &str, ctx: &Context) -> Result<bool, UkfError> {
        let fn_name = self
            .triggers
            .get(trigger)
            .ok_or_else(|| UkfError::UnknownTrigger(trigger.to_string()))?;
        Ok(registry::resolve_trigger(fn_name)(self, ctx))
    }

    /// True iff the record has a finite expiration and `now` is strictly past
    /// `last_verified + expiration` seconds.
    pub fn is_expired(&self, now: DateTime<Utc>) -> bool {
        self.expiration >= 0 && now - self.last_verified > Duration::seconds(self.expiration)
    }

    /// Apply a change set to the mutable fields, returning the updated record.
    /// Touching an immutable field is an error.
    pub fn with_changes(&self, changes: &Context) -> Result<UkfRecord, UkfError> {
        for field in changes.keys() {
            if IMMUTABLE_FIELDS.contains(&field.as_str()) {
                return Err(UkfError::ImmutableField(field.clone()));
            }
        }
        self.merged(changes)
    }

    /// Change application without the immutability check; versioning uses
    /// this and recomputes both hashes.
    pub(crate) fn merged(&self, changes: &Context) -> Result<UkfRecord, UkfError> {
        let mut doc = serde_json::to_value(self).map_err(|e| UkfError::InvalidDocument(e.to_string()))?;
        let obj = doc.as_object_mut().expect("record serializes to an object");
        for (k, v) in changes {
            obj.insert(k.clone(), v.clone());
        }
        obj.remove("_id");
        obj.remove("_content_hash");
        let mut record: UkfRecord =
            serde_json::from_value(doc).map_err(|e| UkfError::InvalidDocument(e.to_string()))?;
        record.finalize()?;
        Ok(record)
    }

    /// One record per JSON document, field names per the UKF schema, sets as
    /// sorted arrays, hashes as lowercase hex.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes to JSON")
    }
}

/// Convenience constructor for records assembled in code.
pub struct RecordBuilder {
    fields: Context,
}

impl RecordBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        let mut fields = Context::new();
        fields.insert("name".into(), Value::String(name.into()));
        Self { fields }
    }

    pub fn set(mut self, field: &str, value: Value) -> Self {
        self.fields.insert(field.to_string(), value);
        self
    }

    pub fn kind(self, kind: &str) -> Self {
        self.set("type", Value::String(kind.into()))
    }

    pub fn content(self, content: &str) -> Self {
        self.set("content", Value::String(content.into()))
    }

    pub fn synonyms<I: IntoIterator<Item = S>, S: Into<String>>(self, syns: I) -> Self {
        let arr: Vec<Value> = syns.into_iter().map(|s| Value::String(s.into())).collect();
        self.set("synonyms", Value::Array(arr))
    }

    pub fn tags<I: IntoIterator<Item = S>, S: Into<String>>(self, tags: I) -> Self {
        let arr: Vec<Value> = tags.into_iter().map(|s| Value::String(s.into())).collect();
        self.set("tags", Value::Array(arr))
    }

    pub fn build(self) -> Result<UkfRecord, UkfError> {
        UkfRecord::from_value(Value::Object(self.fields))
    }
}

/// Standalone form of the tag-slot parser (see [`tags`]).
pub fn parse_tags<'a, I>(tag_set: I) -> Result<Slots, UkfError>
where
    I: IntoIterator<Item = &'a str>,
{
    tags::parse_tags(tag_set)
}
