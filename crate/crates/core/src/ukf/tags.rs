//! Tag grammar: `"[" KEY (":"|"=") VALUE "]"` with non-empty KEY and VALUE.
//! Both separators are accepted on input; the canonical form uses ":" and an
//! upper-cased KEY.

use super::UkfError;
use std::collections::{BTreeMap, BTreeSet};

/// Slot map parsed from tags: slot name (upper-cased KEY) to its value set.
pub type Slots = BTreeMap<String, BTreeSet<String>>;

/// Parse one tag into `(KEY, VALUE)`. KEY is upper-cased.
pub fn parse_tag(tag: &str) -> Result<(String, String), UkfError> {
    let malformed = || UkfError::MalformedTag(tag.to_string());
    let inner = tag
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(malformed)?;
    let sep = inner.find([':', '=']).ok_or_else(malformed)?;
    let (key, rest) = inner.split_at(sep);
    let value = &rest[1..];
    if key.is_empty() || value.is_empty() {
        return Err(malformed());
    }
    Ok((key.to_uppercase(), value.to_string()))
}

/// Canonical text form of a tag: `[KEY:VALUE]`.
pub fn format_tag(key: &str, value: &str) -> String {
    format!("[{}:{}]", key.to_uppercase(), value)
}

/// Canonicalize a tag string, rejecting malformed input.
pub fn canonicalize_tag(tag: &str) -> Result<String, UkfError> {
    let (k, v) = parse_tag(tag)?;
    Ok(format_tag(&k, &v))
}

/// Parse a tag set into its slot map. Multiple tags may feed one slot.
pub fn parse_tags<'a, I>(tags: I) -> Result<Slots, UkfError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut slots = Slots::new();
    for tag in tags {
        let (k, v) = parse_tag(tag)?;
        slots.entry(k).or_default().insert(v);
    }
    Ok(slots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_separators_accepted() {
        let slots = parse_tags(["[ENUM=operational]", "[COLUMN:status]"]).unwrap();
        assert_eq!(slots["ENUM"], BTreeSet::from(["operational".to_string()]));
        assert_eq!(slots["COLUMN"], BTreeSet::from(["status".to_string()]));
    }

    #[test]
    fn empty_set_parses_empty() {
        assert!(parse_tags([]).unwrap().is_empty());
    }

    #[test]
    fn multi_value_slot() {
        let slots = parse_tags(["[TOPIC:AI]", "[TOPIC:DB]"]).unwrap();
        assert_eq!(
            slots["TOPIC"],
            BTreeSet::from(["AI".to_string(), "DB".to_string()])
        );
    }

    #[test]
    fn malformed_tags_rejected() {
        for bad in ["", "[]", "[:v]", "[k:]", "[kv]", "k:v", "[k:v"] {
            assert!(parse_tag(bad).is_err(), "expected rejection of {bad:?}");
        }
    }

    #[test]
    fn canonical_form_is_stable() {
        let c = canonicalize_tag("[enum=Operational]").unwrap();
        assert_eq!(c, "[ENUM:Operational]");
        assert_eq!(canonicalize_tag(&c).unwrap(), c);
    }
}
