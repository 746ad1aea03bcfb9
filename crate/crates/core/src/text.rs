//! Rule-based lemmatization and tokenization shared by the string index and
//! the profiler's fuzzy search.
//!
//! The lemmatizer lower-cases, maps punctuation to spaces, and strips common
//! suffixes per token ("-ies", "-es", "-s", "-ing", "-ed") with a
//! user-extensible exception table. It is deterministic and idempotent.

use std::collections::BTreeSet;

pub const LEMMATIZER_VERSION: &str = "rule-v1";

/// Tokens that keep their surface form (gerunds used as nouns and short
/// function words the suffix rules would mangle).
const DEFAULT_EXCEPTIONS: &[&str] = &[
    "anything",
    "during",
    "everything",
    "evening",
    "morning",
    "nothing",
    "ranking",
    "running",
    "something",
    "spring",
    "string",
];

#[derive(Debug, Clone)]
pub struct Lemmatizer {
    exceptions: BTreeSet<String>,
    identity: bool,
}

impl Default for Lemmatizer {
    fn default() -> Self {
        Self::rule_based()
    }
}

impl Lemmatizer {
    pub fn rule_based() -> Self {
        Self {
            exceptions: DEFAULT_EXCEPTIONS.iter().map(|s| s.to_string()).collect(),
            identity: false,
        }
    }

    /// Pass-through lemmatizer for cases where patterns must match raw text.
    pub fn identity() -> Self {
        Self {
            exceptions: BTreeSet::new(),
            identity: true,
        }
    }

    pub fn with_exceptions<I, S>(mut self, extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.exceptions.extend(extra.into_iter().map(Into::into));
        self
    }

    pub fn version(&self) -> String {
        if self.identity {
            "identity".to_string()
        } else {
            LEMMATIZER_VERSION.to_string()
        }
    }

    /// Lemmatize free text: lower-case, punctuation to spaces, collapse
    /// whitespace, strip suffixes per token.
    pub fn lemmatize(&self, text: &str) -> String {
        if self.identity {
            return text.to_string();
        }
        self.tokens(text).join(" ")
    }

    /// Lemmatized tokens of the text.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        if self.identity {
            return text.split_whitespace().map(str::to_string).collect();
        }
        let lowered = text.to_lowercase();
        let normalized: String = lowered
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect();
        normalized
            .split_whitespace()
            .map(|t| self.lemmatize_token(t))
            .collect()
    }

    fn lemmatize_token(&self, token: &str) -> String {
        if self.exceptions.contains(token) {
            return token.to_string();
        }
        let n = token.chars().count();
        if let Some(stem) = token.strip_suffix("ies") {
            if n > 4 {
                return format!("{stem}y");
            }
        }
        if let Some(stem) = token.strip_suffix("sses") {
            return format!("{stem}ss");
        }
        if let Some(stem) = token.strip_suffix("es") {
            if n > 4 && stem.ends_with(['x', 'z', 's', 'h']) {
                return stem.to_string();
            }
        }
        if let Some(stem) = token.strip_suffix('s') {
            if n > 3 && !token.ends_with("ss") && !token.ends_with("us") && !token.ends_with("is") {
                return stem.to_string();
            }
        }
        if let Some(stem) = token.strip_suffix("ing") {
            if n > 5 {
                return undouble(stem);
            }
        }
        if let Some(stem) = token.strip_suffix("ed") {
            if n > 4 {
                return undouble(stem);
            }
        }
        token.to_string()
    }
}

/// Collapse a doubled final consonant left by suffix stripping
/// ("shipp" -> "ship"), keeping stems of at least three characters.
fn undouble(stem: &str) -> String {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n >= 4 && chars[n - 1] == chars[n - 2] && !"aeiou".contains(chars[n - 1]) {
        chars[..n - 1].iter().collect()
    } else {
        stem.to_string()
    }
}
