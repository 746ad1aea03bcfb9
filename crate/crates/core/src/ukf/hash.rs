//! Deterministic digests for record identity and content.
//!
//! Both hashes are SHA-256 over a canonical, length-prefixed field
//! serialization: set-valued fields are sorted before digesting and maps are
//! serialized with sorted keys, so insertion order never leaks into a hash.

use serde_json::Value;
use sha2::{Digest, Sha256};

/// Canonical JSON text for a value. `serde_json`'s default map is a `BTreeMap`,
/// so object keys come out sorted at every nesting level.
pub fn canonical_json(value: &Value) -> String {
    serde_json::to_string(value).expect("JSON value serialization cannot fail")
}

/// Digest a sequence of named fields. Every name and byte payload is
/// length-prefixed so field boundaries cannot be forged by concatenation.
pub struct FieldDigest {
    hasher: Sha256,
}

impl FieldDigest {
    pub fn new() -> Self {
        Self {
            hasher: Sha256::new(),
        }
    }

    pub fn field(&mut self, name: &str, bytes: &[u8]) {
        self.hasher.update((name.len() as u64).to_be_bytes());
        self.hasher.update(name.as_bytes());
        self.hasher.update((bytes.len() as u64).to_be_bytes());
        self.hasher.update(bytes);
    }

    pub fn str_field(&mut self, name: &str, value: &str) {
        self.field(name, value.as_bytes());
    }

    pub fn bool_field(&mut self, name: &str, value: bool) {
        self.field(name, if value { b"1" } else { b"0" });
    }

    /// Digest a pre-sorted collection of strings as one field.
    pub fn sorted_set_field<'a, I>(&mut self, name: &str, items: I)
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut payload = Vec::new();
        for item in items {
            payload.extend_from_slice(&(item.len() as u64).to_be_bytes());
            payload.extend_from_slice(item.as_bytes());
        }
        self.field(name, &payload);
    }

    pub fn finish(self) -> String {
        hex_lower(&self.hasher.finalize())
    }
}

impl Default for FieldDigest {
    fn default() -> Self {
        Self::new()
    }
}

pub fn hex_lower(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// SHA-256 of raw bytes as lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex_lower(&h.finalize())
}
