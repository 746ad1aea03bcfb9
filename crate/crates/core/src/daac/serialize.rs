//! Binary serialization of the automaton: magic header, version byte, then
//! the code table, base/check/fail/output arrays, and the pattern table.
//! All integers little-endian.

use super::{DaacError, DaacIndex, PatternEntry};
use crate::text::Lemmatizer;
use std::collections::{BTreeMap, BTreeSet};

const MAGIC: &[u8; 4] = b"DAAC";
const VERSION: u8 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DaacError> {
        if self.pos + n > self.buf.len() {
            return Err(DaacError::InvalidFormat("unexpected end of input".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DaacError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, DaacError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DaacError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64, DaacError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, DaacError> {
        let len = self.u64()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|e| DaacError::InvalidFormat(format!("bad utf-8: {e}")))
    }
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl DaacIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        put_string(&mut out, &self.lemmatizer_version);

        out.extend_from_slice(&(self.code_table.len() as u64).to_le_bytes());
        for (&ch, &code) in &self.code_table {
            out.extend_from_slice(&(ch as u32).to_le_bytes());
            out.extend_from_slice(&code.to_le_bytes());
        }

        out.extend_from_slice(&(self.base.len() as u64).to_le_bytes());
        for &b in &self.base {
            out.extend_from_slice(&b.to_le_bytes());
        }
        for &c in &self.check {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for &f in &self.fail {
            out.extend_from_slice(&f.to_le_bytes());
        }
        for pats in &self.output {
            out.extend_from_slice(&(pats.len() as u32).to_le_bytes());
            for &p in pats {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }

        out.extend_from_slice(&(self.patterns.len() as u64).to_le_bytes());
        for p in &self.patterns {
            put_string(&mut out, &p.surface);
            out.extend_from_slice(&(p.knowledge_ids.len() as u32).to_le_bytes());
            for id in &p.knowledge_ids {
                put_string(&mut out, id);
            }
        }
        out
    }

    /// Deserialize. The automaton matches over already-lemmatized text, so
    /// the caller supplies the lemmatizer that produced the patterns; a
    /// version mismatch is rejected.
    pub fn from_bytes(bytes: &[u8], lemmatizer: Lemmatizer) -> Result<Self, DaacError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(DaacError::InvalidFormat("bad magic header".into()));
        }
        if r.u8()? != VERSION {
            return Err(DaacError::InvalidFormat("unsupported version".into()));
        }
        let lemmatizer_version = r.string()?;
        if lemmatizer_version != lemmatizer.version() {
            return Err(DaacError::InvalidFormat(format!(
                "lemmatizer mismatch: index built with {lemmatizer_version}, loading with {}",
                lemmatizer.version()
            )));
        }

        let n_codes = r.u64()? as usize;
        let mut code_table = BTreeMap::new();
        for _ in 0..n_codes {
            let ch = char::from_u32(r.u32()?)
                .ok_or_else(|| DaacError::InvalidFormat("bad char code".into()))?;
            code_table.insert(ch, r.u32()?);
        }

        let n_slots = r.u64()? as usize;
        let mut base = Vec::with_capacity(n_slots);
        for _ in 0..n_slots {
            base.push(r.i64()?);
        }
        let mut check = Vec::with_capacity(n_slots);
        for _ in 0..n_slots {
            check.push(r.i64()?);
        }
        let mut fail = Vec::with_capacity(n_slots);
        for _ in 0..n_slots {
            fail.push(r.u32()?);
        }
        let mut output = Vec::with_capacity(n_slots);
        for _ in 0..n_slots {
            let n = r.u32()? as usize;
            let mut pats = Vec::with_capacity(n);
            for _ in 0..n {
                pats.push(r.u32()?);
            }
            output.push(pats);
        }

        let n_patterns = r.u64()? as usize;
        let mut patterns = Vec::with_capacity(n_patterns);
        for _ in 0..n_patterns {
            let surface = r.string()?;
            let n_ids = r.u32()? as usize;
            let mut knowledge_ids = BTreeSet::new();
            for _ in 0..n_ids {
                knowledge_ids.insert(r.string()?);
            }
            patterns.push(PatternEntry {
                char_len: surface.chars().count(),
                surface,
                knowledge_ids,
            });
        }

        Ok(Self {
            base,
            check,
            fail,
            output,
            code_table,
            patterns,
            lemmatizer,
            lemmatizer_version,
        })
    }
}
