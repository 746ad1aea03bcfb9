//! Cell canonicalization for execution-result comparison.
//!
//! Numeric-looking text parses to a number, text is trimmed, and NULL stays
//! distinct from the empty string. Two numerics are equal when
//! `|a - b| <= 1e-6 * max(1, |a|, |b|)`.

use serde_json::Value;
use std::cmp::Ordering;

pub const NUMERIC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Text(String),
    DateTime(String),
}

impl Cell {
    /// Canonicalize a raw text cell: trim, then parse numerics to a number.
    pub fn from_text(raw: &str) -> Cell {
        let trimmed = raw.trim();
        if let Some(cell) = parse_numeric(trimmed) {
            return cell;
        }
        Cell::Text(trimmed.to_string())
    }

    pub fn from_f64(v: f64) -> Cell {
        if v.fract() == 0.0 && v.abs() < 2f64.powi(53) && v >= i64::MIN as f64 && v <= i64::MAX as f64
        {
            Cell::Int(v as i64)
        } else {
            Cell::Num(v)
        }
    }

    pub fn from_json(v: &Value) -> Cell {
        match v {
            Value::Null => Cell::Null,
            Value::Bool(b) => Cell::Bool(*b),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Cell::Int(i)
                } else {
                    Cell::from_f64(n.as_f64().unwrap_or(f64::NAN))
                }
            }
            Value::String(s) => Cell::from_text(s),
            other => Cell::Text(other.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Num(f) => Some(*f),
            _ => None,
        }
    }

    /// Canonical token with a variant prefix; the basis of result
    /// fingerprints and deterministic row ordering.
    pub fn canonical_token(&self) -> String {
        match self {
            Cell::Null => "N:".to_string(),
            Cell::Bool(b) => format!("B:{b}"),
            Cell::Int(i) => format!("I:{i}"),
            Cell::Num(f) => format!("F:{f}"),
            Cell::Text(s) => format!("T:{s}"),
            Cell::DateTime(s) => format!("D:{s}"),
        }
    }

    fn variant_rank(&self) -> u8 {
        match self {
            Cell::Null => 0,
            Cell::Bool(_) => 1,
            Cell::Int(_) | Cell::Num(_) => 2,
            Cell::Text(_) => 3,
            Cell::DateTime(_) => 4,
        }
    }

    /// Total order used to sort rows for unordered comparison. Numerics sort
    /// by value regardless of variant.
    pub fn sort_cmp(&self, other: &Cell) -> Ordering {
        match self.variant_rank().cmp(&other.variant_rank()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        match (self, other) {
            (Cell::Bool(a), Cell::Bool(b)) => a.cmp(b),
            (Cell::Text(a), Cell::Text(b)) | (Cell::DateTime(a), Cell::DateTime(b)) => a.cmp(b),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                _ => Ordering::Equal,
            },
        }
    }
}

fn looks_numeric(s: &str) -> bool {
    if s.is_empty() {
        return false;
    }
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    if body.is_empty() {
        return false;
    }
    let mut digits = false;
    for c in body.chars() {
        match c {
            '0'..='9' => digits = true,
            '.' | 'e' | 'E' | '-' | '+' => {}
            _ => return false,
        }
    }
    digits
}

fn parse_numeric(s: &str) -> Option<Cell> {
    if !looks_numeric(s) {
        return None;
    }
    if let Ok(i) = s.parse::<i64>() {
        return Some(Cell::Int(i));
    }
    s.parse::<f64>().ok().filter(|f| f.is_finite()).map(Cell::from_f64)
}

/// Tolerance-aware cell equality: numerics compare within the relative
/// tolerance, everything else compares exactly.
pub fn cell_equal(a: &Cell, b: &Cell) -> bool {
    match (a, b) {
        (Cell::Null, Cell::Null) => true,
        (Cell::Bool(x), Cell::Bool(y)) => x == y,
        (Cell::Int(x), Cell::Int(y)) => x == y,
        (Cell::Text(x), Cell::Text(y)) => x == y,
        (Cell::DateTime(x), Cell::DateTime(y)) => x == y,
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => {
                (x - y).abs() <= NUMERIC_TOLERANCE * 1f64.max(x.abs()).max(y.abs())
            }
            _ => false,
        },
    }
}
