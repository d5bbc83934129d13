//! Line-oriented `key=value` records.
//!
//! Keys are sorted, reals are written with 17 significant digits and complex
//! numbers as `re±imi`, so identical runs produce byte-identical output.

use std::collections::BTreeMap;
use std::fmt;

use crate::qcore::{CMatrix, PureState, C64};

#[derive(Debug, Clone, PartialEq)]
pub enum RecordValue {
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(String),
    Complex(C64),
    List(Vec<RecordValue>),
}

fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

impl fmt::Display for RecordValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordValue::Int(i) => write!(f, "{i}"),
            RecordValue::Real(x) => f.write_str(&real(*x)),
            RecordValue::Bool(b) => write!(f, "{b}"),
            RecordValue::Text(s) => {
                if !s.is_empty() && s.chars().all(|c| c.is_ascii_graphic() && c != '"' && c != '=') {
                    f.write_str(s)
                } else {
                    write!(f, "{s:?}")
                }
            }
            RecordValue::Complex(z) => {
                let sign = if z.im.is_sign_negative() { '-' } else { '+' };
                write!(f, "{}{sign}{}i", real(z.re), real(z.im.abs()))
            }
            RecordValue::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl From<i64> for RecordValue {
    fn from(v: i64) -> Self {
        RecordValue::Int(v)
    }
}

impl From<usize> for RecordValue {
    fn from(v: usize) -> Self {
        RecordValue::Int(v as i64)
    }
}

impl From<u32> for RecordValue {
    fn from(v: u32) -> Self {
        RecordValue::Int(i64::from(v))
    }
}

impl From<u64> for RecordValue {
    fn from(v: u64) -> Self {
        // seeds above i64::MAX keep their bit pattern readable as text
        i64::try_from(v).map_or_else(|_| RecordValue::Text(v.to_string()), RecordValue::Int)
    }
}

impl From<f64> for RecordValue {
    fn from(v: f64) -> Self {
        RecordValue::Real(v)
    }
}

impl From<bool> for RecordValue {
    fn from(v: bool) -> Self {
        RecordValue::Bool(v)
    }
}

impl From<&str> for RecordValue {
    fn from(v: &str) -> Self {
        RecordValue::Text(v.to_string())
    }
}

impl From<String> for RecordValue {
    fn from(v: String) -> Self {
        RecordValue::Text(v)
    }
}

impl From<C64> for RecordValue {
    fn from(v: C64) -> Self {
        RecordValue::Complex(v)
    }
}

impl From<Vec<f64>> for RecordValue {
    fn from(v: Vec<f64>) -> Self {
        RecordValue::List(v.into_iter().map(RecordValue::Real).collect())
    }
}

impl From<&PureState> for RecordValue {
    fn from(s: &PureState) -> Self {
        RecordValue::List(s.amplitudes().iter().map(|z| RecordValue::Complex(*z)).collect())
    }
}

impl From<&CMatrix> for RecordValue {
    /// Row-major list of rows.
    fn from(m: &CMatrix) -> Self {
        RecordValue::List(
            (0..m.nrows())
                .map(|i| RecordValue::List((0..m.ncols()).map(|j| RecordValue::Complex(m[(i, j)])).collect()))
                .collect(),
        )
    }
}

/// One output line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    fields: BTreeMap<String, RecordValue>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<RecordValue>) -> Self {
        self.insert(key, value);
        self
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<RecordValue>) {
        self.fields.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&RecordValue> {
        self.fields.get(key)
    }

    pub fn real(&self, key: &str) -> Option<f64> {
        match self.fields.get(key)? {
            RecordValue::Real(x) => Some(*x),
            RecordValue::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn int(&self, key: &str) -> Option<i64> {
        match self.fields.get(key)? {
            RecordValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn bool(&self, key: &str) -> Option<bool> {
        match self.fields.get(key)? {
            RecordValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.fields.get(key)? {
            RecordValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.fields.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Copies every field of `other`, overwriting equal keys.
    pub fn merge(&mut self, other: &Record) {
        for (k, v) in &other.fields {
            self.fields.insert(k.clone(), v.clone());
        }
    }

    /// Copies every field of `other` under `prefix.`.
    pub fn merge_prefixed(&mut self, prefix: &str, other: &Record) {
        for (k, v) in &other.fields {
            self.fields.insert(format!("{prefix}.{k}"), v.clone());
        }
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}
