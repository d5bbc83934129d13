use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QsimError, Result};

/// One experiment parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    List(Vec<f64>),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(x) => write!(f, "{x}"),
            ParamValue::Text(s) => write!(f, "{s:?}"),
            ParamValue::List(v) => write!(f, "{v:?}"),
        }
    }
}

/// Declared parameter: name, default and a one-line description.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: ParamValue,
    pub help: &'static str,
}

impl ParamSpec {
    pub fn new(name: &'static str, default: ParamValue, help: &'static str) -> Self {
        Self { name, default, help }
    }
}

/// Parameter map handed to an experiment. Missing keys fall back to the
/// declared defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(pub BTreeMap<String, ParamValue>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn set(&mut self, key: &str, value: ParamValue) {
        self.0.insert(key.to_string(), value);
    }

    /// Rejects keys not in `specs` and values whose type differs from the
    /// declared default (integers are accepted where reals are declared).
    pub fn validate(&self, experiment: &str, specs: &[ParamSpec]) -> Result<()> {
        for (key, value) in &self.0 {
            let Some(spec) = specs.iter().find(|s| s.name == key) else {
                return Err(QsimError::InvalidParameters(format!(
                    "experiment {experiment} has no parameter `{key}`"
                )));
            };
            let compatible = matches!(
                (&spec.default, value),
                (ParamValue::Bool(_), ParamValue::Bool(_))
                    | (ParamValue::Int(_), ParamValue::Int(_))
                    | (ParamValue::Real(_), ParamValue::Real(_) | ParamValue::Int(_))
                    | (ParamValue::Text(_), ParamValue::Text(_))
                    | (ParamValue::List(_), ParamValue::List(_))
            );
            if !compatible {
                return Err(QsimError::InvalidParameters(format!(
                    "parameter `{key}` of {experiment} expects a value like {}, got {value}",
                    spec.default
                )));
            }
        }
        Ok(())
    }

    fn lookup<'a>(&'a self, key: &str, specs: &'a [ParamSpec]) -> Result<&'a ParamValue> {
        self.0
            .get(key)
            .or_else(|| specs.iter().find(|s| s.name == key).map(|s| &s.default))
            .ok_or_else(|| QsimError::InvalidParameters(format!("undeclared parameter `{key}`")))
    }

    pub fn int(&self, key: &str, specs: &[ParamSpec]) -> Result<i64> {
        match self.lookup(key, specs)? {
            ParamValue::Int(i) => Ok(*i),
            other => Err(QsimError::InvalidParameters(format!("`{key}` = {other} is not an integer"))),
        }
    }

    /// Non-negative integer parameter.
    pub fn count(&self, key: &str, specs: &[ParamSpec]) -> Result<usize> {
        let v = self.int(key, specs)?;
        usize::try_from(v)
            .map_err(|_| QsimError::OutOfRange(format!("`{key}` = {v} must be non-negative")))
    }

    pub fn real(&self, key: &str, specs: &[ParamSpec]) -> Result<f64> {
        match self.lookup(key, specs)? {
            ParamValue::Real(x) => Ok(*x),
            ParamValue::Int(i) => Ok(*i as f64),
            other => Err(QsimError::InvalidParameters(format!("`{key}` = {other} is not a number"))),
        }
    }

    pub fn flag(&self, key: &str, specs: &[ParamSpec]) -> Result<bool> {
        match self.lookup(key, specs)? {
            ParamValue::Bool(b) => Ok(*b),
            other => Err(QsimError::InvalidParameters(format!("`{key}` = {other} is not a boolean"))),
        }
    }

    pub fn text(&self, key: &str, specs: &[ParamSpec]) -> Result<String> {
        match self.lookup(key, specs)? {
            ParamValue::Text(s) => Ok(s.clone()),
            other => Err(QsimError::InvalidParameters(format!("`{key}` = {other} is not a string"))),
        }
    }

    pub fn list(&self, key: &str, specs: &[ParamSpec]) -> Result<Vec<f64>> {
        match self.lookup(key, specs)? {
            ParamValue::List(v) => Ok(v.clone()),
            other => Err(QsimError::InvalidParameters(format!("`{key}` = {other} is not a list"))),
        }
    }
}
