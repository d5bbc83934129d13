//! TOML run configurations.
//!
//! A configuration names a state, one action and an output. Parsing is
//! strict: unknown keys are fatal, and every invariant failure is reported
//! with the dotted key path and, when it can be found, the line.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use pqsim_core::devices::{ComplexEntry, Device, DeviceRegistry, DeviceSpec};
use pqsim_core::experiments::{Experiment, ExperimentRegistry, Params};
use pqsim_core::qcore::{CVector, FactorSpace, PureState, RandomStream};
use serde::{Deserialize, Serialize};

use crate::runner::check_parameters;

/// Explicit amplitudes may miss unit norm by this much before a warning.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Stream slot for drawing a `random` initial state.
const STATE_STREAM: u64 = 0x57A7E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    Bell {},
    Ghz {},
    /// Computational basis labels, one per factor.
    Product { labels: Vec<usize> },
    Random {},
    /// Entries are reals or `[re, im]` pairs.
    Explicit { amplitudes: Vec<ComplexEntry> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Closure,
    #[serde(alias = "product-form")]
    ProductForm,
    #[serde(alias = "estimation")]
    EstimationAssumption,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Closure => "closure",
            CheckKind::ProductForm => "product_form",
            CheckKind::EstimationAssumption => "estimation_assumption",
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionConfig {
    Device {
        target: Vec<usize>,
        #[serde(default = "one")]
        repetitions: usize,
        device: DeviceSpec,
    },
    Experiment {
        id: String,
        #[serde(default)]
        params: Params,
    },
    Check {
        check: CheckKind,
        #[serde(default)]
        params: Params,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Text,
    Records,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

/// A run configuration as written in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateConfig>,
    pub action: ActionConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A configuration problem, located by key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(key: &str, message: impl fmt::Display) -> Self {
        Self {
            key: Some(key.to_string()),
            line: None,
            message: message.to_string(),
        }
    }

    fn locate(mut self, text: &str) -> Self {
        if self.line.is_none() {
            if let Some(key) = &self.key {
                self.line = find_key_line(text, key);
            }
        }
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.key, self.line) {
            (Some(k), Some(l)) => write!(f, "`{k}` (line {l}): {}", self.message),
            (Some(k), None) => write!(f, "`{k}`: {}", self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line where `path` (dotted) is assigned or opened as a table.
fn find_key_line(text: &str, path: &str) -> Option<usize> {
    let mut table = String::new();
    let mut table_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = header.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if table == path {
                table_line = Some(i + 1);
            }
            continue;
        }
        if let Some((lhs, _)) = line.split_once('=') {
            let key = lhs.trim().trim_matches('"');
            let full = if table.is_empty() {
                key.to_string()
            } else {
                format!("{table}.{key}")
            };
            if full == path {
                return Some(i + 1);
            }
        }
    }
    table_line.or_else(|| {
        path.rsplit_once('.')
            .and_then(|(parent, _)| find_key_line(text, parent))
    })
}

/// What a validated configuration does.
#[derive(Clone)]
pub enum Action {
    Device {
        spec: DeviceSpec,
        device: Arc<dyn Device>,
        target: Vec<usize>,
        repetitions: usize,
    },
    Experiment {
        experiment: Arc<dyn Experiment>,
        params: Params,
    },
    Check {
        check: CheckKind,
        params: Params,
    },
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Device { device, target, repetitions, .. } => f
                .debug_struct("Device")
                .field("device", &device.label())
                .field("target", target)
                .field("repetitions", repetitions)
                .finish(),
            Action::Experiment { experiment, params } => f
                .debug_struct("Experiment")
                .field("id", &experiment.id())
                .field("params", params)
                .finish(),
            Action::Check { check, params } => f
                .debug_struct("Check")
                .field("check", check)
                .field("params", params)
                .finish(),
        }
    }
}

/// A configuration with every invariant checked and every object built.
#[derive(Debug, Clone)]
pub struct Plan {
    pub seed: u64,
    pub state: Option<PureState>,
    pub action: Action,
    pub output: OutputConfig,
    /// Non-fatal notes, e.g. renormalised amplitudes.
    pub warnings: Vec<String>,
}

/// Parses TOML text into a [`RunConfig`] without validating invariants.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigError {
            key: None,
            line,
            message: e.message().to_string(),
        }
    })
}

/// Serialises a configuration back to TOML.
pub fn to_toml(config: &RunConfig) -> Result<String, ConfigError> {
    toml::to_string(config).map_err(|e| ConfigError {
        key: None,
        line: None,
        message: e.to_string(),
    })
}

/// Parses and validates in one step; `default_seed` applies when the file
/// sets none.
pub fn load_plan(text: &str, default_seed: u64) -> Result<Plan, ConfigError> {
    let config = parse_config(text)?;
    config.plan(default_seed).map_err(|e| e.locate(text))
}

fn build_state(
    space: &FactorSpace,
    state: &StateConfig,
    seed: u64,
    warnings: &mut Vec<String>,
) -> Result<PureState, ConfigError> {
    let dims = space.dims();
    match state {
        StateConfig::Bell {} => {
            if dims != [2, 2] {
                return Err(ConfigError::at(
                    "state.kind",
                    format!("bell needs space [2, 2], got {dims:?}"),
                ));
            }
            Ok(PureState::bell())
        }
        StateConfig::Ghz {} => {
            if dims.len() < 2 || dims.iter().any(|&d| d != 2) {
                return Err(ConfigError::at(
                    "state.kind",
                    format!("ghz needs at least two qubits, got {dims:?}"),
                ));
            }
            PureState::ghz(dims.len()).map_err(|e| ConfigError::at("state.kind", e))
        }
        StateConfig::Product { labels } => {
            if labels.len() != dims.len() {
                return Err(ConfigError::at(
                    "state.labels",
                    format!("expected {} labels, one per factor, got {}", dims.len(), labels.len()),
                ));
            }
            PureState::basis(space.clone(), labels).map_err(|e| ConfigError::at("state.labels", e))
        }
        StateConfig::Random {} => Ok(PureState::random(
            space.clone(),
            &mut RandomStream::new(seed, STATE_STREAM, 0),
        )),
        StateConfig::Explicit { amplitudes } => {
            if amplitudes.len() != space.total_dim() {
                return Err(ConfigError::at(
                    "state.amplitudes",
                    format!(
                        "length {} does not match the space dimension {}",
                        amplitudes.len(),
                        space.total_dim()
                    ),
                ));
            }
            let v = CVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|a| a.value()));
            let norm = v.norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(ConfigError::at("state.amplitudes", "amplitudes have no usable norm"));
            }
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                warnings.push(format!(
                    "state.amplitudes has norm {norm}; renormalised to 1"
                ));
            }
            PureState::normalized(space.clone(), v).map_err(|e| ConfigError::at("state.amplitudes", e))
        }
    }
}

impl RunConfig {
    /// Checks every invariant and builds the state and action.
    pub fn plan(&self, default_seed: u64) -> Result<Plan, ConfigError> {
        let seed = self.seed.unwrap_or(default_seed);
        let mut warnings = Vec::new();
        let space = match &self.space {
            Some(dims) => Some(
                FactorSpace::new(dims.clone()).map_err(|e| ConfigError::at("space", e))?,
            ),
            None => None,
        };
        let state = match (&self.state, &space) {
            (Some(s), Some(sp)) => Some(build_state(sp, s, seed, &mut warnings)?),
            (Some(StateConfig::Bell {}), None) => Some(PureState::bell()),
            (Some(_), None) => {
                return Err(ConfigError::at("space", "missing required key for this state"))
            }
            (None, _) => None,
        };
        let action = match &self.action {
            ActionConfig::Device {
                target,
                repetitions,
                device,
            } => {
                let Some(psi) = &state else {
                    return Err(ConfigError::at("state", "device actions need a state"));
                };
                if *repetitions < 1 {
                    return Err(ConfigError::at("action.repetitions", "must be at least 1"));
                }
                let target = psi
                    .space()
                    .validate_selection(target, true)
                    .map_err(|e| ConfigError::at("action.target", e))?;
                let target_dim = psi.space().selection_dim(&target);
                let built = DeviceRegistry::with_catalog()
                    .build_for(device, target_dim)
                    .map_err(|e| ConfigError::at("action.device", e))?;
                Action::Device {
                    spec: device.clone(),
                    device: built,
                    target,
                    repetitions: *repetitions,
                }
            }
            ActionConfig::Experiment { id, params } => {
                let experiment = ExperimentRegistry::with_catalog()
                    .get(id)
                    .map_err(|e| ConfigError::at("action.id", e))?;
                params
                    .validate(id, &experiment.parameters())
                    .map_err(|e| ConfigError::at("action.params", e))?;
                Action::Experiment {
                    experiment,
                    params: params.clone(),
                }
            }
            ActionConfig::Check { check, params } => {
                params
                    .validate(check.name(), &check_parameters(*check))
                    .map_err(|e| ConfigError::at("action.params", e))?;
                Action::Check {
                    check: *check,
                    params: params.clone(),
                }
            }
        };
        Ok(Plan {
            seed,
            state,
            action,
            output: self.output.clone(),
            warnings,
        })
    }
}
