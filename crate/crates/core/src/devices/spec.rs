use serde::{Deserialize, Serialize};

use crate::error::{QsimError, Result};
use crate::qcore::linalg::{c, fourier, hadamard, identity, pauli_x, pauli_y, pauli_z};
use crate::qcore::{CMatrix, CVector, FactorSpace, OrthonormalBasis, PureState, C64};

/// A complex number in configuration files: a bare real or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexEntry {
    pub fn value(self) -> C64 {
        match self {
            ComplexEntry::Real(re) => c(re, 0.0),
            ComplexEntry::Pair([re, im]) => c(re, im),
        }
    }

    pub fn from_complex(z: C64) -> Self {
        if z.im == 0.0 {
            ComplexEntry::Real(z.re)
        } else {
            ComplexEntry::Pair([z.re, z.im])
        }
    }
}

pub(crate) fn complex_vector(entries: &[ComplexEntry]) -> CVector {
    CVector::from_iterator(entries.len(), entries.iter().map(|e| e.value()))
}

/// A matrix parameter: a catalog name or explicit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Rows(Vec<Vec<ComplexEntry>>),
}

impl MatrixSpec {
    /// Named matrices: `pauli_x`, `pauli_y`, `pauli_z`, `hadamard`,
    /// `identity`, `half_identity`, `zero` and `proj0`/`proj1` (qubit
    /// projectors). `identity`, `half_identity` and `zero` use `dim`.
    pub fn resolve(&self, dim: usize) -> Result<CMatrix> {
        match self {
            MatrixSpec::Named(name) => match name.as_str() {
                "pauli_x" => Ok(pauli_x()),
                "pauli_y" => Ok(pauli_y()),
                "pauli_z" => Ok(pauli_z()),
                "hadamard" => Ok(hadamard()),
                "identity" => Ok(identity(dim)),
                "half_identity" => Ok(identity(dim).scale(0.5)),
                "zero" => Ok(CMatrix::zeros(dim, dim)),
                "proj0" => Ok(CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])),
                "proj1" => Ok(CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])),
                _ => Err(QsimError::Unknown {
                    kind: "matrix",
                    name: name.clone(),
                }),
            },
            MatrixSpec::Rows(rows) => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err(QsimError::InvalidParameters(format!(
                        "matrix rows must form a non-empty square array (got {n} rows)"
                    )));
                }
                Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j].value()))
            }
        }
    }

    pub fn from_matrix(m: &CMatrix) -> Self {
        MatrixSpec::Rows(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| ComplexEntry::from_complex(m[(i, j)])).collect())
                .collect(),
        )
    }
}

/// A basis parameter: a catalog name or an explicit list of vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisSpec {
    Named(String),
    Vectors(Vec<Vec<ComplexEntry>>),
}

impl BasisSpec {
    /// Named bases: `computational` and `fourier` (dimension `dim`),
    /// `hadamard` and `circular` (qubit only).
    pub fn resolve(&self, dim: usize) -> Result<OrthonormalBasis> {
        match self {
            BasisSpec::Named(name) => match name.as_str() {
                "computational" => Ok(OrthonormalBasis::computational(dim)),
                "fourier" => OrthonormalBasis::from_unitary(fourier(dim)),
                "hadamard" => OrthonormalBasis::from_unitary(hadamard()),
                "circular" => {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    OrthonormalBasis::from_unitary(CMatrix::from_row_slice(
                        2,
                        2,
                        &[c(s, 0.0), c(s, 0.0), c(0.0, s), c(0.0, -s)],
                    ))
                }
                _ => Err(QsimError::Unknown {
                    kind: "basis",
                    name: name.clone(),
                }),
            },
            BasisSpec::Vectors(vectors) => {
                let vs: Vec<CVector> = vectors.iter().map(|v| complex_vector(v)).collect();
                OrthonormalBasis::from_vectors(&vs)
            }
        }
    }
}

/// Classical inputs of one catalog device, as read from a configuration file.
///
/// Only the keys relevant to `kind` may be present; the registry rejects the
/// rest so that a misspelled or misplaced setting never goes unnoticed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub kind: String,
    /// Dimension used to resolve named matrices and bases (default 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm: Option<Vec<MatrixSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_state: Option<Vec<ComplexEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sharpness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_threshold: Option<f64>,
    /// Eigenvalue sampler variant: `value`, `integer_label`, `finite` or
    /// `state_projection`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_offset: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overflow_bound: Option<u32>,
    /// Matrix function for function readouts: `identity` or `power`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<u32>,
}

impl DeviceSpec {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            ..Self::default()
        }
    }

    /// Names of the optional keys that are set.
    pub fn present_keys(&self) -> Vec<&'static str> {
        let flags = [
            ("dim", self.dim.is_some()),
            ("basis", self.basis.is_some()),
            ("observable", self.observable.is_some()),
            ("povm", self.povm.is_some()),
            ("target_state", self.target_state.is_some()),
            ("threshold", self.threshold.is_some()),
            ("sharpness", self.sharpness.is_some()),
            ("precision", self.precision.is_some()),
            ("alpha", self.alpha.is_some()),
            ("entropy_threshold", self.entropy_threshold.is_some()),
            ("variant", self.variant.is_some()),
            ("label_offset", self.label_offset.is_some()),
            ("overflow_bound", self.overflow_bound.is_some()),
            ("function", self.function.is_some()),
            ("power", self.power.is_some()),
        ];
        flags.iter().filter(|(_, set)| *set).map(|(k, _)| *k).collect()
    }

    /// Fails when a key outside `allowed` is set.
    pub fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.present_keys().into_iter().find(|k| !allowed.contains(k)) {
            Some(k) => Err(QsimError::InvalidParameters(format!(
                "key `{k}` does not apply to device kind {}",
                self.kind
            ))),
            None => Ok(()),
        }
    }

    pub(crate) fn require<'a, T>(&self, value: &'a Option<T>, key: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| {
            QsimError::InvalidParameters(format!("device kind {} requires `{key}`", self.kind))
        })
    }

    pub(crate) fn named_dim(&self) -> usize {
        self.dim.unwrap_or(2)
    }

    pub(crate) fn target_pure_state(&self) -> Result<PureState> {
        let amps = self.require(&self.target_state, "target_state")?;
        let v = complex_vector(amps);
        PureState::from_vector(FactorSpace::single(v.len())?, v)
    }
}
