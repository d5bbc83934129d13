use super::{Device, DeviceKind, Outcome, OutcomeDistribution};
use crate::error::{QsimError, Result};
use crate::qcore::{
    quantize, quantize_matrix, reduced_state, CMatrix, DensityMatrix, HermitianObservable,
    OrthonormalBasis, PureState,
};

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(QsimError::DimensionMismatch { expected, found })
    }
}

pub(crate) fn precision_suffix(m: Option<u32>) -> String {
    m.map(|m| format!("m={m}")).unwrap_or_default()
}

fn describe(entries: CMatrix, basis: Option<&OrthonormalBasis>, m: Option<u32>) -> Outcome {
    let expressed = match basis {
        Some(b) => b.express(&entries),
        None => entries,
    };
    let entries = match m {
        Some(bits) => quantize_matrix(&expressed, bits),
        None => expressed,
    };
    Outcome::Matrix {
        entries,
        precision: m,
    }
}

fn reduced_for_basis(
    global: &PureState,
    target: &[usize],
    basis: Option<&OrthonormalBasis>,
) -> Result<DensityMatrix> {
    let rho = reduced_state(global, target)?;
    if let Some(b) = basis {
        check_dim(rho.dim(), b.dim())?;
    }
    Ok(rho)
}

/// Reduced density matrix of `target` in `basis` (computational when `None`),
/// quantized to `2^-m` when `m` is given.
pub fn readout_density(
    global: &PureState,
    target: &[usize],
    basis: Option<&OrthonormalBasis>,
    m: Option<u32>,
) -> Result<Outcome> {
    let rho = reduced_for_basis(global, target, basis)?;
    Ok(describe(rho.into_matrix(), basis, m))
}

/// Matrix functions available to the function readout device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFunction {
    Identity,
    /// `ρ^n`, `n ≥ 1`.
    Power(u32),
}

impl MatrixFunction {
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        match *self {
            MatrixFunction::Identity => rho.clone(),
            MatrixFunction::Power(n) => {
                let mut out = rho.clone();
                for _ in 1..n {
                    out = &out * rho;
                }
                out
            }
        }
    }
}

/// `f(ρ₁)` in `basis`, quantized when `m` is given.
pub fn function_readout(
    global: &PureState,
    target: &[usize],
    f: MatrixFunction,
    basis: Option<&OrthonormalBasis>,
    m: Option<u32>,
) -> Result<Outcome> {
    if f == MatrixFunction::Power(0) {
        return Err(QsimError::OutOfRange("matrix power must be at least 1".into()));
    }
    let rho = reduced_for_basis(global, target, basis)?;
    Ok(describe(f.apply(rho.matrix()), basis, m))
}

/// `Tr(A ρ₁)`, quantized when `m` is given.
pub fn expectation_readout(
    global: &PureState,
    target: &[usize],
    observable: &HermitianObservable,
    m: Option<u32>,
) -> Result<Outcome> {
    let rho = reduced_state(global, target)?;
    check_dim(rho.dim(), observable.dim())?;
    let value = rho.expectation(observable.matrix()).re;
    Ok(Outcome::Real(match m {
        Some(bits) => quantize(value, bits),
        None => value,
    }))
}

/// State readout device (RD; FPRD when `precision` is set).
#[derive(Debug, Clone)]
pub struct Readout {
    pub basis: Option<OrthonormalBasis>,
    pub precision: Option<u32>,
}

impl Device for Readout {
    fn kind(&self) -> DeviceKind {
        DeviceKind::Readout
    }

    fn label(&self) -> String {
        match self.precision {
            Some(m) => format!("FPRD(m={m})"),
            None => "RD".into(),
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        readout_density(global, target, self.basis.as_ref(), self.precision)
            .map(OutcomeDistribution::certain)
    }
}

/// State function readout device (FRD; FFRD when `precision` is set).
#[derive(Debug, Clone)]
pub struct FunctionReadout {
    pub function: MatrixFunction,
    pub basis: Option<OrthonormalBasis>,
    pub precision: Option<u32>,
}

impl Device for FunctionReadout {
    fn kind(&self) -> DeviceKind {
        DeviceKind::FunctionReadout
    }

    fn label(&self) -> String {
        let f = match self.function {
            MatrixFunction::Identity => "id".to_string(),
            MatrixFunction::Power(n) => format!("pow{n}"),
        };
        match self.precision {
            Some(m) => format!("FFRD({f},m={m})"),
            None => format!("FRD({f})"),
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        function_readout(global, target, self.function, self.basis.as_ref(), self.precision)
            .map(OutcomeDistribution::certain)
    }
}

/// Expectation value readout device (ERD; FERD when `precision` is set).
#[derive(Debug, Clone)]
pub struct ExpectationReadout {
    pub observable: HermitianObservable,
    pub precision: Option<u32>,
}

impl Device for ExpectationReadout {
    fn kind(&self) -> DeviceKind {
        DeviceKind::ExpectationReadout
    }

    fn label(&self) -> String {
        match self.precision {
            Some(m) => format!("FERD(m={m})"),
            None => "ERD".into(),
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        expectation_readout(global, target, &self.observable, self.precision)
            .map(OutcomeDistribution::certain)
    }
}
