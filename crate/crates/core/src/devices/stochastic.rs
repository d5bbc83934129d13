use super::readout::{check_dim, precision_suffix};
use super::{Device, DeviceKind, Outcome, OutcomeDistribution};
use crate::error::{QsimError, Result};
use crate::qcore::linalg::trace_product;
use crate::qcore::{
    born_probabilities, quantize, reduced_state, DensityMatrix, HermitianObservable, PovmSet,
    PureState, RandomStream,
};

/// How an eigenvalue sampler reports the drawn eigenspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenVariant {
    /// The eigenvalue itself (SEVRD), quantized when `precision` is set (FSEVRD).
    Value { precision: Option<u32> },
    /// Ascending 0-based label plus `offset` (ISEVRD).
    IntegerLabel { offset: i64 },
    /// Labels with `|label| ≤ bound`, overflow otherwise (FISEVRD).
    Finite { bound: u32, offset: i64 },
    /// Bit output for a state projector `P_φ` (SPRD).
    StateProjection,
}

fn cluster_probabilities(rho: &DensityMatrix, observable: &HermitianObservable) -> Result<Vec<f64>> {
    check_dim(rho.dim(), observable.dim())?;
    Ok(observable
        .clusters()
        .iter()
        .map(|c| trace_product(&c.projector, rho.matrix()).re.max(0.0))
        .collect())
}

fn with_overflow(mut entries: Vec<(Outcome, f64)>) -> OutcomeDistribution {
    let kept: f64 = entries.iter().map(|(_, p)| p).sum();
    let excluded = (1.0 - kept).max(0.0);
    if excluded > 0.0 {
        entries.push((
            Outcome::Overflow {
                excluded_mass: excluded,
            },
            excluded,
        ));
    }
    OutcomeDistribution::new(entries)
}

fn eigen_distribution(
    rho: &DensityMatrix,
    observable: &HermitianObservable,
    variant: EigenVariant,
) -> Result<OutcomeDistribution> {
    let probs = cluster_probabilities(rho, observable)?;
    let clusters = observable.clusters();
    let dist = match variant {
        EigenVariant::Value { precision } => OutcomeDistribution::new(
            clusters
                .iter()
                .zip(&probs)
                .map(|(c, &p)| {
                    let v = precision.map_or(c.value, |m| quantize(c.value, m));
                    (Outcome::Real(v), p)
                })
                .collect(),
        ),
        EigenVariant::IntegerLabel { offset } => OutcomeDistribution::new(
            probs
                .iter()
                .enumerate()
                .map(|(i, &p)| (Outcome::Label(i as i64 + offset), p))
                .collect(),
        ),
        EigenVariant::Finite { bound, offset } => with_overflow(
            probs
                .iter()
                .enumerate()
                .map(|(i, &p)| (i as i64 + offset, p))
                .filter(|(label, _)| label.unsigned_abs() <= u64::from(bound))
                .map(|(label, p)| (Outcome::Label(label), p))
                .collect(),
        ),
        EigenVariant::StateProjection => OutcomeDistribution::new(
            clusters
                .iter()
                .zip(&probs)
                .map(|(c, &p)| (Outcome::Bit(u8::from(c.value > 0.5)), p))
                .collect(),
        ),
    };
    Ok(dist)
}

/// Draws an eigenspace of `A` with probability `Tr(P_i ρ₁)` and reports it
/// according to `variant`. The global state is not modified.
pub fn sample_eigenvalue(
    global: &PureState,
    target: &[usize],
    observable: &HermitianObservable,
    variant: EigenVariant,
    rng: &mut RandomStream,
) -> Result<Outcome> {
    let rho = reduced_state(global, target)?;
    Ok(eigen_distribution(&rho, observable, variant)?.sample(rng))
}

fn uncertainty_distribution(
    rho: &DensityMatrix,
    observable: &HermitianObservable,
    precision: Option<u32>,
) -> Result<OutcomeDistribution> {
    let probs = cluster_probabilities(rho, observable)?;
    // the shift itself is never quantized
    let mean = rho.expectation(observable.matrix()).re;
    Ok(OutcomeDistribution::new(
        observable
            .clusters()
            .iter()
            .zip(&probs)
            .map(|(c, &p)| {
                let v = c.value - mean;
                (Outcome::Real(precision.map_or(v, |m| quantize(v, m))), p)
            })
            .collect(),
    ))
}

/// Eigenvalue of `A − ⟨A⟩` drawn with the Born probabilities of `A`.
pub fn sample_uncertainty(
    global: &PureState,
    target: &[usize],
    observable: &HermitianObservable,
    precision: Option<u32>,
    rng: &mut RandomStream,
) -> Result<Outcome> {
    let rho = reduced_state(global, target)?;
    Ok(uncertainty_distribution(&rho, observable, precision)?.sample(rng))
}

fn povm_distribution(
    rho: &DensityMatrix,
    povm: &PovmSet,
    finite_bound: Option<u32>,
) -> Result<OutcomeDistribution> {
    let probs = born_probabilities(rho, povm)?;
    let labelled = probs.iter().enumerate().map(|(i, &p)| (i as i64 + 1, p));
    Ok(match finite_bound {
        None => OutcomeDistribution::new(labelled.map(|(l, p)| (Outcome::Label(l), p)).collect()),
        Some(m) => with_overflow(
            labelled
                .filter(|&(l, _)| l <= i64::from(m))
                .map(|(l, p)| (Outcome::Label(l), p))
                .collect(),
        ),
    })
}

/// Label `i` (1-based) with probability `Tr(A_i ρ₁)`; with `finite_bound`
/// labels above the bound become an overflow code.
pub fn sample_povm(
    global: &PureState,
    target: &[usize],
    povm: &PovmSet,
    finite_bound: Option<u32>,
    rng: &mut RandomStream,
) -> Result<Outcome> {
    let rho = reduced_state(global, target)?;
    Ok(povm_distribution(&rho, povm, finite_bound)?.sample(rng))
}

/// Stochastic eigenvalue readout device family (SEVRD, FSEVRD, ISEVRD,
/// FISEVRD, SPRD).
#[derive(Debug, Clone)]
pub struct EigenvalueSampler {
    pub observable: HermitianObservable,
    pub variant: EigenVariant,
}

impl EigenvalueSampler {
    /// SPRD for the projector onto `phi`.
    pub fn state_projection(phi: &PureState) -> Self {
        Self {
            observable: HermitianObservable::state_projector(phi),
            variant: EigenVariant::StateProjection,
        }
    }
}

impl Device for EigenvalueSampler {
    fn kind(&self) -> DeviceKind {
        DeviceKind::EigenvalueSampler
    }

    fn label(&self) -> String {
        match self.variant {
            EigenVariant::Value { precision: None } => "SEVRD".into(),
            EigenVariant::Value { precision: Some(m) } => format!("FSEVRD(m={m})"),
            EigenVariant::IntegerLabel { offset } => format!("ISEVRD(offset={offset})"),
            EigenVariant::Finite { bound, offset } => format!("FISEVRD(m={bound},offset={offset})"),
            EigenVariant::StateProjection => "SPRD".into(),
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        eigen_distribution(&reduced_state(global, target)?, &self.observable, self.variant)
    }

    fn outcome_set(&self, target_dim: usize) -> Option<Vec<Outcome>> {
        if target_dim != self.observable.dim() {
            return None;
        }
        let clusters = self.observable.clusters();
        let set = match self.variant {
            EigenVariant::Value { precision } => {
                let mut v: Vec<Outcome> = clusters
                    .iter()
                    .map(|c| Outcome::Real(precision.map_or(c.value, |m| quantize(c.value, m))))
                    .collect();
                // close eigenvalues can share one quantized value
                v.dedup_by(|a, b| a.matches(b));
                v
            }
            EigenVariant::IntegerLabel { offset } => (0..clusters.len())
                .map(|i| Outcome::Label(i as i64 + offset))
                .collect(),
            EigenVariant::Finite { bound, offset } => {
                let mut v: Vec<Outcome> = (0..clusters.len())
                    .map(|i| i as i64 + offset)
                    .filter(|l| l.unsigned_abs() <= u64::from(bound))
                    .map(Outcome::Label)
                    .collect();
                v.push(Outcome::Overflow { excluded_mass: 0.0 });
                v
            }
            EigenVariant::StateProjection => vec![Outcome::Bit(0), Outcome::Bit(1)],
        };
        Some(set)
    }
}

/// Stochastic uncertainty readout device (SURD; FSURD when `precision` is set).
#[derive(Debug, Clone)]
pub struct UncertaintySampler {
    pub observable: HermitianObservable,
    pub precision: Option<u32>,
}

impl Device for UncertaintySampler {
    fn kind(&self) -> DeviceKind {
        DeviceKind::UncertaintySampler
    }

    fn label(&self) -> String {
        match self.precision {
            Some(_) => format!("FSURD({})", precision_suffix(self.precision)),
            None => "SURD".into(),
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        uncertainty_distribution(&reduced_state(global, target)?, &self.observable, self.precision)
    }
}

/// Stochastic positive operator device (SPOD; FSPOD with `finite_bound`).
#[derive(Debug, Clone)]
pub struct PovmSampler {
    pub povm: PovmSet,
    pub finite_bound: Option<u32>,
}

impl PovmSampler {
    pub fn new(povm: PovmSet, finite_bound: Option<u32>) -> Result<Self> {
        if finite_bound == Some(0) {
            return Err(QsimError::OutOfRange("overflow bound must be positive".into()));
        }
        Ok(Self { povm, finite_bound })
    }
}

impl Device for PovmSampler {
    fn kind(&self) -> DeviceKind {
        DeviceKind::PovmSampler
    }

    fn label(&self) -> String {
        match self.finite_bound {
            Some(m) => format!("FSPOD(m={m})"),
            None => "SPOD".into(),
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        povm_distribution(&reduced_state(global, target)?, &self.povm, self.finite_bound)
    }

    fn outcome_set(&self, target_dim: usize) -> Option<Vec<Outcome>> {
        if target_dim != self.povm.dim() {
            return None;
        }
        let n = self.povm.len() as i64;
        let top = self.finite_bound.map_or(n, |m| n.min(i64::from(m)));
        let mut v: Vec<Outcome> = (1..=top).map(Outcome::Label).collect();
        if self.finite_bound.is_some() {
            v.push(Outcome::Overflow { excluded_mass: 0.0 });
        }
        Some(v)
    }
}
