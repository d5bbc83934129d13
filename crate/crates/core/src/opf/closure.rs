use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::function::{mix, opf_from_quantum, FullMeasurement, Opf};
use crate::devices::{Device, EntropyMeter};
use crate::error::Result;
use crate::qcore::linalg::{
    hermitian_eigenvalues, hermitian_function, max_abs_diff, random_unitary, standard_complex,
    symmetrize,
};
use crate::qcore::{CMatrix, FactorSpace, PureState, RandomStream};

/// A family of full measurements defined on every factor space.
pub trait MeasurementFamily: Send + Sync {
    fn name(&self) -> String;

    /// A member of the family on `space`; parametrised families draw the
    /// parameters from `rng`.
    fn measurement(&self, space: &FactorSpace, rng: &mut RandomStream) -> Result<FullMeasurement>;

    /// How far `m` is from the family, when membership can be decided.
    fn membership_violation(&self, _m: &FullMeasurement) -> Option<f64> {
        None
    }
}

/// Random `n`-outcome POVMs.
#[derive(Debug, Clone)]
pub struct QuantumPovmFamily {
    pub outcomes: usize,
}

impl QuantumPovmFamily {
    /// `E_i = S^{-1/2} G_i G_i† S^{-1/2}` with complex Gaussian `G_i`.
    pub fn random_povm(&self, d: usize, rng: &mut RandomStream) -> Vec<CMatrix> {
        let raw: Vec<CMatrix> = (0..self.outcomes.max(1))
            .map(|_| {
                let g = CMatrix::from_fn(d, d, |_, _| standard_complex(rng));
                &g * g.adjoint()
            })
            .collect();
        let total = raw.iter().fold(CMatrix::zeros(d, d), |a, b| a + b);
        let inv_sqrt = hermitian_function(&total, |x| 1.0 / x.max(1e-300).sqrt());
        raw.iter().map(|a| symmetrize(&(&inv_sqrt * a * &inv_sqrt))).collect()
    }
}

impl MeasurementFamily for QuantumPovmFamily {
    fn name(&self) -> String {
        format!("quantum_povm(n={})", self.outcomes)
    }

    fn measurement(&self, space: &FactorSpace, rng: &mut RandomStream) -> Result<FullMeasurement> {
        let effects = self.random_povm(space.total_dim(), rng);
        FullMeasurement::new(
            effects
                .iter()
                .map(|e| opf_from_quantum(space.clone(), e))
                .collect::<Result<_>>()?,
        )
    }

    fn membership_violation(&self, m: &FullMeasurement) -> Option<f64> {
        let d = m.space().total_dim();
        let mut worst: f64 = 0.0;
        let mut sum = CMatrix::zeros(d, d);
        for f in m.outcomes() {
            let q = f.operator()?;
            let ev = hermitian_eigenvalues(q);
            worst = worst.max(-ev[0]).max(ev[d - 1] - 1.0);
            sum += q;
        }
        Some(worst.max(max_abs_diff(&sum, &CMatrix::identity(d, d))))
    }
}

/// Every outcome of one device reading fixed target factors.
#[derive(Debug, Clone)]
pub struct DeviceFamily {
    pub device: Arc<dyn Device>,
    pub target: Vec<usize>,
}

impl DeviceFamily {
    pub fn new(device: Arc<dyn Device>, target: Vec<usize>) -> Self {
        Self { device, target }
    }

    /// Finite-precision von Neumann meter on the first factor.
    pub fn fpvnem(m: u32) -> Self {
        Self::new(Arc::new(EntropyMeter::fpvnem(m)), vec![0])
    }
}

impl MeasurementFamily for DeviceFamily {
    fn name(&self) -> String {
        format!("{} on {:?}", self.device.label(), self.target)
    }

    fn measurement(&self, space: &FactorSpace, _rng: &mut RandomStream) -> Result<FullMeasurement> {
        FullMeasurement::from_device(self.device.clone(), space.clone(), &self.target)
    }
}

/// Another family with every OPF multiplied by `factor`; used to check that
/// the checker notices broken completeness.
pub struct ScaledFamily {
    pub inner: Box<dyn MeasurementFamily>,
    pub factor: f64,
}

impl MeasurementFamily for ScaledFamily {
    fn name(&self) -> String {
        format!("{} scaled by {}", self.inner.name(), self.factor)
    }

    fn measurement(&self, space: &FactorSpace, rng: &mut RandomStream) -> Result<FullMeasurement> {
        let base = self.inner.measurement(space, rng)?;
        let zero = Opf::constant(space.clone(), 0.0)?;
        FullMeasurement::new(
            base.outcomes()
                .iter()
                .map(|f| mix(&[f.clone(), zero.clone()], &[self.factor, 1.0 - self.factor]))
                .collect::<Result<_>>()?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosureConfig {
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            tolerance: 1e-8,
        }
    }
}

/// Worst violations found by [`check_closure`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureReport {
    pub family: String,
    pub samples: usize,
    pub tolerance: f64,
    /// `|Σ f_i − 1|` for a family member.
    pub completeness: f64,
    /// Largest excursion of any OPF value outside `[0, 1]`.
    pub range: f64,
    /// Completeness or membership failure of an outcome-wise mixture.
    pub mixture: f64,
    /// Same after composing with a random unitary.
    pub unitary: f64,
    /// Same after attaching and fixing a random background system.
    pub system: f64,
    pub max_violation: f64,
}

impl ClosureReport {
    pub fn passed(&self) -> bool {
        self.max_violation <= self.tolerance
    }
}

fn assess(
    family: &dyn MeasurementFamily,
    m: &FullMeasurement,
    samples: usize,
    stream: &RandomStream,
) -> Result<(f64, f64)> {
    let (complete, range) = m.sampled_violations(samples, stream)?;
    let member = family.membership_violation(m).unwrap_or(0.0);
    Ok((complete.max(member), range))
}

/// Samples completeness and the three closure properties for `family` on
/// `space`, using `background` as the attached system for the third.
pub fn check_closure(
    family: &dyn MeasurementFamily,
    space: &FactorSpace,
    background: &FactorSpace,
    config: ClosureConfig,
    rng: &mut RandomStream,
) -> Result<ClosureReport> {
    let samples = config.samples.max(1);
    let base = family.measurement(space, &mut rng.fork("base"))?;
    let other = family.measurement(space, &mut rng.fork("other"))?;
    let p: f64 = rng.random_range(0.05..0.95);
    let u = random_unitary(space.total_dim(), rng);
    let big = family.measurement(&space.concat(background), &mut rng.fork("joint"))?;
    let phi = PureState::random(background.clone(), rng);

    let (completeness, r0) = assess(family, &base, samples, &rng.fork("base-samples"))?;
    let (mixture, r1) = assess(family, &base.mix_with(&other, p)?, samples, &rng.fork("mix-samples"))?;
    let (unitary, r2) = assess(family, &base.compose_unitary(&u)?, samples, &rng.fork("unitary-samples"))?;
    let (system, r3) = assess(family, &big.compose_system(&phi)?, samples, &rng.fork("system-samples"))?;
    let range = r0.max(r1).max(r2).max(r3);
    let max_violation = [completeness, range, mixture, unitary, system]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(ClosureReport {
        family: family.name(),
        samples,
        tolerance: config.tolerance,
        completeness,
        range,
        mixture,
        unitary,
        system,
        max_violation,
    })
}
