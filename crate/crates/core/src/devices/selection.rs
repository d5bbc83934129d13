use super::readout::check_dim;
use super::{Device, DeviceKind, Outcome, OutcomeDistribution};
use crate::error::{QsimError, Result};
use crate::qcore::{reduced_state, DensityMatrix, OrthonormalBasis, PureState, RandomStream};

/// Basis weights closer than this tie for the maximum.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// `1 / (1 + e^{-x})`, stable for large `|x|`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn bit_distribution(p_one: f64) -> OutcomeDistribution {
    OutcomeDistribution::new(vec![(Outcome::Bit(1), p_one), (Outcome::Bit(0), 1.0 - p_one)])
}

fn check_sharpness(k: Option<f64>) -> Result<()> {
    match k {
        Some(k) if !(k > 0.0 && k.is_finite()) => {
            Err(QsimError::OutOfRange(format!("sharpness {k} must be positive")))
        }
        _ => Ok(()),
    }
}

fn overlap_distribution(
    rho: &DensityMatrix,
    phi: &PureState,
    threshold: f64,
    sharpness: Option<f64>,
) -> Result<OutcomeDistribution> {
    check_dim(rho.dim(), phi.dim())?;
    let v = phi.amplitudes();
    let w = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
    Ok(match sharpness {
        None => OutcomeDistribution::certain(Outcome::Bit(u8::from(w > threshold))),
        Some(k) => bit_distribution(logistic(k * (w - threshold))),
    })
}

/// SOD (hard) or SSOD (with sharpness `k`) on `⟨φ|ρ₁|φ⟩` against `a`.
pub fn overlap_test(
    global: &PureState,
    target: &[usize],
    phi: &PureState,
    threshold: f64,
    sharpness: Option<f64>,
    rng: &mut RandomStream,
) -> Result<Outcome> {
    OverlapTest::new(phi.clone(), threshold, sharpness)?.measure(global, target, rng)
}

fn basis_distribution(
    rho: &DensityMatrix,
    basis: &OrthonormalBasis,
    sharpness: Option<f64>,
) -> Result<OutcomeDistribution> {
    check_dim(rho.dim(), basis.dim())?;
    let weights: Vec<f64> = (0..basis.dim())
        .map(|i| {
            let v = basis.vector(i);
            (v.adjoint() * rho.matrix() * &v)[(0, 0)].re
        })
        .collect();
    let probs: Vec<f64> = match sharpness {
        None => {
            let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ties: Vec<bool> = weights.iter().map(|&w| max - w < TIE_TOLERANCE).collect();
            let n = ties.iter().filter(|&&t| t).count() as f64;
            ties.iter().map(|&t| if t { 1.0 / n } else { 0.0 }).collect()
        }
        Some(k) => {
            let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = weights.iter().map(|&w| (k * (w - max)).exp()).collect();
            let z: f64 = e.iter().sum();
            e.iter().map(|x| x / z).collect()
        }
    };
    Ok(OutcomeDistribution::new(
        probs
            .into_iter()
            .enumerate()
            .map(|(i, p)| (Outcome::Label(i as i64), p))
            .collect(),
    ))
}

/// BSD (hard, uniform tie-break) or SBSD (softmax with sharpness `k`) over the
/// basis weights `⟨φ_i|ρ₁|φ_i⟩`; labels are 0-based basis positions.
pub fn basis_select(
    global: &PureState,
    target: &[usize],
    basis: &OrthonormalBasis,
    sharpness: Option<f64>,
    rng: &mut RandomStream,
) -> Result<Outcome> {
    BasisSelect::new(basis.clone(), sharpness)?.measure(global, target, rng)
}

/// State overlap device (SOD; SSOD when `sharpness` is set).
#[derive(Debug, Clone)]
pub struct OverlapTest {
    pub state: PureState,
    pub threshold: f64,
    pub sharpness: Option<f64>,
}

impl OverlapTest {
    pub fn new(state: PureState, threshold: f64, sharpness: Option<f64>) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(QsimError::OutOfRange(format!(
                "overlap threshold {threshold} must lie in (0, 1)"
            )));
        }
        check_sharpness(sharpness)?;
        Ok(Self {
            state,
            threshold,
            sharpness,
        })
    }
}

impl Device for OverlapTest {
    fn kind(&self) -> DeviceKind {
        DeviceKind::OverlapTest
    }

    fn label(&self) -> String {
        match self.sharpness {
            Some(k) => format!("SSOD(a={},k={k})", self.threshold),
            None => format!("SOD(a={})", self.threshold),
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        overlap_distribution(
            &reduced_state(global, target)?,
            &self.state,
            self.threshold,
            self.sharpness,
        )
    }

    fn outcome_set(&self, _target_dim: usize) -> Option<Vec<Outcome>> {
        Some(vec![Outcome::Bit(0), Outcome::Bit(1)])
    }
}

/// Basis selection device (BSD; SBSD when `sharpness` is set).
#[derive(Debug, Clone)]
pub struct BasisSelect {
    pub basis: OrthonormalBasis,
    pub sharpness: Option<f64>,
}

impl BasisSelect {
    pub fn new(basis: OrthonormalBasis, sharpness: Option<f64>) -> Result<Self> {
        check_sharpness(sharpness)?;
        Ok(Self { basis, sharpness })
    }
}

impl Device for BasisSelect {
    fn kind(&self) -> DeviceKind {
        DeviceKind::BasisSelect
    }

    fn label(&self) -> String {
        match self.sharpness {
            Some(k) => format!("SBSD(k={k})"),
            None => "BSD".into(),
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        basis_distribution(&reduced_state(global, target)?, &self.basis, self.sharpness)
    }

    fn outcome_set(&self, target_dim: usize) -> Option<Vec<Outcome>> {
        Some((0..target_dim as i64).map(Outcome::Label).collect())
    }
}
