use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::basis::{from_hermitian_coordinates, hermitian_coordinates, least_squares};
use super::closure::QuantumPovmFamily;
use super::function::{opf_from_device, opf_from_quantum, readout_opf, Opf};
use crate::devices::{
    Device, EigenVariant, EigenvalueSampler, EntropyMeter, ExpectationReadout, Outcome,
    PovmSampler,
};
use crate::error::{QsimError, Result};
use crate::qcore::linalg::{c, fourier, max_abs_diff, outer, random_hermitian, random_unitary};
use crate::qcore::{
    CMatrix, Ensemble, FactorSpace, HermitianObservable, PovmSet, PureState, RandomStream,
};

/// Largest outcome list the readout check accepts.
pub const READOUT_LIST_CAP: usize = 64;
const MAX_DIM: usize = 4;
const ENSEMBLE_TRIALS: usize = 20;
const AGREEMENT_TOLERANCE: f64 = 1e-8;

/// Measurement families the estimation check knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimationFamily {
    QuantumPovm,
    Spod,
    ErdSevrd,
    EntropyMeter,
    Readout,
}

impl EstimationFamily {
    pub const ALL: [EstimationFamily; 5] = [
        EstimationFamily::QuantumPovm,
        EstimationFamily::Spod,
        EstimationFamily::ErdSevrd,
        EstimationFamily::EntropyMeter,
        EstimationFamily::Readout,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EstimationFamily::QuantumPovm => "quantum_povm",
            EstimationFamily::Spod => "spod",
            EstimationFamily::ErdSevrd => "erd_sevrd",
            EstimationFamily::EntropyMeter => "entropy_meter",
            EstimationFamily::Readout => "readout",
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.id() == id.replace('-', "_"))
            .ok_or_else(|| QsimError::Unknown {
                kind: "estimation family",
                name: id.into(),
            })
    }
}

impl fmt::Display for EstimationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssumptionVerdict {
    Satisfied,
    SatisfiedTrivially,
    Fails,
}

impl AssumptionVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            AssumptionVerdict::Satisfied => "SATISFIED",
            AssumptionVerdict::SatisfiedTrivially => "SATISFIED-TRIVIALLY",
            AssumptionVerdict::Fails => "FAILS",
        }
    }
}

impl fmt::Display for AssumptionVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two ensembles with one density matrix that a readout OPF tells apart
/// while every OPF of the supplied finite list agrees on them.
#[derive(Debug, Clone)]
pub struct ReadoutWitness {
    pub first: Ensemble,
    pub second: Ensemble,
    /// `φ` of the distinguishing readout OPF `f_φ`.
    pub probe: PureState,
    pub first_value: f64,
    pub second_value: f64,
    /// Max entry distance between the two density matrices.
    pub density_gap: f64,
    pub list_size: usize,
    /// Largest disagreement of a listed OPF between the two ensembles.
    pub list_disagreement: f64,
}

#[derive(Debug, Clone)]
pub struct EstimationCheck {
    pub family: EstimationFamily,
    pub dim: usize,
    pub verdict: AssumptionVerdict,
    /// Finite outcome list whose values fix every family OPF on ensembles.
    pub outcomes: Vec<Opf>,
    /// Worst entry error of the density matrix rebuilt from `outcomes`.
    pub reconstruction_error: f64,
    /// Worst error predicting other family OPFs from the rebuilt matrix.
    pub prediction_error: f64,
    pub witness: Option<ReadoutWitness>,
}

/// `d² − 1` rank-one projectors that, with the trace, determine a density
/// matrix: `|k⟩⟨k|` for `k < d−1`, then `(|j⟩+|k⟩)/√2` and `(|j⟩+i|k⟩)/√2`
/// for every `j < k`.
pub fn informationally_complete_projectors(d: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d - 1);
    for k in 0..d - 1 {
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = c(1.0, 0.0);
        out.push(m);
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut plus = nalgebra::DVector::zeros(d);
            plus[j] = c(s, 0.0);
            plus[k] = c(s, 0.0);
            out.push(outer(&plus));
            let mut imag = nalgebra::DVector::zeros(d);
            imag[j] = c(s, 0.0);
            imag[k] = c(0.0, s);
            out.push(outer(&imag));
        }
    }
    out
}

fn ensemble_value(f: &Opf, ens: &Ensemble) -> Result<f64> {
    ens.members().iter().map(|(s, w)| Ok(w * f.value(s)?)).sum()
}

/// Linear inversion from `Tr(P_i ρ) = v_i` and `Tr ρ = 1`.
pub fn linear_inversion(projectors: &[CMatrix], values: &[f64]) -> Result<CMatrix> {
    let d = projectors[0].nrows();
    let mut rows: Vec<DVector<f64>> = projectors.iter().map(hermitian_coordinates).collect();
    rows.push(hermitian_coordinates(&CMatrix::identity(d, d)));
    let a = DMatrix::from_fn(rows.len(), d * d, |i, j| rows[i][j]);
    let mut b: Vec<f64> = values.to_vec();
    b.push(1.0);
    let x = least_squares(a, &DVector::from_vec(b)).ok_or_else(|| {
        QsimError::InvalidParameters("projectors do not determine a density matrix".into())
    })?;
    Ok(from_hermitian_coordinates(&x, d))
}

fn random_ensemble(space: &FactorSpace, rng: &mut RandomStream) -> Result<Ensemble> {
    let n = rng.random_range(1..=4);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Ensemble::new(
        raw.into_iter()
            .map(|w| (PureState::random(space.clone(), rng), w / total))
            .collect(),
    )
}

fn family_outcomes(family: EstimationFamily, space: &FactorSpace) -> Result<Vec<Opf>> {
    let d = space.total_dim();
    informationally_complete_projectors(d)
        .into_iter()
        .map(|p| match family {
            EstimationFamily::QuantumPovm => opf_from_quantum(space.clone(), &p),
            EstimationFamily::Spod => {
                let povm = PovmSet::new(vec![p.clone(), CMatrix::identity(d, d) - &p])?;
                let dev: Arc<dyn Device> = Arc::new(PovmSampler::new(povm, None)?);
                opf_from_device(dev, space.clone(), &[0], Outcome::Label(1))
            }
            _ => {
                let dev: Arc<dyn Device> = Arc::new(EigenvalueSampler {
                    observable: HermitianObservable::new(p)?,
                    variant: EigenVariant::Value { precision: None },
                });
                opf_from_device(dev, space.clone(), &[0], Outcome::Real(1.0))
            }
        })
        .collect()
}

/// Errors predicting fresh family members on one ensemble from `rho`.
fn prediction_gap(
    family: EstimationFamily,
    space: &FactorSpace,
    ens: &Ensemble,
    rho: &CMatrix,
    rng: &mut RandomStream,
) -> Result<f64> {
    let d = space.total_dim();
    let tr = |m: &CMatrix| (m * rho).trace().re;
    let mut worst: f64 = 0.0;
    match family {
        EstimationFamily::QuantumPovm | EstimationFamily::Spod => {
            let povm = QuantumPovmFamily { outcomes: 3 }.random_povm(d, rng);
            let dev: Arc<dyn Device> = Arc::new(PovmSampler::new(PovmSet::new(povm.clone())?, None)?);
            for (i, e) in povm.iter().enumerate() {
                let f = match family {
                    EstimationFamily::Spod => {
                        opf_from_device(dev.clone(), space.clone(), &[0], Outcome::Label(i as i64 + 1))?
                    }
                    _ => opf_from_quantum(space.clone(), e)?,
                };
                worst = worst.max((ensemble_value(&f, ens)? - tr(e)).abs());
            }
        }
        _ => {
            let obs = HermitianObservable::new(random_hermitian(d, rng))?;
            let sevrd: Arc<dyn Device> = Arc::new(EigenvalueSampler {
                observable: obs.clone(),
                variant: EigenVariant::Value { precision: None },
            });
            for cluster in obs.clusters() {
                let f = opf_from_device(sevrd.clone(), space.clone(), &[0], Outcome::Real(cluster.value))?;
                worst = worst.max((ensemble_value(&f, ens)? - tr(&cluster.projector)).abs());
            }
            // the deterministic ERD output averaged over the ensemble
            let erd = ExpectationReadout {
                observable: obs.clone(),
                precision: None,
            };
            let mut mean = 0.0;
            for (s, w) in ens.members() {
                let out = erd.distribution(s, &[0])?.entries()[0].0.as_real().unwrap_or(f64::NAN);
                mean += w * out;
            }
            worst = worst.max((mean - tr(obs.matrix())).abs());
        }
    }
    Ok(worst)
}

fn check_linear_family(
    family: EstimationFamily,
    space: &FactorSpace,
    rng: &mut RandomStream,
) -> Result<EstimationCheck> {
    let outcomes = family_outcomes(family, space)?;
    let projectors = informationally_complete_projectors(space.total_dim());
    let mut reconstruction_error: f64 = 0.0;
    let mut prediction_error: f64 = 0.0;
    for _ in 0..ENSEMBLE_TRIALS {
        let ens = random_ensemble(space, rng)?;
        let values = outcomes
            .iter()
            .map(|f| ensemble_value(f, &ens))
            .collect::<Result<Vec<_>>>()?;
        let rho = linear_inversion(&projectors, &values)?;
        reconstruction_error =
            reconstruction_error.max(max_abs_diff(&rho, ens.density_matrix().matrix()));
        prediction_error = prediction_error.max(prediction_gap(family, space, &ens, &rho, rng)?);
    }
    let verdict = if reconstruction_error.max(prediction_error) < AGREEMENT_TOLERANCE {
        AssumptionVerdict::Satisfied
    } else {
        AssumptionVerdict::Fails
    };
    Ok(EstimationCheck {
        family,
        dim: space.total_dim(),
        verdict,
        outcomes,
        reconstruction_error,
        prediction_error,
        witness: None,
    })
}

fn check_entropy_family(space: &FactorSpace, rng: &mut RandomStream) -> Result<EstimationCheck> {
    let meters = [
        EntropyMeter::fpvnem(3),
        EntropyMeter::new(1.0, None)?,
        EntropyMeter::new(2.0, None)?,
        EntropyMeter::new(0.5, None)?,
    ];
    let mut worst: f64 = 0.0;
    for _ in 0..ENSEMBLE_TRIALS {
        let psi = PureState::random(space.clone(), rng);
        for m in &meters {
            let dist = m.distribution(&psi, &[0])?;
            let reading = dist.entries()[0].0.as_real().unwrap_or(f64::NAN);
            worst = worst.max(reading.abs()).max((dist.total() - 1.0).abs());
        }
    }
    let verdict = if worst < AGREEMENT_TOLERANCE {
        AssumptionVerdict::SatisfiedTrivially
    } else {
        AssumptionVerdict::Fails
    };
    Ok(EstimationCheck {
        family: EstimationFamily::EntropyMeter,
        dim: space.total_dim(),
        verdict,
        outcomes: Vec::new(),
        reconstruction_error: 0.0,
        prediction_error: worst,
        witness: None,
    })
}

fn check_readout_family(
    space: &FactorSpace,
    list: &[PureState],
    rng: &mut RandomStream,
) -> Result<EstimationCheck> {
    let d = space.total_dim();
    if list.len() > READOUT_LIST_CAP {
        return Err(QsimError::OutOfRange(format!(
            "outcome list of {} exceeds the cap of {READOUT_LIST_CAP}",
            list.len()
        )));
    }
    if list.iter().any(|s| s.space() != space) {
        return Err(QsimError::InvalidParameters("listed states live on another space".into()));
    }
    let members = |w: &CMatrix, f: Option<&CMatrix>| -> Result<Vec<PureState>> {
        (0..d)
            .map(|k| {
                let mut v = nalgebra::DVector::zeros(d);
                v[k] = c(1.0, 0.0);
                let v = match f {
                    Some(f) => w * (f * v),
                    None => w * v,
                };
                PureState::from_vector(space.clone(), v)
            })
            .collect()
    };
    let dft = fourier(d);
    let mut w = CMatrix::identity(d, d);
    let (first, second) = loop {
        let a = members(&w, None)?;
        let b = members(&w, Some(&dft))?;
        let collides = list
            .iter()
            .any(|s| a.iter().chain(&b).any(|m| m.same_ray(s, 1e-9)));
        if !collides {
            break (a, b);
        }
        w = random_unitary(d, rng);
    };
    let probe = first[0].clone();
    let first = Ensemble::uniform(first)?;
    let second = Ensemble::uniform(second)?;
    let f = readout_opf(&probe)?;
    let first_value = ensemble_value(&f, &first)?;
    let second_value = ensemble_value(&f, &second)?;
    let density_gap = max_abs_diff(first.density_matrix().matrix(), second.density_matrix().matrix());
    let mut list_disagreement: f64 = 0.0;
    let mut outcomes = Vec::with_capacity(list.len());
    for s in list {
        let g = readout_opf(s)?;
        list_disagreement =
            list_disagreement.max((ensemble_value(&g, &first)? - ensemble_value(&g, &second)?).abs());
        outcomes.push(g);
    }
    let verdict = if density_gap < AGREEMENT_TOLERANCE
        && list_disagreement < AGREEMENT_TOLERANCE
        && (first_value - second_value).abs() > 0.1
    {
        AssumptionVerdict::Fails
    } else {
        AssumptionVerdict::Satisfied
    };
    Ok(EstimationCheck {
        family: EstimationFamily::Readout,
        dim: d,
        verdict,
        outcomes,
        reconstruction_error: f64::NAN,
        prediction_error: (first_value - second_value).abs(),
        witness: Some(ReadoutWitness {
            first,
            second,
            probe,
            first_value,
            second_value,
            density_gap,
            list_size: list.len(),
            list_disagreement,
        }),
    })
}

/// Decides whether a finite outcome list of `family` on `C^d` determines
/// every family OPF on finite ensembles.
pub fn check_estimation_assumption(
    family: EstimationFamily,
    d: usize,
    rng: &mut RandomStream,
) -> Result<EstimationCheck> {
    check_estimation_assumption_with(family, d, &[], rng)
}

/// As [`check_estimation_assumption`]; for the readout family `list` names
/// the readout outcomes `f_φ` a candidate finite list would use.
pub fn check_estimation_assumption_with(
    family: EstimationFamily,
    d: usize,
    list: &[PureState],
    rng: &mut RandomStream,
) -> Result<EstimationCheck> {
    if !(2..=MAX_DIM).contains(&d) {
        return Err(QsimError::OutOfRange(format!(
            "estimation check supports 2 <= d <= {MAX_DIM}, got {d}"
        )));
    }
    let space = FactorSpace::single(d)?;
    match family {
        EstimationFamily::EntropyMeter => check_entropy_family(&space, rng),
        EstimationFamily::Readout => check_readout_family(&space, list, rng),
        _ => check_linear_family(family, &space, rng),
    }
}
