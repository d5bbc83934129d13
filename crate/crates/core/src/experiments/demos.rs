use super::{Certificate, Verdict};
use crate::devices::{entropy_meter, readout_density};
use crate::error::{QsimError, Result};
use crate::qcore::linalg::{complete_basis, hermitian_eigen};
use crate::qcore::{
    fidelity, measure_projective, reduced_state, schmidt_decompose, von_neumann_entropy,
    CVector, FactorSpace, HermitianObservable, OrthonormalBasis, PureState, RandomStream,
};
use crate::records::Record;

/// Device and oracle entropies must agree this closely.
const ORACLE_TOLERANCE: f64 = 1e-10;
/// A reading change above this is a signal.
const SIGNAL_TOLERANCE: f64 = 1e-10;
const RANK_TOLERANCE: f64 = 1e-9;
const EXACT_COPY_TOLERANCE: f64 = 1e-9;
const FINITE_PASS_FRACTION: f64 = 0.95;

fn entropy_reading(state: &PureState) -> Result<f64> {
    entropy_meter(state, &[0], 1.0, None)?
        .as_real()
        .ok_or_else(|| QsimError::InvalidParameters("entropy meter returned a non-real".into()))
}

/// Reads the von Neumann meter on factor 0, measures factor 1 projectively in
/// its Schmidt basis, and reads again. A change in the reading tells the
/// holder of factor 0 that the remote measurement happened.
pub fn no_signalling_demo(state: &PureState, rng: &mut RandomStream) -> Result<Certificate> {
    if state.space().num_factors() != 2 {
        return Err(QsimError::InvalidSubsystems(
            "no-signalling demo needs a bipartite state".into(),
        ));
    }
    let before = entropy_reading(state)?;
    let oracle_before = von_neumann_entropy(&reduced_state(state, &[0])?);

    let remote_dim = state.space().dims()[1];
    let schmidt = schmidt_decompose(state, &[0])?;
    let columns: Vec<CVector> = schmidt
        .right_states
        .iter()
        .map(|s| s.amplitudes().clone())
        .collect();
    let basis = OrthonormalBasis::from_unitary(complete_basis(&columns, remote_dim))?;
    let labels: Vec<f64> = (0..remote_dim).map(|k| k as f64).collect();
    let observable = HermitianObservable::from_spectrum(&labels, &basis)?;
    let (outcome, post) = measure_projective(state, &observable, &[1], rng)?;

    let after = entropy_reading(&post)?;
    let oracle_after = von_neumann_entropy(&reduced_state(&post, &[0])?);
    let oracle_gap = (before - oracle_before).abs().max((after - oracle_after).abs());

    let verdict = if oracle_gap > ORACLE_TOLERANCE {
        Verdict::Fail
    } else if (before - after).abs() > SIGNAL_TOLERANCE {
        Verdict::ViolationCertified
    } else {
        Verdict::Consistent
    };
    let evidence = Record::new()
        .with("before", before)
        .with("after", after)
        .with("oracle_before", oracle_before)
        .with("oracle_after", oracle_after)
        .with("oracle_gap", oracle_gap)
        .with("schmidt_rank", schmidt.rank())
        .with("schmidt_weights", schmidt.weights.clone())
        .with("remote_outcome", outcome);
    Ok(Certificate {
        experiment: "no-signalling".into(),
        verdict,
        evidence,
        seed: rng.seed(),
    })
}

/// Sum-of-fidelities ceiling for symmetric `1 → 2` quantum cloning, per copy.
pub fn werner_cloning_bound(d: usize) -> f64 {
    (d as f64 + 3.0) / (2.0 * (d as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloningConfig {
    pub d: usize,
    /// Readout precision; `None` is the infinite-precision device.
    pub precision: Option<u32>,
    pub trials: usize,
}

impl Default for CloningConfig {
    fn default() -> Self {
        Self {
            d: 2,
            precision: None,
            trials: 100,
        }
    }
}

struct CloneTrial {
    min_fidelity: f64,
    second_eigenvalue: f64,
}

fn clone_once(cfg: &CloningConfig, rng: &mut RandomStream) -> Result<CloneTrial> {
    let d = cfg.d;
    let psi = PureState::random(FactorSpace::single(d)?, rng);
    let blank = PureState::ket(d, 0)?;
    let global = psi.tensor(&blank);
    let description = readout_density(&global, &[0], None, cfg.precision)?;
    let rho = description
        .as_matrix()
        .ok_or_else(|| QsimError::InvalidParameters("readout returned a non-matrix".into()))?;
    let (values, vectors) = hermitian_eigen(rho);
    let top = vectors.column(d - 1).into_owned();
    let chi = PureState::normalized(FactorSpace::single(d)?, top)?;
    let copies = chi.tensor(&chi);
    let truth = psi.projector();
    let min_fidelity = (0..2)
        .map(|k| reduced_state(&copies, &[k]).map(|r| fidelity(&r, &truth)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(1.0, f64::min);
    Ok(CloneTrial {
        min_fidelity,
        second_eigenvalue: values[d - 2].abs(),
    })
}

/// Reads out an unknown pure state, diagonalises the description and
/// prepares two copies of the top eigenvector.
pub fn cloning_demo(cfg: CloningConfig, rng: &mut RandomStream) -> Result<Certificate> {
    if !(2..=4).contains(&cfg.d) || cfg.trials == 0 {
        return Err(QsimError::OutOfRange(format!(
            "cloning needs 2 <= d <= 4 and at least one trial, got d={} trials={}",
            cfg.d, cfg.trials
        )));
    }
    let threshold = match cfg.precision {
        None => 1.0 - EXACT_COPY_TOLERANCE,
        Some(m) => 1.0 - 10.0 * 2f64.powi(-(m as i32)),
    };
    let mut worst: f64 = 1.0;
    let mut fidelity_sum = 0.0;
    let mut passing = 0usize;
    let mut max_second: f64 = 0.0;
    for _ in 0..cfg.trials {
        let t = clone_once(&cfg, rng)?;
        worst = worst.min(t.min_fidelity);
        fidelity_sum += t.min_fidelity;
        max_second = max_second.max(t.second_eigenvalue);
        if t.min_fidelity >= threshold {
            passing += 1;
        }
    }
    let verdict = match cfg.precision {
        None if max_second >= RANK_TOLERANCE => Verdict::Fail,
        None if passing == cfg.trials => Verdict::ViolationCertified,
        Some(_) if passing as f64 >= FINITE_PASS_FRACTION * cfg.trials as f64 => {
            Verdict::ViolationCertified
        }
        _ => Verdict::Fail,
    };
    let mut evidence = Record::new()
        .with("d", cfg.d)
        .with("trials", cfg.trials)
        .with("fidelity_threshold", threshold)
        .with("passing_trials", passing)
        .with("min_fidelity", worst)
        .with("mean_fidelity", fidelity_sum / cfg.trials as f64)
        .with("max_second_eigenvalue", max_second)
        .with("quantum_bound", werner_cloning_bound(cfg.d));
    if let Some(m) = cfg.precision {
        evidence.insert("m", m);
    }
    Ok(Certificate {
        experiment: "cloning".into(),
        verdict,
        evidence,
        seed: rng.seed(),
    })
}
