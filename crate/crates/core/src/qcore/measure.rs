use rand::Rng;

use super::density::{reduced_state, DensityMatrix};
use super::linalg::trace_product;
use super::observable::{HermitianObservable, PovmSet};
use super::state::PureState;
use crate::error::{QsimError, Result};

/// Outcomes with probability below this are never sampled.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// `Tr(A_i ρ)` for every POVM element; tiny negatives are clamped to zero.
pub fn born_probabilities(rho: &DensityMatrix, povm: &PovmSet) -> Result<Vec<f64>> {
    if rho.dim() != povm.dim() {
        return Err(QsimError::DimensionMismatch {
            expected: povm.dim(),
            found: rho.dim(),
        });
    }
    Ok(povm
        .elements()
        .iter()
        .map(|a| trace_product(a, rho.matrix()).re.max(0.0))
        .collect())
}

/// Inverse-CDF draw over the full-precision probability vector. Entries below
/// [`PROBABILITY_FLOOR`] are skipped and the rest rescaled by their sum.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let eligible = |p: f64| p >= PROBABILITY_FLOOR;
    let total: f64 = probs.iter().copied().filter(|&p| eligible(p)).sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &p) in probs.iter().enumerate() {
        if !eligible(p) {
            continue;
        }
        acc += p;
        last = Some(i);
        if u < acc {
            return i;
        }
    }
    last.expect("no outcome carries probability")
}

/// Cluster probabilities `Tr((P_i ⊗ I)|ψ⟩⟨ψ|)` for an observable on `on`.
pub fn projective_probabilities(
    state: &PureState,
    observable: &HermitianObservable,
    on: &[usize],
) -> Result<Vec<f64>> {
    let rho = reduced_state(state, on)?;
    if rho.dim() != observable.dim() {
        return Err(QsimError::DimensionMismatch {
            expected: rho.dim(),
            found: observable.dim(),
        });
    }
    Ok(observable
        .clusters()
        .iter()
        .map(|c| trace_product(&c.projector, rho.matrix()).re.max(0.0))
        .collect())
}

/// Quantum projective measurement of `observable` on the factors `on`,
/// returning the eigenvalue cluster index and the renormalised post-state.
pub fn measure_projective<R: Rng + ?Sized>(
    state: &PureState,
    observable: &HermitianObservable,
    on: &[usize],
    rng: &mut R,
) -> Result<(usize, PureState)> {
    let probs = projective_probabilities(state, observable, on)?;
    let i = sample_index(&probs, rng);
    let projected = state.apply_local(&observable.clusters()[i].projector, on)?;
    let post = PureState::normalized(state.space().clone(), projected)?;
    Ok((i, post))
}
