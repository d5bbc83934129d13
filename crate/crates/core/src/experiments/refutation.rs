use std::sync::Arc;

use super::{Certificate, Verdict};
use crate::devices::{Device, EntropyMeter, Outcome, PovmSampler};
use crate::error::{QsimError, Result};
use crate::opf::{
    local_informationally_complete, opf_from_device, product_form_witness,
    product_form_witness_with, product_probes, update_map_feasibility, QUADRATIC_TOLERANCE,
    VIOLATION_THRESHOLD,
};
use crate::qcore::linalg::hermitian_eigenvalues;
use crate::qcore::{fidelity, CMatrix, FactorSpace, PovmSet, PureState, RandomStream};
use crate::records::Record;

/// Update-map residuals below this count as feasible.
const FEASIBLE_TOLERANCE: f64 = 1e-10;
const TRIVIAL_UPDATE_TOLERANCE: f64 = 1e-12;

/// `⌈2^m log₂ d⌉ + 1`.
pub fn fpvnem_outcome_bound(d: usize, m: u32) -> usize {
    ((2f64.powi(m as i32) * (d as f64).log2()).ceil() as usize) + 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpvnemConfig {
    pub d: usize,
    pub m: u32,
    /// Random product states checked for `f₀ = 1`.
    pub samples: usize,
    /// Whether entangled probes are used; without them no violation can show.
    pub entangled_probe: bool,
}

impl Default for FpvnemConfig {
    fn default() -> Self {
        Self {
            d: 2,
            m: 3,
            samples: 1000,
            entangled_probe: true,
        }
    }
}

/// The finite-precision entropy meter on `C^d ⊗ C^d`: its zero-entropy OPF
/// is 1 on product states and 0 on a maximally entangled state, so it has no
/// quadratic form `⟨ψ|Q|ψ⟩`.
pub fn fpvnem_refutation(cfg: FpvnemConfig, rng: &mut RandomStream) -> Result<Certificate> {
    if !(2..=4).contains(&cfg.d) || !(1..=8).contains(&cfg.m) {
        return Err(QsimError::OutOfRange(format!(
            "fpvnem needs 2 <= d <= 4 and 1 <= m <= 8, got d={} m={}",
            cfg.d, cfg.m
        )));
    }
    let d = cfg.d;
    let space = FactorSpace::new(vec![d, d])?;
    let meter: Arc<dyn Device> = Arc::new(EntropyMeter::fpvnem(cfg.m));
    let outcomes = meter.outcome_set(d).map_or(0, |s| s.len());
    let bound = fpvnem_outcome_bound(d, cfg.m);
    let f0 = opf_from_device(meter, space.clone(), &[0], Outcome::Real(0.0))?;

    let mut product_deviation: f64 = 0.0;
    let mut products = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let psi = PureState::random_product(&space, rng);
        product_deviation = product_deviation.max((f0.value(&psi)? - 1.0).abs());
        products.push(psi);
    }

    let mut evidence = Record::new()
        .with("d", d)
        .with("m", cfg.m)
        .with("samples", cfg.samples)
        .with("outcome_count", outcomes)
        .with("outcome_bound", bound)
        .with("product_max_deviation", product_deviation)
        .with("entangled_probe", cfg.entangled_probe);
    let bound_ok = outcomes >= 1 && outcomes <= bound;
    let product_ok = product_deviation <= 1e-9;

    let verdict = if cfg.entangled_probe {
        let entangled = f0.value(&PureState::maximally_entangled(d))?;
        let cert = product_form_witness(&f0, rng)?;
        evidence.insert("entangled_value", entangled);
        evidence.insert("residual", cert.residual);
        evidence.insert("fit_probes", cert.fit_probes);
        evidence.insert("check_probes", cert.check_probes);
        if bound_ok && product_ok && entangled == 0.0 && cert.residual > VIOLATION_THRESHOLD {
            Verdict::ViolationCertified
        } else {
            Verdict::Fail
        }
    } else {
        let fit = product_probes(&space, Some(rng))?;
        let cert = product_form_witness_with(&f0, &fit, &products)?;
        evidence.insert("residual", cert.residual);
        evidence.insert("fit_probes", cert.fit_probes);
        evidence.insert("check_probes", cert.check_probes);
        if bound_ok && product_ok && cert.residual < QUADRATIC_TOLERANCE {
            Verdict::Consistent
        } else {
            Verdict::Fail
        }
    };
    Ok(Certificate {
        experiment: "fpvnem".into(),
        verdict,
        evidence,
        seed: rng.seed(),
    })
}

/// `|k⟩`, `(|j⟩+|k⟩)/√2`, `(|j⟩+i|k⟩)/√2` on `C^d`; for qubits these are
/// `|0⟩, |1⟩, |+⟩, |+i⟩`.
pub fn standard_probes(d: usize) -> Result<Vec<PureState>> {
    local_informationally_complete(d)
        .into_iter()
        .map(|v| PureState::from_vector(FactorSpace::single(d)?, v))
        .collect()
}

/// Runs the stochastic POVM device `{A, I − A}` repeatedly to confirm the
/// state is untouched, then asks whether one linear map reproduces that
/// trivial update for every input.
pub fn spod_update_refutation(
    effect: &CMatrix,
    calls: usize,
    rng: &mut RandomStream,
) -> Result<Certificate> {
    let d = effect.nrows();
    let povm = PovmSet::new(vec![effect.clone(), CMatrix::identity(d, d) - effect])?;
    let device = PovmSampler::new(povm, None)?;
    let global = PureState::random(FactorSpace::new(vec![d, d])?, rng);
    let before = global.projector();
    let mut min_fidelity: f64 = 1.0;
    let mut unchanged = true;
    let mut ones = 0usize;
    for _ in 0..calls {
        let snapshot = global.clone();
        if device.measure(&global, &[0], rng)? == Outcome::Label(1) {
            ones += 1;
        }
        unchanged &= snapshot == global;
        min_fidelity = min_fidelity.min(fidelity(&before, &global.projector()));
    }
    let cert = update_map_feasibility(effect, &standard_probes(d)?)?;
    let (scale, scale_gap) = cert.map.scaled_identity_gap();
    let spectrum = hermitian_eigenvalues(effect);
    let trivial_ok = unchanged && min_fidelity >= 1.0 - TRIVIAL_UPDATE_TOLERANCE;
    let verdict = if !trivial_ok {
        Verdict::Fail
    } else if cert.residual > VIOLATION_THRESHOLD {
        Verdict::ViolationCertified
    } else if cert.residual < FEASIBLE_TOLERANCE {
        Verdict::Consistent
    } else {
        Verdict::Fail
    };
    let evidence = Record::new()
        .with("d", d)
        .with("calls", calls)
        .with("outcome_one_count", ones)
        .with("state_unchanged", unchanged)
        .with("min_fidelity", min_fidelity)
        .with("residual", cert.residual)
        .with("constraints", cert.constraints)
        .with("worst_probe", &cert.worst_probe)
        .with("map_scale", scale)
        .with("map_scale_gap", scale_gap)
        .with("effect_spectrum", spectrum);
    Ok(Certificate {
        experiment: "spod-update".into(),
        verdict,
        evidence,
        seed: rng.seed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::outer;

    #[test]
    fn outcome_bound_formula() {
        assert_eq!(fpvnem_outcome_bound(2, 3), 9);
        assert_eq!(fpvnem_outcome_bound(2, 1), 3);
        assert_eq!(fpvnem_outcome_bound(3, 2), 8);
    }

    #[test]
    fn fpvnem_verdicts() {
        let mut rng = RandomStream::from_seed(51);
        let cfg = FpvnemConfig {
            samples: 50,
            ..FpvnemConfig::default()
        };
        let c = fpvnem_refutation(cfg, &mut rng).unwrap();
        assert_eq!(c.verdict, Verdict::ViolationCertified, "{}", c.to_record());
        let c = fpvnem_refutation(
            FpvnemConfig {
                entangled_probe: false,
                ..cfg
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(c.verdict, Verdict::Consistent, "{}", c.to_record());
        assert!(fpvnem_refutation(FpvnemConfig { d: 5, ..cfg }, &mut rng).is_err());
    }

    #[test]
    fn spod_verdicts() {
        let mut rng = RandomStream::from_seed(52);
        let p0 = outer(PureState::ket(2, 0).unwrap().amplitudes());
        let c = spod_update_refutation(&p0, 100, &mut rng).unwrap();
        assert_eq!(c.verdict, Verdict::ViolationCertified);
        assert!(c.evidence.real("residual").unwrap() > 0.1);
        let half = CMatrix::identity(2, 2).scale(0.5);
        let c = spod_update_refutation(&half, 10, &mut rng).unwrap();
        assert_eq!(c.verdict, Verdict::Consistent);
        assert!((c.evidence.real("map_scale").unwrap() - 0.5).abs() < 1e-10);
        let c = spod_update_refutation(&CMatrix::zeros(2, 2), 10, &mut rng).unwrap();
        assert_eq!(c.verdict, Verdict::Consistent);
    }
}
