use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::devices::{Device, Outcome, Readout};
use crate::error::{QsimError, Result};
use crate::qcore::linalg::{hermitian_eigenvalues, hermiticity_deviation, unitarity_deviation};
use crate::qcore::{CMatrix, FactorSpace, PureState, RandomStream, STATE_TOLERANCE};

/// OPF values may leave `[0, 1]` by at most this much.
pub const RANGE_TOLERANCE: f64 = 1e-9;

type Evaluator = Arc<dyn Fn(&PureState) -> Result<f64> + Send + Sync>;

/// How an OPF was built.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Constant(f64),
    Quantum,
    Device { device: String, selector: String },
    Complement(Box<Provenance>),
    Mixture(Vec<(Provenance, f64)>),
    UnitaryComposed(Box<Provenance>),
    SystemComposed(Box<Provenance>),
    Custom(String),
}

/// Outcome probability function on the pure states of one factor space.
#[derive(Clone)]
pub struct Opf {
    space: FactorSpace,
    eval: Evaluator,
    provenance: Provenance,
    operator: Option<CMatrix>,
}

impl fmt::Debug for Opf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Opf")
            .field("space", &self.space)
            .field("provenance", &self.provenance)
            .field("quantum", &self.operator.is_some())
            .finish()
    }
}

impl Opf {
    /// Wraps an arbitrary evaluator. No operator is attached.
    pub fn from_fn(
        space: FactorSpace,
        name: impl Into<String>,
        f: impl Fn(&PureState) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            space,
            eval: Arc::new(f),
            provenance: Provenance::Custom(name.into()),
            operator: None,
        }
    }

    pub fn constant(space: FactorSpace, value: f64) -> Result<Self> {
        if !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&value) {
            return Err(QsimError::OutOfRange(format!("constant OPF value {value}")));
        }
        let d = space.total_dim();
        Ok(Self {
            space,
            eval: Arc::new(move |_| Ok(value)),
            provenance: Provenance::Constant(value),
            operator: Some(CMatrix::identity(d, d).scale(value)),
        })
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Effect operator `Q` with `f(ψ) = ⟨ψ|Q|ψ⟩`, when known.
    pub fn operator(&self) -> Option<&CMatrix> {
        self.operator.as_ref()
    }

    pub fn value(&self, psi: &PureState) -> Result<f64> {
        if psi.space() != &self.space {
            return Err(QsimError::DimensionMismatch {
                expected: self.space.total_dim(),
                found: psi.dim(),
            });
        }
        (self.eval)(psi)
    }

    /// `1 − f`.
    pub fn complement(&self) -> Opf {
        let inner = self.eval.clone();
        let d = self.space.total_dim();
        Opf {
            space: self.space.clone(),
            eval: Arc::new(move |psi| Ok(1.0 - inner(psi)?)),
            provenance: Provenance::Complement(Box::new(self.provenance.clone())),
            operator: self.operator.as_ref().map(|q| CMatrix::identity(d, d) - q),
        }
    }
}

/// `f(ψ) = ⟨ψ|Q|ψ⟩` for an effect `0 ≤ Q ≤ I`.
pub fn opf_from_quantum(space: FactorSpace, q: &CMatrix) -> Result<Opf> {
    let d = space.total_dim();
    if q.nrows() != d || q.ncols() != d {
        return Err(QsimError::DimensionMismatch {
            expected: d,
            found: q.nrows(),
        });
    }
    let herm = hermiticity_deviation(q);
    if herm > STATE_TOLERANCE {
        return Err(QsimError::NotHermitian(herm));
    }
    let ev = hermitian_eigenvalues(q);
    if ev[0] < -STATE_TOLERANCE || ev[d - 1] > 1.0 + STATE_TOLERANCE {
        return Err(QsimError::InvalidPovm(format!(
            "effect spectrum [{}, {}] leaves [0, 1]",
            ev[0],
            ev[d - 1]
        )));
    }
    let op = q.clone();
    let shared = Arc::new(q.clone());
    Ok(Opf {
        space,
        eval: Arc::new(move |psi| {
            let v = psi.amplitudes();
            Ok((v.adjoint() * shared.as_ref() * v)[(0, 0)].re)
        }),
        provenance: Provenance::Quantum,
        operator: Some(op),
    })
}

fn probe_outcome(device: &dyn Device, space: &FactorSpace, target: &[usize]) -> Result<Outcome> {
    let zeros = vec![0; space.num_factors()];
    let dist = device.distribution(&PureState::basis(space.clone(), &zeros)?, target)?;
    Ok(dist.entries()[0].0.clone())
}

/// OPF of `selector` for `device` reading `target` of `space`: the exact
/// probability of the selected outcome, evaluated analytically.
pub fn opf_from_device(
    device: Arc<dyn Device>,
    space: FactorSpace,
    target: &[usize],
    selector: Outcome,
) -> Result<Opf> {
    let target = space.validate_selection(target, true)?;
    let target_dim = space.selection_dim(&target);
    match device.outcome_set(target_dim) {
        Some(set) => {
            if !set.iter().any(|o| o.matches(&selector)) {
                return Err(QsimError::InvalidSelector(format!(
                    "{selector:?} is not an outcome of {}",
                    device.label()
                )));
            }
        }
        None => {
            let sample = probe_outcome(device.as_ref(), &space, &target)?;
            if !sample.same_type(&selector) {
                return Err(QsimError::InvalidSelector(format!(
                    "{} produces outcomes like {sample:?}, not {selector:?}",
                    device.label()
                )));
            }
        }
    }
    let provenance = Provenance::Device {
        device: device.label(),
        selector: format!("{selector:?}"),
    };
    Ok(Opf {
        space,
        eval: Arc::new(move |psi| Ok(device.distribution(psi, &target)?.probability_of(&selector))),
        provenance,
        operator: None,
    })
}

/// Readout OPF `f_φ` on the single space of `phi`: 1 iff the readout
/// reports `|φ⟩⟨φ|`, i.e. iff `ψ = φ` as rays.
pub fn readout_opf(phi: &PureState) -> Result<Opf> {
    let target: Vec<usize> = (0..phi.space().num_factors()).collect();
    let selector = Outcome::Matrix {
        entries: phi.projector().into_matrix(),
        precision: None,
    };
    let device = Arc::new(Readout {
        basis: None,
        precision: None,
    });
    opf_from_device(device, phi.space().clone(), &target, selector)
}

/// Pointwise convex combination `Σ w_i f_i`.
pub fn mix(opfs: &[Opf], weights: &[f64]) -> Result<Opf> {
    if opfs.is_empty() || opfs.len() != weights.len() {
        return Err(QsimError::InvalidParameters(format!(
            "{} OPFs with {} weights",
            opfs.len(),
            weights.len()
        )));
    }
    let space = opfs[0].space.clone();
    if opfs.iter().any(|f| f.space != space) {
        return Err(QsimError::InvalidParameters("mixed OPFs live on different spaces".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(QsimError::InvalidParameters("mixture weights must be non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > STATE_TOLERANCE {
        return Err(QsimError::InvalidParameters(format!("mixture weights sum to {total}")));
    }
    let operator = opfs
        .iter()
        .zip(weights)
        .map(|(f, w)| f.operator.as_ref().map(|q| q.scale(*w)))
        .collect::<Option<Vec<_>>>()
        .map(|parts| parts.into_iter().fold(CMatrix::zeros(space.total_dim(), space.total_dim()), |a, b| a + b));
    let parts: Vec<(Evaluator, f64)> = opfs.iter().map(|f| f.eval.clone()).zip(weights.iter().copied()).collect();
    Ok(Opf {
        space,
        eval: Arc::new(move |psi| {
            let mut acc = 0.0;
            for (f, w) in &parts {
                acc += w * f(psi)?;
            }
            Ok(acc)
        }),
        provenance: Provenance::Mixture(
            opfs.iter().map(|f| f.provenance.clone()).zip(weights.iter().copied()).collect(),
        ),
        operator,
    })
}

/// `(f∘U)(ψ) = f(Uψ)`.
pub fn compose_unitary(f: &Opf, u: &CMatrix) -> Result<Opf> {
    let d = f.space.total_dim();
    if u.nrows() != d || u.ncols() != d {
        return Err(QsimError::DimensionMismatch {
            expected: d,
            found: u.nrows(),
        });
    }
    let dev = unitarity_deviation(u);
    if dev > STATE_TOLERANCE {
        return Err(QsimError::NotUnitary(dev));
    }
    let inner = f.eval.clone();
    let shared = Arc::new(u.clone());
    Ok(Opf {
        space: f.space.clone(),
        eval: Arc::new(move |psi| inner(&psi.apply_unitary(&shared)?)),
        provenance: Provenance::UnitaryComposed(Box::new(f.provenance.clone())),
        operator: f.operator.as_ref().map(|q| u.adjoint() * q * u),
    })
}

/// `f(ψ) = g(ψ ⊗ φ)` for `g` on a space whose trailing factors are those of `φ`.
pub fn compose_system(g: &Opf, phi: &PureState) -> Result<Opf> {
    let dims = g.space.dims();
    let tail = phi.space().dims();
    if dims.len() <= tail.len() || dims[dims.len() - tail.len()..] != *tail {
        return Err(QsimError::InvalidSubsystems(format!(
            "background factors {tail:?} are not a proper tail of {dims:?}"
        )));
    }
    let space = FactorSpace::new(dims[..dims.len() - tail.len()].to_vec())?;
    let operator = g.operator.as_ref().map(|q| {
        let d = space.total_dim();
        let b = phi.dim();
        // V = I ⊗ |φ⟩, so the reduced effect is V†QV
        let mut v = CMatrix::zeros(d * b, d);
        for i in 0..d {
            for k in 0..b {
                v[(i * b + k, i)] = phi.amplitudes()[k];
            }
        }
        v.adjoint() * q * v
    });
    let inner = g.eval.clone();
    let background = phi.clone();
    Ok(Opf {
        space,
        eval: Arc::new(move |psi| inner(&psi.tensor(&background))),
        provenance: Provenance::SystemComposed(Box::new(g.provenance.clone())),
        operator,
    })
}

/// Finite list of OPFs meant to sum to one on every pure state.
#[derive(Debug, Clone)]
pub struct FullMeasurement {
    outcomes: Vec<Opf>,
}

impl FullMeasurement {
    pub fn new(outcomes: Vec<Opf>) -> Result<Self> {
        let Some(first) = outcomes.first() else {
            return Err(QsimError::InvalidParameters("a measurement needs outcomes".into()));
        };
        if outcomes.iter().any(|f| f.space != first.space) {
            return Err(QsimError::InvalidParameters(
                "measurement outcomes live on different spaces".into(),
            ));
        }
        Ok(Self { outcomes })
    }

    /// Every outcome of `device` on `target`, which must have a finite alphabet.
    pub fn from_device(device: Arc<dyn Device>, space: FactorSpace, target: &[usize]) -> Result<Self> {
        let sel = space.validate_selection(target, true)?;
        let set = device.outcome_set(space.selection_dim(&sel)).ok_or_else(|| {
            QsimError::InvalidParameters(format!("{} has no finite outcome set", device.label()))
        })?;
        let mut distinct: Vec<Outcome> = Vec::with_capacity(set.len());
        for o in set {
            if !distinct.iter().any(|d| d.matches(&o)) {
                distinct.push(o);
            }
        }
        let outcomes = distinct
            .into_iter()
            .map(|o| opf_from_device(device.clone(), space.clone(), &sel, o))
            .collect::<Result<Vec<_>>>()?;
        Self::new(outcomes)
    }

    pub fn outcomes(&self) -> &[Opf] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn space(&self) -> &FactorSpace {
        &self.outcomes[0].space
    }

    /// `|Σ_i f_i(ψ) − 1|` and the worst range excursion of any `f_i(ψ)`.
    pub fn violations_at(&self, psi: &PureState) -> Result<(f64, f64)> {
        let mut total = 0.0;
        let mut range: f64 = 0.0;
        for f in &self.outcomes {
            let v = f.value(psi)?;
            total += v;
            range = range.max(-v).max(v - 1.0);
        }
        Ok(((total - 1.0).abs(), range.max(0.0)))
    }

    /// Worst completeness and range violations over `samples` Haar-random
    /// states; sample `i` is drawn from `stream.derive(i)`.
    pub fn sampled_violations(&self, samples: usize, stream: &RandomStream) -> Result<(f64, f64)> {
        let space = self.space().clone();
        (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream.derive(i);
                self.violations_at(&PureState::random(space.clone(), &mut rng))
            })
            .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))
    }

    /// Outcome-wise mixture with another measurement on the same space,
    /// identifying outcomes by position; the shorter one is padded with zero
    /// OPFs.
    pub fn mix_with(&self, other: &FullMeasurement, p: f64) -> Result<FullMeasurement> {
        let identity: Vec<usize> = (0..other.len()).collect();
        self.mix_with_relabeled(other, p, &identity)
    }

    /// Mixture where outcome `j` of `other` is identified with outcome
    /// `relabel[j]` of `self`. The map must be injective; slots missing on
    /// either side get a zero OPF.
    pub fn mix_with_relabeled(
        &self,
        other: &FullMeasurement,
        p: f64,
        relabel: &[usize],
    ) -> Result<FullMeasurement> {
        if relabel.len() != other.len() {
            return Err(QsimError::InvalidParameters(format!(
                "relabeling lists {} outcomes, measurement has {}",
                relabel.len(),
                other.len()
            )));
        }
        let mut seen = relabel.to_vec();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(QsimError::InvalidParameters("relabeling is not injective".into()));
        }
        let n = self.len().max(seen.last().map_or(0, |m| m + 1));
        let zero = Opf::constant(self.space().clone(), 0.0)?;
        let outcomes = (0..n)
            .map(|i| {
                let mine = self.outcomes.get(i).cloned().unwrap_or_else(|| zero.clone());
                let theirs = relabel
                    .iter()
                    .position(|&r| r == i)
                    .map_or_else(|| zero.clone(), |j| other.outcomes[j].clone());
                mix(&[mine, theirs], &[p, 1.0 - p])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(outcomes)
    }

    pub fn compose_unitary(&self, u: &CMatrix) -> Result<FullMeasurement> {
        Self::new(self.outcomes.iter().map(|f| compose_unitary(f, u)).collect::<Result<_>>()?)
    }

    pub fn compose_system(&self, phi: &PureState) -> Result<FullMeasurement> {
        Self::new(self.outcomes.iter().map(|f| compose_system(f, phi)).collect::<Result<_>>()?)
    }
}
