use rand::Rng;

use super::density::DensityMatrix;
use super::linalg::{c, outer, standard_complex, CMatrix, CVector, C64};
use super::space::FactorSpace;
use super::STATE_TOLERANCE;
use crate::error::{QsimError, Result};

/// Normalised pure state over a declared factorisation.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    space: FactorSpace,
    amplitudes: CVector,
}

impl PureState {
    /// Accepts amplitudes whose norm is within `1e-9` of one and renormalises
    /// them exactly.
    pub fn new(space: FactorSpace, amplitudes: Vec<C64>) -> Result<Self> {
        let state = Self::from_vector(space, CVector::from_vec(amplitudes))?;
        Ok(state)
    }

    pub fn from_vector(space: FactorSpace, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(QsimError::DimensionMismatch {
                expected: space.total_dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > STATE_TOLERANCE {
            return Err(QsimError::NotNormalized(norm));
        }
        Ok(Self {
            space,
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// Normalises any nonzero vector.
    pub fn normalized(space: FactorSpace, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(QsimError::DimensionMismatch {
                expected: space.total_dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 1e-300) {
            return Err(QsimError::NotNormalized(norm));
        }
        Ok(Self {
            space,
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// Computational basis state `|l_1 … l_n⟩`.
    pub fn basis(space: FactorSpace, labels: &[usize]) -> Result<Self> {
        if labels.len() != space.num_factors() {
            return Err(QsimError::DimensionMismatch {
                expected: space.num_factors(),
                found: labels.len(),
            });
        }
        let mut index = 0;
        for (&l, &d) in labels.iter().zip(space.dims()) {
            if l >= d {
                return Err(QsimError::OutOfRange(format!("basis label {l} for dimension {d}")));
            }
            index = index * d + l;
        }
        let mut amps = CVector::zeros(space.total_dim());
        amps[index] = c(1.0, 0.0);
        Ok(Self {
            space,
            amplitudes: amps,
        })
    }

    /// Single-system basis state `|k⟩` in `C^d`.
    pub fn ket(d: usize, k: usize) -> Result<Self> {
        Self::basis(FactorSpace::single(d)?, &[k])
    }

    /// `(|00⟩ + |11⟩)/√2` on two qubits.
    pub fn bell() -> Self {
        Self::maximally_entangled(2)
    }

    /// `Σ_k |kk⟩/√d` on `C^d ⊗ C^d`.
    pub fn maximally_entangled(d: usize) -> Self {
        let space = FactorSpace::new(vec![d, d]).expect("d >= 2");
        let mut amps = CVector::zeros(d * d);
        let a = 1.0 / (d as f64).sqrt();
        for k in 0..d {
            amps[k * d + k] = c(a, 0.0);
        }
        Self {
            space,
            amplitudes: amps,
        }
    }

    /// `(|0…0⟩ + |1…1⟩)/√2` on `n ≥ 2` qubits.
    pub fn ghz(n: usize) -> Result<Self> {
        let space = FactorSpace::qubits(n)?;
        let dim = space.total_dim();
        let mut amps = CVector::zeros(dim);
        let a = std::f64::consts::FRAC_1_SQRT_2;
        amps[0] = c(a, 0.0);
        amps[dim - 1] = c(a, 0.0);
        Ok(Self {
            space,
            amplitudes: amps,
        })
    }

    /// `√p₀|00⟩ + √p₁|11⟩` on `C^2 ⊗ C^2`.
    pub fn two_qubit_schmidt(p0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(QsimError::OutOfRange(format!("Schmidt weight {p0}")));
        }
        let space = FactorSpace::qubits(2)?;
        let mut amps = CVector::zeros(4);
        amps[0] = c(p0.sqrt(), 0.0);
        amps[3] = c((1.0 - p0).sqrt(), 0.0);
        Self::from_vector(space, amps)
    }

    /// Haar-random state.
    pub fn random<R: Rng + ?Sized>(space: FactorSpace, rng: &mut R) -> Self {
        let dim = space.total_dim();
        let v = CVector::from_fn(dim, |_, _| standard_complex(rng));
        Self::normalized(space, v).expect("Gaussian vector is nonzero")
    }

    /// Product of independent Haar-random factor states.
    pub fn random_product<R: Rng + ?Sized>(space: &FactorSpace, rng: &mut R) -> Self {
        let mut parts = space
            .dims()
            .iter()
            .map(|&d| Self::random(FactorSpace::single(d).expect("d >= 2"), rng));
        let first = parts.next().expect("nonempty space");
        parts.fold(first, |acc, s| acc.tensor(&s))
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// Same amplitudes reinterpreted over a different factorisation of the
    /// same total dimension.
    pub fn with_space(&self, space: FactorSpace) -> Result<Self> {
        Self::from_vector(space, self.amplitudes.clone())
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        PureState {
            space: self.space.concat(&other.space),
            amplitudes,
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Equality of rays: `1 − |⟨a|b⟩|² < tol` on the same space.
    pub fn same_ray(&self, other: &PureState, tol: f64) -> bool {
        self.space == other.space && 1.0 - self.overlap(other) < tol
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix::from_hermitian_unchecked(outer(&self.amplitudes))
    }

    pub fn apply_unitary(&self, u: &CMatrix) -> Result<PureState> {
        let dev = super::linalg::unitarity_deviation(u);
        if u.nrows() != self.dim() {
            return Err(QsimError::DimensionMismatch {
                expected: self.dim(),
                found: u.nrows(),
            });
        }
        if dev > STATE_TOLERANCE {
            return Err(QsimError::NotUnitary(dev));
        }
        Self::normalized(self.space.clone(), u * &self.amplitudes)
    }

    /// Applies a unitary acting on the selected factors only.
    pub fn apply_local_unitary(&self, u: &CMatrix, on: &[usize]) -> Result<PureState> {
        let dev = super::linalg::unitarity_deviation(u);
        if dev > STATE_TOLERANCE {
            return Err(QsimError::NotUnitary(dev));
        }
        let v = self.apply_local(u, on)?;
        Self::normalized(self.space.clone(), v)
    }

    /// `(op ⊗ I) ψ` with `op` on the selected factors; the result is not
    /// renormalised.
    pub fn apply_local(&self, op: &CMatrix, on: &[usize]) -> Result<CVector> {
        let on = self.space.validate_selection(on, true)?;
        let keep_dim = self.space.selection_dim(&on);
        if op.nrows() != keep_dim || op.ncols() != keep_dim {
            return Err(QsimError::DimensionMismatch {
                expected: keep_dim,
                found: op.nrows(),
            });
        }
        let layout = self.space.bipartite_layout(&on);
        let psi = self.bipartite_matrix_with(&layout);
        let out = op * psi;
        let mut v = CVector::zeros(self.dim());
        for (g, &(k, t)) in layout.map.iter().enumerate() {
            v[g] = out[(k, t)];
        }
        Ok(v)
    }

    /// Coefficient matrix `Ψ[k, t]` for the split into `keep` and the rest.
    pub fn bipartite_matrix(&self, keep: &[usize]) -> Result<CMatrix> {
        let keep = self.space.validate_selection(keep, true)?;
        Ok(self.bipartite_matrix_with(&self.space.bipartite_layout(&keep)))
    }

    pub(crate) fn bipartite_matrix_with(&self, layout: &super::space::BipartiteLayout) -> CMatrix {
        let mut m = CMatrix::zeros(layout.keep_dim, layout.rest_dim);
        for (g, &(k, t)) in layout.map.iter().enumerate() {
            m[(k, t)] = self.amplitudes[g];
        }
        m
    }
}

/// `a ⊗ b`.
pub fn tensor_product(a: &PureState, b: &PureState) -> PureState {
    a.tensor(b)
}

/// Finite proper mixture `(ψ_r, p_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<(PureState, f64)>,
}

impl Ensemble {
    pub fn new(members: Vec<(PureState, f64)>) -> Result<Self> {
        let Some((first, _)) = members.first() else {
            return Err(QsimError::InvalidEnsemble("no members".into()));
        };
        let space = first.space().clone();
        let mut total = 0.0;
        for (state, w) in &members {
            if !(*w > 0.0) {
                return Err(QsimError::InvalidEnsemble(format!("weight {w} is not positive")));
            }
            if state.space() != &space {
                return Err(QsimError::InvalidEnsemble("members live on different spaces".into()));
            }
            total += w;
        }
        if (total - 1.0).abs() > STATE_TOLERANCE {
            return Err(QsimError::InvalidEnsemble(format!("weights sum to {total}")));
        }
        Ok(Self { members })
    }

    /// Equal weights over `states`.
    pub fn uniform(states: Vec<PureState>) -> Result<Self> {
        let w = 1.0 / states.len().max(1) as f64;
        Self::new(states.into_iter().map(|s| (s, w)).collect())
    }

    pub fn pure(state: PureState) -> Self {
        Self {
            members: vec![(state, 1.0)],
        }
    }

    pub fn members(&self) -> &[(PureState, f64)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn space(&self) -> &FactorSpace {
        self.members[0].0.space()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|(_, w)| *w).collect()
    }

    /// `Σ_r p_r |ψ_r⟩⟨ψ_r|`.
    pub fn density_matrix(&self) -> DensityMatrix {
        let d = self.space().total_dim();
        let mut m = CMatrix::zeros(d, d);
        for (s, w) in &self.members {
            m += outer(s.amplitudes()).scale(*w);
        }
        DensityMatrix::from_hermitian_unchecked(m)
    }

    /// Draws a member index with the ensemble weights.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        super::measure::sample_index(&self.weights(), rng)
    }

    /// Weight of the member matching `state` as a ray, or 0.
    pub fn weight_of(&self, state: &PureState, tol: f64) -> f64 {
        self.members
            .iter()
            .filter(|(s, _)| s.same_ray(state, tol))
            .map(|(_, w)| *w)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::RandomStream;

    #[test]
    fn tensor_of_basis_states() {
        let s = PureState::ket(2, 0).unwrap().tensor(&PureState::ket(2, 1).unwrap());
        let expect = [0.0, 1.0, 0.0, 0.0];
        for (a, e) in s.amplitudes().iter().zip(expect) {
            assert_eq!(*a, c(e, 0.0));
        }
        assert_eq!(s.space().dims(), &[2, 2]);
    }

    #[test]
    fn tensor_preserves_norm() {
        let mut rng = RandomStream::from_seed(3);
        for _ in 0..50 {
            let a = PureState::random(FactorSpace::single(3).unwrap(), &mut rng);
            let b = PureState::random(FactorSpace::new(vec![2, 2]).unwrap(), &mut rng);
            assert!((tensor_product(&a, &b).amplitudes().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unnormalized_and_wrong_length() {
        let space = FactorSpace::single(2).unwrap();
        assert!(matches!(
            PureState::new(space.clone(), vec![c(1.0, 0.0), c(1.0, 0.0)]),
            Err(QsimError::NotNormalized(_))
        ));
        assert!(matches!(
            PureState::new(space, vec![c(1.0, 0.0)]),
            Err(QsimError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ensemble_validation() {
        let a = PureState::ket(2, 0).unwrap();
        let b = PureState::ket(2, 1).unwrap();
        assert!(Ensemble::new(vec![(a.clone(), 0.5), (b.clone(), 0.4)]).is_err());
        assert!(Ensemble::new(vec![(a.clone(), 1.0), (b.clone(), 0.0)]).is_err());
        let e = Ensemble::uniform(vec![a, b]).unwrap();
        let rho = e.density_matrix();
        assert!((rho.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn local_unitary_on_second_factor() {
        let s = PureState::basis(FactorSpace::qubits(2).unwrap(), &[0, 0]).unwrap();
        let flipped = s.apply_local_unitary(&crate::qcore::linalg::pauli_x(), &[1]).unwrap();
        assert!(flipped.same_ray(&PureState::basis(FactorSpace::qubits(2).unwrap(), &[0, 1]).unwrap(), 1e-12));
    }
}
