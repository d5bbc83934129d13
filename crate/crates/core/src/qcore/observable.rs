use super::linalg::{
    hermitian_eigen, hermitian_eigenvalues, hermiticity_deviation, identity, max_abs_diff, outer,
    symmetrize, unitarity_deviation, CMatrix, CVector,
};
use super::state::PureState;
use super::STATE_TOLERANCE;
use crate::error::{QsimError, Result};

/// Relative gap below which neighbouring eigenvalues share one eigenspace.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// One distinct eigenvalue and the projector onto its eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    pub value: f64,
    pub projector: CMatrix,
    pub rank: usize,
}

/// Hermitian matrix with its spectral decomposition grouped into
/// distinct-eigenvalue clusters, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianObservable {
    matrix: CMatrix,
    clusters: Vec<EigenCluster>,
}

impl HermitianObservable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let dev = hermiticity_deviation(&matrix);
        if dev > STATE_TOLERANCE {
            return Err(QsimError::NotHermitian(dev));
        }
        let matrix = symmetrize(&matrix);
        let (values, vectors) = hermitian_eigen(&matrix);
        let d = matrix.nrows();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for k in 0..d {
            let starts_new = match groups.last() {
                None => true,
                Some(g) => {
                    let prev = values[*g.last().unwrap()];
                    values[k] - prev >= DEGENERACY_TOLERANCE * (1.0 + values[k].abs())
                }
            };
            if starts_new {
                groups.push(vec![k]);
            } else {
                groups.last_mut().unwrap().push(k);
            }
        }
        let clusters = groups
            .into_iter()
            .map(|g| {
                let value = g.iter().map(|&k| values[k]).sum::<f64>() / g.len() as f64;
                let mut projector = CMatrix::zeros(d, d);
                for &k in &g {
                    projector += outer(&vectors.column(k).into_owned());
                }
                EigenCluster {
                    value,
                    projector,
                    rank: g.len(),
                }
            })
            .collect();
        Ok(Self { matrix, clusters })
    }

    /// `Σ_i λ_i |b_i⟩⟨b_i|` for the columns of an orthonormal basis.
    pub fn from_spectrum(values: &[f64], basis: &OrthonormalBasis) -> Result<Self> {
        if values.len() != basis.dim() {
            return Err(QsimError::DimensionMismatch {
                expected: basis.dim(),
                found: values.len(),
            });
        }
        let mut m = CMatrix::zeros(basis.dim(), basis.dim());
        for (k, &v) in values.iter().enumerate() {
            m += outer(&basis.vector(k)).scale(v);
        }
        Self::new(m)
    }

    /// Projector `P_φ` onto a single-system state.
    pub fn state_projector(phi: &PureState) -> Self {
        Self::new(outer(phi.amplitudes())).expect("rank-one projector is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn clusters(&self) -> &[EigenCluster] {
        &self.clusters
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// `A − c I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let m = &self.matrix - identity(self.dim()).scale(shift);
        Self::new(m).expect("shift preserves Hermiticity")
    }
}

/// Orthonormal basis stored as the columns of a unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    columns: CMatrix,
}

impl OrthonormalBasis {
    pub fn computational(d: usize) -> Self {
        Self {
            columns: identity(d),
        }
    }

    pub fn from_unitary(columns: CMatrix) -> Result<Self> {
        let dev = unitarity_deviation(&columns);
        if dev > STATE_TOLERANCE {
            return Err(QsimError::InvalidBasis(format!(
                "columns are not orthonormal (deviation {dev:e})"
            )));
        }
        Ok(Self { columns })
    }

    pub fn from_vectors(vectors: &[CVector]) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(QsimError::InvalidBasis("no vectors".into()));
        };
        if vectors.len() != first.len() || vectors.iter().any(|v| v.len() != first.len()) {
            return Err(QsimError::InvalidBasis(format!(
                "expected {} vectors of length {}",
                first.len(),
                first.len()
            )));
        }
        Self::from_unitary(CMatrix::from_columns(vectors))
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.columns.column(k).into_owned()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.columns
    }

    /// Coordinates `B† M B` of an operator in this basis.
    pub fn express(&self, m: &CMatrix) -> CMatrix {
        self.columns.adjoint() * m * &self.columns
    }
}

/// Finite POVM `{A_i}` with `A_i ≥ 0` and `Σ A_i = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    elements: Vec<CMatrix>,
}

impl PovmSet {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(QsimError::InvalidPovm("no elements".into()));
        };
        let d = first.nrows();
        let mut sum = CMatrix::zeros(d, d);
        for (i, e) in elements.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(QsimError::InvalidPovm(format!("element {i} has the wrong shape")));
            }
            let dev = hermiticity_deviation(e);
            if dev > STATE_TOLERANCE {
                return Err(QsimError::InvalidPovm(format!(
                    "element {i} is not Hermitian (deviation {dev:e})"
                )));
            }
            let min = hermitian_eigenvalues(e)[0];
            if min < -STATE_TOLERANCE {
                return Err(QsimError::InvalidPovm(format!(
                    "element {i} has eigenvalue {min:e}"
                )));
            }
            sum += e;
        }
        let dev = max_abs_diff(&sum, &identity(d));
        if dev > STATE_TOLERANCE {
            return Err(QsimError::InvalidPovm(format!(
                "elements sum to identity only within {dev:e}"
            )));
        }
        Ok(Self {
            elements: elements.iter().map(symmetrize).collect(),
        })
    }

    /// The spectral projectors of an observable, ascending eigenvalue order.
    pub fn from_observable(obs: &HermitianObservable) -> Self {
        Self {
            elements: obs.clusters().iter().map(|c| c.projector.clone()).collect(),
        }
    }

    /// Rank-one projectors onto the vectors of a basis.
    pub fn from_basis(basis: &OrthonormalBasis) -> Self {
        Self {
            elements: (0..basis.dim()).map(|k| outer(&basis.vector(k))).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{c, pauli_z, random_hermitian};
    use crate::qcore::RandomStream;

    #[test]
    fn degenerate_spectrum_clusters() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(1.0, 0.),
            c(-1.0, 0.),
            c(1.0 + 1e-12, 0.),
        ]));
        let obs = HermitianObservable::new(m).unwrap();
        assert_eq!(obs.clusters().len(), 2);
        assert_eq!(obs.clusters()[0].rank, 1);
        assert_eq!(obs.clusters()[1].rank, 2);
        assert!((obs.clusters()[0].value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn projectors_resolve_identity() {
        let mut rng = RandomStream::from_seed(5);
        for d in 2..6 {
            let obs = HermitianObservable::new(random_hermitian(d, &mut rng)).unwrap();
            let mut sum = CMatrix::zeros(d, d);
            for (i, a) in obs.clusters().iter().enumerate() {
                sum += &a.projector;
                for (j, b) in obs.clusters().iter().enumerate() {
                    let prod = &a.projector * &b.projector;
                    let expect = if i == j { a.projector.clone() } else { CMatrix::zeros(d, d) };
                    assert!(max_abs_diff(&prod, &expect) < 1e-8);
                }
            }
            assert!(max_abs_diff(&sum, &identity(d)) < 1e-9);
        }
    }

    #[test]
    fn povm_validation() {
        let half = identity(2).scale(0.5);
        assert!(PovmSet::new(vec![half.clone(), half.clone()]).is_ok());
        assert!(PovmSet::new(vec![half.clone()]).is_err());
        assert!(PovmSet::new(vec![pauli_z(), identity(2) - pauli_z()]).is_err());
    }

    #[test]
    fn basis_requires_orthonormal_columns() {
        let v = CVector::from_vec(vec![c(1., 0.), c(0., 0.)]);
        assert!(OrthonormalBasis::from_vectors(&[v.clone(), v]).is_err());
    }
}
