use super::entropy::EIGENVALUE_FLOOR;
use super::linalg::{
    hermitian_eigenvalues, hermiticity_deviation, psd_sqrt, symmetrize, CMatrix, C64,
};
use super::space::FactorSpace;
use super::state::PureState;
use super::STATE_TOLERANCE;
use crate::error::{QsimError, Result};

/// Hermitian, positive semi-definite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity and trace to `1e-9` and the minimum eigenvalue
    /// against `-1e-9`.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(QsimError::InvalidDensity("matrix is not square".into()));
        }
        let herm = hermiticity_deviation(&entries);
        if herm > STATE_TOLERANCE {
            return Err(QsimError::NotHermitian(herm));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > STATE_TOLERANCE || tr.im.abs() > STATE_TOLERANCE {
            return Err(QsimError::InvalidDensity(format!("trace is {tr}")));
        }
        let min = hermitian_eigenvalues(&entries)[0];
        if min < -STATE_TOLERANCE {
            return Err(QsimError::InvalidDensity(format!("eigenvalue {min:e} is negative")));
        }
        Ok(Self { entries })
    }

    /// Wraps a matrix that is Hermitian PSD with unit trace by construction;
    /// the Hermitian part is taken to remove rounding asymmetry.
    pub(crate) fn from_hermitian_unchecked(entries: CMatrix) -> Self {
        Self {
            entries: symmetrize(&entries),
        }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            entries: CMatrix::identity(d, d).unscale(d as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    pub fn purity(&self) -> f64 {
        super::linalg::trace_product(&self.entries, &self.entries).re
    }

    /// `Tr(A ρ)` for any square `A`.
    pub fn expectation(&self, a: &CMatrix) -> C64 {
        super::linalg::trace_product(a, &self.entries)
    }

    /// `½ Σ |eig(ρ − σ)|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.entries - &other.entries;
        0.5 * hermitian_eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Conjugation `U ρ U†`.
    pub fn conjugate(&self, u: &CMatrix) -> DensityMatrix {
        Self::from_hermitian_unchecked(u * &self.entries * u.adjoint())
    }

    /// Clips negative eigenvalues to zero and renormalises the trace.
    pub fn project_psd(m: &CMatrix) -> Result<DensityMatrix> {
        let clipped = super::linalg::hermitian_function(m, |x| x.max(0.0));
        let tr = clipped.trace().re;
        if tr <= 0.0 {
            return Err(QsimError::InvalidDensity("projection has zero trace".into()));
        }
        Ok(Self::from_hermitian_unchecked(clipped.unscale(tr)))
    }
}

/// Reduced density matrix of a pure state on the kept factors (ascending
/// factor order). `keep` must be a nonempty proper subset.
pub fn partial_trace(state: &PureState, keep: &[usize]) -> Result<DensityMatrix> {
    let keep = state.space().validate_selection(keep, false)?;
    let layout = state.space().bipartite_layout(&keep);
    let psi = state.bipartite_matrix_with(&layout);
    Ok(DensityMatrix::from_hermitian_unchecked(&psi * psi.adjoint()))
}

/// Partial trace of a density matrix over a declared factorisation.
pub fn partial_trace_density(
    rho: &DensityMatrix,
    space: &FactorSpace,
    keep: &[usize],
) -> Result<DensityMatrix> {
    if rho.dim() != space.total_dim() {
        return Err(QsimError::DimensionMismatch {
            expected: space.total_dim(),
            found: rho.dim(),
        });
    }
    let keep = space.validate_selection(keep, false)?;
    let layout = space.bipartite_layout(&keep);
    let mut out = CMatrix::zeros(layout.keep_dim, layout.keep_dim);
    // group global indices by their traced-out coordinate
    let mut by_rest: Vec<Vec<(usize, usize)>> = vec![Vec::new(); layout.rest_dim];
    for (g, &(k, t)) in layout.map.iter().enumerate() {
        by_rest[t].push((g, k));
    }
    for group in &by_rest {
        for &(g1, k1) in group {
            for &(g2, k2) in group {
                out[(k1, k2)] += rho.matrix()[(g1, g2)];
            }
        }
    }
    Ok(DensityMatrix::from_hermitian_unchecked(out))
}

/// Reduced state seen by a device on `target`: the partial trace, or the full
/// projector when `target` covers every factor.
pub fn reduced_state(state: &PureState, target: &[usize]) -> Result<DensityMatrix> {
    let target = state.space().validate_selection(target, true)?;
    if target.len() == state.space().num_factors() {
        Ok(state.projector())
    } else {
        partial_trace(state, &target)
    }
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let s = psd_sqrt(rho.matrix(), EIGENVALUE_FLOOR);
    let inner = &s * sigma.matrix() * &s;
    let root_trace: f64 = hermitian_eigenvalues(&inner)
        .iter()
        .filter(|&&x| x > EIGENVALUE_FLOOR)
        .map(|x| x.sqrt())
        .sum();
    (root_trace * root_trace).clamp(0.0, 1.0)
}
