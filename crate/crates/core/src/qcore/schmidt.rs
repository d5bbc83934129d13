use nalgebra::SVD;

use super::linalg::{CMatrix, CVector};
use super::space::FactorSpace;
use super::state::PureState;
use crate::error::Result;

/// Singular values at or below this are dropped from the decomposition.
const SINGULAR_FLOOR: f64 = 1e-10;

/// `ψ = Σ_i √p_i φ_i ⊗ χ_i` across a cut.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Descending, positive, summing to one.
    pub weights: Vec<f64>,
    /// Orthonormal states on the cut factors.
    pub left_states: Vec<PureState>,
    /// Orthonormal states on the complement factors.
    pub right_states: Vec<PureState>,
    space: FactorSpace,
    cut: Vec<usize>,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn cut(&self) -> &[usize] {
        &self.cut
    }

    /// Amplitudes of `Σ √p_i φ_i ⊗ χ_i` in the original factor order.
    pub fn reconstruct(&self) -> CVector {
        let layout = self.space.bipartite_layout(&self.cut);
        let mut m = CMatrix::zeros(layout.keep_dim, layout.rest_dim);
        for ((p, l), r) in self.weights.iter().zip(&self.left_states).zip(&self.right_states) {
            m += (l.amplitudes() * r.amplitudes().transpose()).scale(p.sqrt());
        }
        CVector::from_iterator(layout.map.len(), layout.map.iter().map(|&(k, t)| m[(k, t)]))
    }
}

/// Schmidt decomposition from the SVD of the coefficient matrix across the
/// cut (`cut` factors on the left).
pub fn schmidt_decompose(state: &PureState, cut: &[usize]) -> Result<SchmidtDecomposition> {
    let space = state.space();
    let cut = space.validate_selection(cut, false)?;
    let rest = space.complement(&cut);
    let left_space = space.subspace(&cut)?;
    let right_space = space.subspace(&rest)?;
    let psi = state.bipartite_matrix(&cut)?;
    let svd = SVD::new(psi, true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > SINGULAR_FLOOR)
        .collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let raw: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|p| p / total).collect();
    let mut left_states = Vec::with_capacity(order.len());
    let mut right_states = Vec::with_capacity(order.len());
    for &i in &order {
        left_states.push(PureState::normalized(left_space.clone(), u.column(i).into_owned())?);
        // Ψ = U Σ V†, so χ_i has amplitudes given by row i of V†, untransposed
        let chi = v_t.row(i).transpose();
        right_states.push(PureState::normalized(right_space.clone(), chi)?);
    }
    Ok(SchmidtDecomposition {
        weights,
        left_states,
        right_states,
        space: space.clone(),
        cut,
    })
}
