use nalgebra::{DMatrix, DVector};

use super::basis::{from_hermitian_coordinates, hermitian_coordinates, least_squares};
use crate::error::{QsimError, Result};
use crate::qcore::linalg::{c, outer};
use crate::qcore::{CMatrix, PureState};

/// Linear map on `d×d` Hermitian matrices, stored as a real matrix acting on
/// the coordinates of the orthonormal Hermitian basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CpMapCandidate {
    dim: usize,
    matrix: DMatrix<f64>,
}

impl CpMapCandidate {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, m: &CMatrix) -> CMatrix {
        from_hermitian_coordinates(&(&self.matrix * hermitian_coordinates(m)), self.dim)
    }

    /// Smallest `max |Λ − s·id|` over real `s`, with the minimising `s`.
    pub fn scaled_identity_gap(&self) -> (f64, f64) {
        let n = self.matrix.nrows();
        let s = self.matrix.trace() / n as f64;
        let gap = (&self.matrix - DMatrix::identity(n, n) * s).amax();
        (s, gap)
    }
}

/// Result of asking for one linear `Λ` with `Λ(|φ⟩⟨φ|) = ⟨φ|A|φ⟩|φ⟩⟨φ|` on
/// every probe.
#[derive(Debug, Clone)]
pub struct UpdateMapCertificate {
    /// Largest Frobenius mismatch over the constraint states.
    pub residual: f64,
    pub map: CpMapCandidate,
    pub constraints: usize,
    pub worst_probe: PureState,
}

/// `probes` plus the normalised pairwise combinations `φ_a ± φ_b` and
/// `φ_a ± iφ_b`, skipping vanishing vectors and repeated rays.
pub fn superposition_closure(probes: &[PureState]) -> Vec<PureState> {
    let mut out: Vec<PureState> = Vec::new();
    let mut push = |s: PureState| {
        if !out.iter().any(|t| t.same_ray(&s, 1e-9)) {
            out.push(s);
        }
    };
    for p in probes {
        push(p.clone());
    }
    for (i, a) in probes.iter().enumerate() {
        for b in &probes[i + 1..] {
            for phase in [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)] {
                let v = a.amplitudes() + b.amplitudes() * phase;
                if v.norm() > 1e-6 {
                    if let Ok(s) = PureState::normalized(a.space().clone(), v) {
                        push(s);
                    }
                }
            }
        }
    }
    out
}

/// Least-squares search for a state-independent update map reproducing the
/// trivial update of the stochastic POVM device with effect `a`. The probes
/// must span the Hermitian operators; the constraints are imposed on their
/// [`superposition_closure`].
pub fn update_map_feasibility(a: &CMatrix, probes: &[PureState]) -> Result<UpdateMapCertificate> {
    let Some(first) = probes.first() else {
        return Err(QsimError::InvalidParameters("no probe states".into()));
    };
    let d = first.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(QsimError::DimensionMismatch {
            expected: d,
            found: a.nrows(),
        });
    }
    if probes.iter().any(|p| p.dim() != d) {
        return Err(QsimError::InvalidParameters("probe dimensions differ".into()));
    }
    let n2 = d * d;
    let coords = |p: &PureState| hermitian_coordinates(&outer(p.amplitudes()));
    let span = DMatrix::from_columns(&probes.iter().map(coords).collect::<Vec<_>>());
    if span.rank(1e-9) < n2 {
        return Err(QsimError::InvalidParameters(format!(
            "probe projectors span rank {} < {n2}",
            span.rank(1e-9)
        )));
    }
    let states = superposition_closure(probes);
    let x_cols: Vec<DVector<f64>> = states.iter().map(coords).collect();
    let y_cols: Vec<DVector<f64>> = states
        .iter()
        .zip(&x_cols)
        .map(|(s, x)| {
            let v = s.amplitudes();
            x * (v.adjoint() * a * v)[(0, 0)].re
        })
        .collect();
    let x = DMatrix::from_columns(&x_cols);
    let y = DMatrix::from_columns(&y_cols);
    // L X = Y in the least-squares sense, one row of L at a time: Xᵀ lᵢ = yᵢ
    let xt = x.transpose();
    let mut l = DMatrix::zeros(n2, n2);
    for i in 0..n2 {
        let row = least_squares(xt.clone(), &y.row(i).transpose()).ok_or_else(|| {
            QsimError::InvalidParameters("superposition constraints are rank deficient".into())
        })?;
        l.set_row(i, &row.transpose());
    }
    let mismatch = &l * &x - &y;
    let (worst, residual) = mismatch
        .column_iter()
        .map(|col| col.norm())
        .enumerate()
        .fold((0, 0.0), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    Ok(UpdateMapCertificate {
        residual,
        map: CpMapCandidate { dim: d, matrix: l },
        constraints: states.len(),
        worst_probe: states[worst].clone(),
    })
}
