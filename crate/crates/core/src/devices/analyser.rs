use super::readout::check_dim;
use super::{Device, DeviceKind, Outcome, OutcomeDistribution};
use crate::error::Result;
use crate::qcore::{quantize_matrix, CMatrix, OrthonormalBasis, PureState};
use crate::qcore::linalg::c;

/// Entanglement analyser: `M_ij = ⟨φ_i|φ_j⟩` for the partial inner products
/// `|φ_i⟩ = ⟨b_i|ψ⟩` against each basis vector of the single target factor.
/// Entries are quantized componentwise when `m` is given.
pub fn entanglement_analyse(
    global: &PureState,
    target: usize,
    basis: &OrthonormalBasis,
    m: Option<u32>,
) -> Result<Outcome> {
    let space = global.space();
    space.validate_selection(&[target], true)?;
    let d = space.dims()[target];
    check_dim(d, basis.dim())?;
    let coeffs = global.bipartite_matrix(&[target])?;
    let rest = coeffs.ncols();
    // φ_i[t] = Σ_k conj(b_i[k]) ψ[k, t]
    let mut partial = vec![vec![c(0.0, 0.0); rest]; d];
    for (i, row) in partial.iter_mut().enumerate() {
        let b = basis.vector(i);
        for (t, slot) in row.iter_mut().enumerate() {
            for k in 0..d {
                *slot += b[k].conj() * coeffs[(k, t)];
            }
        }
    }
    let mut entries = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = c(0.0, 0.0);
            for t in 0..rest {
                acc += partial[i][t].conj() * partial[j][t];
            }
            entries[(i, j)] = acc;
        }
    }
    let entries = match m {
        Some(bits) => quantize_matrix(&entries, bits),
        None => entries,
    };
    Ok(Outcome::Matrix {
        entries,
        precision: m,
    })
}

/// EA; FPEA when `precision` is set. The basis defaults to the computational
/// basis of the target factor.
#[derive(Debug, Clone)]
pub struct EntanglementAnalyser {
    pub basis: Option<OrthonormalBasis>,
    pub precision: Option<u32>,
}

impl Device for EntanglementAnalyser {
    fn kind(&self) -> DeviceKind {
        DeviceKind::EntanglementAnalyse
    }

    fn label(&self) -> String {
        match self.precision {
            Some(m) => format!("FPEA(m={m})"),
            None => "EA".into(),
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        let sel = global.space().validate_selection(target, true)?;
        if sel.len() != 1 {
            return Err(crate::QsimError::InvalidSubsystems(
                "the entanglement analyser reads exactly one factor".into(),
            ));
        }
        let basis = match &self.basis {
            Some(b) => b.clone(),
            None => OrthonormalBasis::computational(global.space().dims()[sel[0]]),
        };
        entanglement_analyse(global, sel[0], &basis, self.precision)
            .map(OutcomeDistribution::certain)
    }
}
