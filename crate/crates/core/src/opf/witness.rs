use nalgebra::{DMatrix, DVector};

use super::basis::{from_hermitian_coordinates, hermitian_coordinates, least_squares};
use super::function::Opf;
use crate::error::{QsimError, Result};
use crate::qcore::linalg::{c, outer, random_unitary};
use crate::qcore::{CMatrix, CVector, FactorSpace, PureState, RandomStream};

/// Residuals below this are consistent with a quadratic form `⟨ψ|Q|ψ⟩`.
pub const QUADRATIC_TOLERANCE: f64 = 1e-6;
/// Residuals above this certify that no joint operator reproduces the OPF.
pub const VIOLATION_THRESHOLD: f64 = 0.1;
const MAX_TOTAL_DIM: usize = 16;

/// Outcome of fitting `f(ψ) ≈ ⟨ψ|Q|ψ⟩`.
#[derive(Debug, Clone)]
pub struct ProductFormCertificate {
    /// Largest `|f(ψ) − ⟨ψ|Q|ψ⟩|` over all probes.
    pub residual: f64,
    pub operator: CMatrix,
    pub fit_probes: usize,
    pub check_probes: usize,
    /// Probe attaining the residual.
    pub worst_probe: PureState,
}

impl ProductFormCertificate {
    pub fn is_quadratic(&self) -> bool {
        self.residual < QUADRATIC_TOLERANCE
    }

    pub fn violation_certified(&self) -> bool {
        self.residual > VIOLATION_THRESHOLD
    }
}

/// `d²` states whose projectors span the Hermitian matrices on `C^d`:
/// `|k⟩`, `(|j⟩+|k⟩)/√2` and `(|j⟩+i|k⟩)/√2`.
pub fn local_informationally_complete(d: usize) -> Vec<CVector> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out: Vec<CVector> = (0..d)
        .map(|k| CVector::from_fn(d, |i, _| c(if i == k { 1.0 } else { 0.0 }, 0.0)))
        .collect();
    for j in 0..d {
        for k in j + 1..d {
            let mut plus = CVector::zeros(d);
            plus[j] = c(s, 0.0);
            plus[k] = c(s, 0.0);
            out.push(plus);
            let mut imag = CVector::zeros(d);
            imag[j] = c(s, 0.0);
            imag[k] = c(0.0, s);
            out.push(imag);
        }
    }
    out
}

/// Tensor products of per-factor informationally complete sets, each
/// optionally rotated by a random local unitary.
pub fn product_probes(space: &FactorSpace, rng: Option<&mut RandomStream>) -> Result<Vec<PureState>> {
    let mut rng = rng;
    let mut states: Vec<PureState> = Vec::new();
    for (n, &d) in space.dims().iter().enumerate() {
        let rot = rng.as_deref_mut().map(|r| random_unitary(d, r));
        let local: Vec<PureState> = local_informationally_complete(d)
            .into_iter()
            .map(|v| {
                let v = match &rot {
                    Some(u) => u * v,
                    None => v,
                };
                PureState::from_vector(FactorSpace::single(d)?, v)
            })
            .collect::<Result<_>>()?;
        states = if n == 0 {
            local
        } else {
            states
                .iter()
                .flat_map(|s| local.iter().map(move |l| s.tensor(l)))
                .collect()
        };
    }
    states
        .into_iter()
        .map(|s| s.with_space(space.clone()))
        .collect()
}

fn entangled_probe(space: &FactorSpace) -> Result<Option<PureState>> {
    if space.num_factors() < 2 {
        return Ok(None);
    }
    let a = space.dims()[0];
    let rest = space.total_dim() / a;
    let r = a.min(rest);
    let mut v = CVector::zeros(space.total_dim());
    for k in 0..r {
        v[k * rest + k] = c(1.0 / (r as f64).sqrt(), 0.0);
    }
    PureState::from_vector(space.clone(), v).map(Some)
}

/// Fits a Hermitian `Q` to `f` by least squares on `fit` (which must span
/// the Hermitian operators) and reports the worst mismatch over `fit` and
/// `check` together.
pub fn product_form_witness_with(
    f: &Opf,
    fit: &[PureState],
    check: &[PureState],
) -> Result<ProductFormCertificate> {
    let dim = f.space().total_dim();
    if dim > MAX_TOTAL_DIM {
        return Err(QsimError::OutOfRange(format!(
            "product-form witness needs total dimension <= {MAX_TOTAL_DIM}, got {dim}"
        )));
    }
    let params = dim * dim;
    let rows: Vec<DVector<f64>> = fit
        .iter()
        .map(|p| hermitian_coordinates(&outer(p.amplitudes())))
        .collect();
    let a = DMatrix::from_fn(fit.len(), params, |i, j| rows[i][j]);
    let b = DVector::from_iterator(fit.len(), fit.iter().map(|p| f.value(p)).collect::<Result<Vec<_>>>()?);
    let q = least_squares(a, &b).ok_or_else(|| {
        QsimError::InvalidParameters(format!(
            "{} fit probes do not span the {params} Hermitian directions",
            fit.len()
        ))
    })?;
    let operator = from_hermitian_coordinates(&q, dim);
    let mut residual: f64 = -1.0;
    let mut worst = fit[0].clone();
    for p in fit.iter().chain(check) {
        let v = p.amplitudes();
        let model = (v.adjoint() * &operator * v)[(0, 0)].re;
        let gap = (f.value(p)? - model).abs();
        if gap > residual {
            residual = gap;
            worst = p.clone();
        }
    }
    Ok(ProductFormCertificate {
        residual,
        operator,
        fit_probes: fit.len(),
        check_probes: check.len(),
        worst_probe: worst,
    })
}

/// [`product_form_witness_with`] on randomly rotated product probes, checked
/// additionally on a maximally entangled state across the first cut and on
/// `dim²` Haar-random states.
pub fn product_form_witness(f: &Opf, rng: &mut RandomStream) -> Result<ProductFormCertificate> {
    let space = f.space().clone();
    if space.total_dim() > MAX_TOTAL_DIM {
        return Err(QsimError::OutOfRange(format!(
            "product-form witness needs total dimension <= {MAX_TOTAL_DIM}, got {}",
            space.total_dim()
        )));
    }
    let fit = product_probes(&space, Some(rng))?;
    let mut check: Vec<PureState> = entangled_probe(&space)?.into_iter().collect();
    let n = space.total_dim() * space.total_dim();
    check.extend((0..n).map(|_| PureState::random(space.clone(), rng)));
    product_form_witness_with(f, &fit, &check)
}
