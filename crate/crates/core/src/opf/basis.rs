use nalgebra::{DMatrix, DVector};

use crate::qcore::linalg::c;
use crate::qcore::CMatrix;

/// Hilbert–Schmidt orthonormal basis of the `d×d` Hermitian matrices: the
/// diagonal units, then for each `j < k` the symmetric and antisymmetric
/// off-diagonal pairs scaled by `1/√2`.
pub fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = c(1.0, 0.0);
        out.push(m);
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut sym = CMatrix::zeros(d, d);
            sym[(j, k)] = c(s, 0.0);
            sym[(k, j)] = c(s, 0.0);
            out.push(sym);
            let mut anti = CMatrix::zeros(d, d);
            anti[(j, k)] = c(0.0, -s);
            anti[(k, j)] = c(0.0, s);
            out.push(anti);
        }
    }
    out
}

/// Real coordinates `Re Tr(B_μ M)` of `M` in [`hermitian_basis`].
pub fn hermitian_coordinates(m: &CMatrix) -> DVector<f64> {
    let d = m.nrows();
    let s = std::f64::consts::SQRT_2;
    let mut v = Vec::with_capacity(d * d);
    for k in 0..d {
        v.push(m[(k, k)].re);
    }
    for j in 0..d {
        for k in j + 1..d {
            // Tr(B M) for the two off-diagonal elements
            v.push((m[(j, k)].re + m[(k, j)].re) / s);
            v.push((m[(k, j)].im - m[(j, k)].im) / s);
        }
    }
    DVector::from_vec(v)
}

/// Inverse of [`hermitian_coordinates`].
pub fn from_hermitian_coordinates(coords: &DVector<f64>, d: usize) -> CMatrix {
    hermitian_basis(d)
        .iter()
        .zip(coords.iter())
        .fold(CMatrix::zeros(d, d), |acc, (b, x)| acc + b.scale(*x))
}

/// Least-squares solution of `a x = b` through Householder QR, or `None`
/// when `a` has fewer rows than columns or is numerically rank deficient.
///
/// nalgebra's SVD solve was seen to lose six digits on well-conditioned
/// 36×36 probe systems, so the fits go through QR instead.
pub(crate) fn least_squares(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.nrows() < a.ncols() || a.ncols() == 0 {
        return None;
    }
    let qr = a.qr();
    let r = qr.r();
    let diag: Vec<f64> = r.diagonal().iter().map(|x| x.abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|&x| x <= RANK_TOLERANCE * max) {
        return None;
    }
    let rhs = qr.q().transpose() * b;
    r.solve_upper_triangular(&rhs)
}

const RANK_TOLERANCE: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{max_abs_diff, random_hermitian, trace_product};
    use crate::qcore::RandomStream;

    #[test]
    fn least_squares_recovers_exact_solutions() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = least_squares(a.clone(), &DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(least_squares(singular, &DVector::from_vec(vec![1.0, 1.0])).is_none());
        assert!(least_squares(a.transpose(), &DVector::from_vec(vec![1.0, 1.0])).is_none());
    }

    #[test]
    fn basis_is_orthonormal_and_coordinates_invert() {
        let mut rng = RandomStream::from_seed(8);
        for d in 1..=4 {
            let b = hermitian_basis(d);
            assert_eq!(b.len(), d * d);
            for (i, x) in b.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    let g = trace_product(x, y);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g.re - want).abs() < 1e-12 && g.im.abs() < 1e-12);
                }
            }
            let h = random_hermitian(d, &mut rng);
            let coords = hermitian_coordinates(&h);
            for (mu, bm) in b.iter().enumerate() {
                assert!((trace_product(bm, &h).re - coords[mu]).abs() < 1e-12);
            }
            assert!(max_abs_diff(&from_hermitian_coordinates(&coords, d), &h) < 1e-12);
        }
    }
}
