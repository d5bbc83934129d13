use super::density::DensityMatrix;
use crate::error::{QsimError, Result};

/// Eigenvalues below this count as zero (`0 log 0 = 0`).
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

fn support(rho: &DensityMatrix) -> Vec<f64> {
    rho.eigenvalues()
        .into_iter()
        .filter(|&x| x > EIGENVALUE_FLOOR)
        .collect()
}

/// `−Σ λ log₂ λ` in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let s: f64 = support(rho).iter().map(|&l| -l * l.log2()).sum();
    s.max(0.0)
}

/// `log₂(Tr ρ^α) / (1 − α)` in bits, for `α ≥ 0`, `α ≠ 1`.
pub fn renyi_entropy(rho: &DensityMatrix, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(QsimError::OutOfRange(format!("Rényi order {alpha} must be >= 0")));
    }
    if (alpha - 1.0).abs() <= 1e-9 {
        return Err(QsimError::OutOfRange(
            "Rényi order 1 is the von Neumann entropy".into(),
        ));
    }
    let tr: f64 = support(rho).iter().map(|&l| l.powf(alpha)).sum();
    Ok((tr.log2() / (1.0 - alpha)).max(0.0))
}

/// `S_α` with `α = 1` routed to the von Neumann entropy.
pub fn entropy(rho: &DensityMatrix, alpha: f64) -> Result<f64> {
    if (alpha - 1.0).abs() <= 1e-9 {
        Ok(von_neumann_entropy(rho))
    } else {
        renyi_entropy(rho, alpha)
    }
}
