use super::linalg::{c, CMatrix};

/// Largest supported binary precision.
pub const MAX_PRECISION: u32 = 1000;

/// Nearest multiple of `2^-m`, ties to the even multiple.
pub fn quantize(x: f64, m: u32) -> f64 {
    debug_assert!((1..=MAX_PRECISION).contains(&m), "precision {m} out of range");
    let scale = 2f64.powi(m as i32);
    (x * scale).round_ties_even() / scale
}

/// Quantizes real and imaginary parts of every entry independently.
pub fn quantize_matrix(m: &CMatrix, bits: u32) -> CMatrix {
    m.map(|z| c(quantize(z.re, bits), quantize(z.im, bits)))
}
