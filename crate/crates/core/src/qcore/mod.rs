//! Finite-dimensional quantum states and the linear algebra underneath them.
//!
//! Subsystems are addressed by 0-based factor index. Amplitudes are stored
//! with the first factor most significant, so `|a⟩ ⊗ |b⟩` on `C^2 ⊗ C^3`
//! has index `3a + b`.

mod density;
mod entropy;
pub mod linalg;
mod measure;
mod observable;
mod quantize;
mod random;
mod schmidt;
mod space;
mod state;

pub use density::{fidelity, partial_trace, partial_trace_density, reduced_state, DensityMatrix};
pub use entropy::{entropy, renyi_entropy, von_neumann_entropy, EIGENVALUE_FLOOR};
pub use linalg::{C64, CMatrix, CVector};
pub use measure::{
    born_probabilities, measure_projective, projective_probabilities, sample_index,
    PROBABILITY_FLOOR,
};
pub use observable::{EigenCluster, HermitianObservable, OrthonormalBasis, PovmSet};
pub use quantize::{quantize, quantize_matrix, MAX_PRECISION};
pub use random::RandomStream;
pub use schmidt::{schmidt_decompose, SchmidtDecomposition};
pub use space::FactorSpace;
pub use state::{tensor_product, Ensemble, PureState};

/// Elementwise tolerance for Hermiticity, trace and normalisation checks.
pub const STATE_TOLERANCE: f64 = 1e-9;
