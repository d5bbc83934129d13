//! Outcome probability functions (OPFs) and the checks built on them.
//!
//! An [`Opf`] maps pure states of a declared [`FactorSpace`](crate::qcore::FactorSpace)
//! to probabilities. OPFs come from quantum effects, from catalog devices
//! paired with an outcome selector, or from the closure constructors
//! [`mix`], [`compose_unitary`] and [`compose_system`]. When every
//! ingredient is quantum the constructors also track the effect operator,
//! which the tests use as an independent oracle.

mod basis;
mod closure;
mod estimation;
mod function;
mod update;
mod witness;

pub use basis::{hermitian_basis, hermitian_coordinates, from_hermitian_coordinates};
pub use closure::{
    check_closure, ClosureConfig, ClosureReport, DeviceFamily, MeasurementFamily,
    QuantumPovmFamily, ScaledFamily,
};
pub use estimation::{
    check_estimation_assumption, check_estimation_assumption_with, informationally_complete_projectors, linear_inversion,
    AssumptionVerdict, EstimationCheck, EstimationFamily, ReadoutWitness, READOUT_LIST_CAP,
};
pub use function::{
    compose_system, compose_unitary, mix, opf_from_device, opf_from_quantum, readout_opf,
    FullMeasurement, Opf, Provenance, RANGE_TOLERANCE,
};
pub use update::{
    superposition_closure, update_map_feasibility, CpMapCandidate, UpdateMapCertificate,
};
pub use witness::{
    local_informationally_complete, product_form_witness, product_form_witness_with,
    product_probes, ProductFormCertificate, QUADRATIC_TOLERANCE, VIOLATION_THRESHOLD,
};
