//! Simulation of hypothetical post-quantum measurement devices on
//! finite-dimensional pure states.
//!
//! The crate is organised bottom-up:
//!
//! * [`qcore`] holds states, density matrices, partial traces, Schmidt
//!   decompositions, entropies and the seeded randomness used everywhere else.
//! * [`devices`] implements the device catalog behind the [`devices::Device`]
//!   trait, with a name-keyed [`devices::DeviceRegistry`].
//! * [`opf`] builds outcome probability functions from quantum effects and
//!   devices, together with closure constructors and checkers.
//! * [`experiments`] reproduces the counterexamples and estimation protocols
//!   as seeded, deterministic runs behind [`experiments::ExperimentRegistry`].
//! * [`records`] renders results as sorted `key=value` lines.

pub mod devices;
pub mod error;
pub mod experiments;
pub mod opf;
pub mod qcore;
pub mod records;

pub use error::{QsimError, Result};
