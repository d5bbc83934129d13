//! Catalog of post-quantum measurement devices.
//!
//! Every device reads a designated subsystem of a global pure state through
//! its reduced density matrix and leaves the state untouched. Devices share
//! the [`Device`] trait: the exact outcome distribution is computed
//! analytically and sampling draws from it, so the OPF layer and the samplers
//! agree by construction.
//!
//! The free functions (`readout_density`, `sample_eigenvalue`, …) are the
//! per-operation entry points; the structs in each submodule wrap them as
//! trait objects, and [`DeviceRegistry`] builds those from a [`DeviceSpec`].

mod analyser;
mod entropy;
mod outcome;
mod readout;
mod registry;
mod selection;
mod spec;
mod stochastic;

use std::fmt;

pub use analyser::{entanglement_analyse, EntanglementAnalyser};
pub use entropy::{entropy_certify, entropy_meter, EntropyCertifier, EntropyMeter};
pub use outcome::{Outcome, OutcomeDistribution};
pub use readout::{
    expectation_readout, function_readout, readout_density, ExpectationReadout, FunctionReadout,
    MatrixFunction, Readout,
};
pub use registry::{DeviceFactory, DeviceKind, DeviceRegistry};
pub use selection::{basis_select, logistic, overlap_test, BasisSelect, OverlapTest, TIE_TOLERANCE};
pub use spec::{BasisSpec, ComplexEntry, DeviceSpec, MatrixSpec};
pub use stochastic::{
    sample_eigenvalue, sample_povm, sample_uncertainty, EigenVariant, EigenvalueSampler,
    PovmSampler, UncertaintySampler,
};

use crate::error::Result;
use crate::qcore::{PureState, RandomStream};

/// A hypothetical measurement device with trivial post-measurement update.
pub trait Device: fmt::Debug + Send + Sync {
    fn kind(&self) -> DeviceKind;

    /// Short human-readable label including the settings, e.g. `FPRD(m=3)`.
    fn label(&self) -> String;

    /// Exact outcome distribution for `global` read on `target`.
    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution>;

    /// One use of the device. The global state is borrowed immutably: the
    /// update rule is the identity.
    fn measure(
        &self,
        global: &PureState,
        target: &[usize],
        rng: &mut RandomStream,
    ) -> Result<Outcome> {
        Ok(self.distribution(global, target)?.sample(rng))
    }

    /// Finite outcome alphabet for a target of dimension `target_dim`, when
    /// one exists.
    fn outcome_set(&self, _target_dim: usize) -> Option<Vec<Outcome>> {
        None
    }
}
