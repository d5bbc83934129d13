//! Executable counterexamples, demonstrations and estimation protocols.
//!
//! Each protocol is a plain function taking its parameters and a
//! [`RandomStream`](crate::qcore::RandomStream). The [`ExperimentRegistry`]
//! wraps them behind the [`Experiment`] trait so the CLI can run them by id
//! with a typed parameter map.

mod demos;
mod estimation;
mod harness;
mod params;
mod refutation;
mod registry;

use std::fmt;

use serde::Serialize;

use crate::records::Record;

pub use demos::{cloning_demo, no_signalling_demo, werner_cloning_bound, CloningConfig};
pub use estimation::{
    ensemble_estimate_overlap, ensemble_estimate_readout, fibonacci_net, supports_disjoint,
    tomography_estimate, Estimate, EstimationReport, OverlapConfig, PrecisionSchedule,
};
pub use harness::{repeat, wilson_interval, WILSON_Z95};
pub use params::{ParamSpec, ParamValue, Params};
pub use refutation::{
    fpvnem_outcome_bound, fpvnem_refutation, spod_update_refutation, standard_probes,
    FpvnemConfig,
};
pub use registry::{Experiment, ExperimentRegistry, RunOutput};

/// Verdict of a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ViolationCertified,
    Consistent,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ViolationCertified => "VIOLATION_CERTIFIED",
            Verdict::Consistent => "CONSISTENT",
            Verdict::Fail => "FAIL",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verdict plus the numbers it was decided from.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub experiment: String,
    pub verdict: Verdict,
    pub evidence: Record,
    pub seed: u64,
}

impl Certificate {
    pub fn to_record(&self) -> Record {
        let mut r = self.evidence.clone();
        r.insert("experiment", self.experiment.as_str());
        r.insert("verdict", self.verdict.as_str());
        r.insert("seed", self.seed);
        r
    }
}
