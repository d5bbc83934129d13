use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::demos::{cloning_demo, no_signalling_demo, CloningConfig};
use super::estimation::{
    ensemble_estimate_overlap, ensemble_estimate_readout, supports_disjoint, tomography_estimate,
    Estimate, EstimationReport, OverlapConfig, PrecisionSchedule,
};
use super::harness::repeat;
use super::params::{ParamSpec, ParamValue, Params};
use super::refutation::{fpvnem_refutation, spod_update_refutation, FpvnemConfig};
use super::{Certificate, Verdict};
use crate::devices::MatrixSpec;
use crate::error::{QsimError, Result};
use crate::qcore::linalg::c;
use crate::qcore::{Ensemble, FactorSpace, PureState, RandomStream};
use crate::records::Record;

/// Fraction of repetitions that must pass.
const REPETITION_PASS_FRACTION: f64 = 0.95;

/// Result of one experiment run: a summary plus optional per-trial records.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub experiment: String,
    pub seed: u64,
    pub verdict: Option<Verdict>,
    pub passed: bool,
    pub summary: Record,
    pub trials: Vec<Record>,
}

impl RunOutput {
    fn from_certificate(cert: Certificate) -> Self {
        Self {
            experiment: cert.experiment.clone(),
            seed: cert.seed,
            verdict: Some(cert.verdict),
            passed: cert.verdict != Verdict::Fail,
            summary: cert.to_record(),
            trials: Vec::new(),
        }
    }

    /// 0 on success, 1 on a FAIL verdict or a failed criterion.
    pub fn exit_code(&self) -> i32 {
        if self.passed && self.verdict != Some(Verdict::Fail) {
            0
        } else {
            1
        }
    }
}

/// An experiment runnable by id with a typed parameter map.
pub trait Experiment: Send + Sync {
    fn id(&self) -> &'static str;
    /// Stream slot for [`RandomStream::new`]; distinct per experiment.
    fn stream_id(&self) -> u64;
    fn description(&self) -> &'static str;
    fn parameters(&self) -> Vec<ParamSpec>;
    /// Runs with already validated parameters.
    fn execute(&self, params: &Params, seed: u64) -> Result<RunOutput>;

    fn run(&self, params: &Params, seed: u64) -> Result<RunOutput> {
        params.validate(self.id(), &self.parameters())?;
        self.execute(params, seed)
    }
}

fn int(name: &'static str, v: i64, help: &'static str) -> ParamSpec {
    ParamSpec::new(name, ParamValue::Int(v), help)
}

fn real(name: &'static str, v: f64, help: &'static str) -> ParamSpec {
    ParamSpec::new(name, ParamValue::Real(v), help)
}

fn text(name: &'static str, v: &str, help: &'static str) -> ParamSpec {
    ParamSpec::new(name, ParamValue::Text(v.into()), help)
}

fn small_u32(params: &Params, key: &str, specs: &[ParamSpec]) -> Result<u32> {
    let v = params.count(key, specs)?;
    u32::try_from(v).map_err(|_| QsimError::OutOfRange(format!("`{key}` = {v} is too large")))
}

fn qubit(k: usize) -> PureState {
    PureState::ket(2, k).expect("qubit basis state")
}

fn qubit_plus(sign: f64) -> PureState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    PureState::new(
        FactorSpace::single(2).expect("qubit space"),
        vec![c(h, 0.0), c(sign * h, 0.0)],
    )
    .expect("normalised")
}

/// Collects repeated estimation reports into one run output.
fn aggregate(
    id: &str,
    seed: u64,
    reports: Vec<(bool, Record, f64)>,
    mut summary: Record,
) -> RunOutput {
    let reps = reports.len();
    let required = (REPETITION_PASS_FRACTION * reps as f64).ceil() as usize;
    let passes = reports.iter().filter(|r| r.0).count();
    let metrics: Vec<f64> = reports.iter().map(|r| r.2).collect();
    summary.insert("repetitions", reps);
    summary.insert("passing_repetitions", passes);
    summary.insert("required_repetitions", required);
    summary.insert("max_metric", metrics.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    summary.insert("mean_metric", metrics.iter().sum::<f64>() / reps.max(1) as f64);
    if reps == 1 {
        summary.merge(&reports[0].1);
    }
    summary.insert("experiment", id);
    summary.insert("seed", seed);
    let passed = passes >= required && reps > 0;
    summary.insert("passed", passed);
    RunOutput {
        experiment: id.into(),
        seed,
        verdict: None,
        passed,
        summary,
        trials: reports
            .into_iter()
            .enumerate()
            .map(|(t, (_, r, _))| r.with("trial", t))
            .collect(),
    }
}

fn report_entry(r: &EstimationReport) -> (bool, Record, f64) {
    (r.passed, r.to_record(), r.metric)
}

struct Fpvnem;

impl Experiment for Fpvnem {
    fn id(&self) -> &'static str {
        "fpvnem"
    }
    fn stream_id(&self) -> u64 {
        1
    }
    fn description(&self) -> &'static str {
        "finite-precision entropy meter OPF has no quadratic form"
    }
    fn parameters(&self) -> Vec<ParamSpec> {
        vec![
            int("d", 2, "local dimension, 2..=4"),
            int("m", 3, "meter precision in bits, 1..=8"),
            int("samples", 1000, "random product states checked"),
            ParamSpec::new("entangled_probe", ParamValue::Bool(true), "include entangled probes"),
        ]
    }
    fn execute(&self, p: &Params, seed: u64) -> Result<RunOutput> {
        let s = self.parameters();
        let cfg = FpvnemConfig {
            d: p.count("d", &s)?,
            m: small_u32(p, "m", &s)?,
            samples: p.count("samples", &s)?,
            entangled_probe: p.flag("entangled_probe", &s)?,
        };
        let mut rng = RandomStream::new(seed, self.stream_id(), 0);
        fpvnem_refutation(cfg, &mut rng).map(RunOutput::from_certificate)
    }
}

struct SpodUpdate;

impl Experiment for SpodUpdate {
    fn id(&self) -> &'static str {
        "spod-update"
    }
    fn stream_id(&self) -> u64 {
        2
    }
    fn description(&self) -> &'static str {
        "trivial update of the POVM device admits no linear update map"
    }
    fn parameters(&self) -> Vec<ParamSpec> {
        vec![
            text("effect", "proj0", "POVM element A: proj0, proj1, half_identity, zero, identity"),
            int("calls", 100, "device calls checked for the trivial update"),
        ]
    }
    fn execute(&self, p: &Params, seed: u64) -> Result<RunOutput> {
        let s = self.parameters();
        let effect = MatrixSpec::Named(p.text("effect", &s)?).resolve(2)?;
        let mut rng = RandomStream::new(seed, self.stream_id(), 0);
        spod_update_refutation(&effect, p.count("calls", &s)?, &mut rng)
            .map(RunOutput::from_certificate)
    }
}

struct NoSignalling;

impl Experiment for NoSignalling {
    fn id(&self) -> &'static str {
        "no-signalling"
    }
    fn stream_id(&self) -> u64 {
        3
    }
    fn description(&self) -> &'static str {
        "entropy meter detects a remote Schmidt-basis measurement"
    }
    fn parameters(&self) -> Vec<ParamSpec> {
        vec![
            text("state", "bell", "bell, product or partial"),
            real("p0", 0.36, "first Schmidt weight for the partial state"),
        ]
    }
    fn execute(&self, p: &Params, seed: u64) -> Result<RunOutput> {
        let s = self.parameters();
        let state = match p.text("state", &s)?.as_str() {
            "bell" => PureState::bell(),
            "product" => PureState::basis(FactorSpace::qubits(2)?, &[0, 0])?,
            "partial" => PureState::two_qubit_schmidt(p.real("p0", &s)?)?,
            other => {
                return Err(QsimError::Unknown {
                    kind: "no-signalling state",
                    name: other.into(),
                })
            }
        };
        let mut rng = RandomStream::new(seed, self.stream_id(), 0);
        no_signalling_demo(&state, &mut rng).map(RunOutput::from_certificate)
    }
}

struct Cloning;

impl Experiment for Cloning {
    fn id(&self) -> &'static str {
        "cloning"
    }
    fn stream_id(&self) -> u64 {
        4
    }
    fn description(&self) -> &'static str {
        "readout device copies unknown pure states"
    }
    fn parameters(&self) -> Vec<ParamSpec> {
        vec![
            int("d", 2, "dimension, 2..=4"),
            int("m", 0, "readout precision in bits; 0 is infinite"),
            int("trials", 100, "random states cloned"),
        ]
    }
    fn execute(&self, p: &Params, seed: u64) -> Result<RunOutput> {
        let s = self.parameters();
        let m = small_u32(p, "m", &s)?;
        let cfg = CloningConfig {
            d: p.count("d", &s)?,
            precision: (m > 0).then_some(m),
            trials: p.count("trials", &s)?,
        };
        let mut rng = RandomStream::new(seed, self.stream_id(), 0);
        cloning_demo(cfg, &mut rng).map(RunOutput::from_certificate)
    }
}

struct Tomography;

impl Experiment for Tomography {
    fn id(&self) -> &'static str {
        "tomography"
    }
    fn stream_id(&self) -> u64 {
        5
    }
    fn description(&self) -> &'static str {
        "qubit tomography from informationally complete measurements"
    }
    fn parameters(&self) -> Vec<ParamSpec> {
        vec![
            int("n", 100_000, "total measurement shots"),
            text("source", "zero", "zero, mixed or plus"),
            int("repetitions", 1, "independent seeded repetitions"),
            real("threshold", 0.02, "trace-distance criterion"),
        ]
    }
    fn execute(&self, p: &Params, seed: u64) -> Result<RunOutput> {
        let s = self.parameters();
        let source = match p.text("source", &s)?.as_str() {
            "zero" => Ensemble::pure(qubit(0)),
            "mixed" => Ensemble::uniform(vec![qubit(0), qubit(1)])?,
            "plus" => Ensemble::pure(qubit_plus(1.0)),
            other => {
                return Err(QsimError::Unknown {
                    kind: "tomography source",
                    name: other.into(),
                })
            }
        };
        let n = p.count("n", &s)?;
        let threshold = p.real("threshold", &s)?;
        let reps = p.count("repetitions", &s)?.max(1);
        let reports = repeat(seed, self.stream_id(), reps, |_, rng| {
            tomography_estimate(&source, n, threshold, rng).map(|r| report_entry(&r))
        })?;
        let summary = Record::new().with("source", p.text("source", &s)?);
        Ok(aggregate(self.id(), seed, reports, summary))
    }
}

struct EnsembleReadout;

impl EnsembleReadout {
    fn sources(name: &str) -> Result<Vec<Ensemble>> {
        Ok(match name {
            "three" => vec![Ensemble::new(vec![
                (qubit(0), 0.5),
                (qubit(1), 0.3),
                (qubit_plus(1.0), 0.2),
            ])?],
            "single" => vec![Ensemble::pure(qubit_plus(1.0))],
            "witness" => vec![
                Ensemble::uniform(vec![qubit(0), qubit(1)])?,
                Ensemble::uniform(vec![qubit_plus(1.0), qubit_plus(-1.0)])?,
            ],
            other => {
                return Err(QsimError::Unknown {
                    kind: "ensemble source",
                    name: other.into(),
                })
            }
        })
    }
}

impl Experiment for EnsembleReadout {
    fn id(&self) -> &'static str {
        "ensemble-readout"
    }
    fn stream_id(&self) -> u64 {
        6
    }
    fn description(&self) -> &'static str {
        "ensemble estimation by clustering readout descriptions"
    }
    fn parameters(&self) -> Vec<ParamSpec> {
        vec![
            int("n", 10_000, "draws from the source"),
            text("source", "three", "three, single or witness"),
            int("m", 0, "starting readout precision; 0 is infinite"),
            int("m_step", 1, "precision increase per draw"),
            int("m_cap", 40, "largest precision"),
            int("repetitions", 1, "independent seeded repetitions"),
            real("threshold", 0.05, "total-variation criterion"),
        ]
    }
    fn execute(&self, p: &Params, seed: u64) -> Result<RunOutput> {
        let s = self.parameters();
        let name = p.text("source", &s)?;
        let sources = Self::sources(&name)?;
        let m = small_u32(p, "m", &s)?;
        let schedule = if m == 0 {
            PrecisionSchedule::Infinite
        } else {
            PrecisionSchedule::Increasing {
                start: m,
                step: small_u32(p, "m_step", &s)?,
                cap: small_u32(p, "m_cap", &s)?.max(m),
            }
        };
        let n = p.count("n", &s)?;
        let threshold = p.real("threshold", &s)?;
        let reps = p.count("repetitions", &s)?.max(1);
        let reports = repeat(seed, self.stream_id(), reps, |_, rng| {
            let runs = sources
                .iter()
                .map(|src| ensemble_estimate_readout(src, n, schedule, threshold, rng))
                .collect::<Result<Vec<_>>>()?;
            if runs.len() == 1 {
                return Ok(report_entry(&runs[0]));
            }
            let disjoint = match (&runs[0].estimate, &runs[1].estimate) {
                (Estimate::Ensemble(a), Estimate::Ensemble(b)) => supports_disjoint(a, b),
                _ => false,
            };
            let mut record = Record::new().with("supports_disjoint", disjoint);
            record.merge_prefixed("first", &runs[0].to_record());
            record.merge_prefixed("second", &runs[1].to_record());
            let metric = runs[0].metric.max(runs[1].metric);
            Ok((disjoint && runs.iter().all(|r| r.passed), record, metric))
        })?;
        let summary = Record::new().with("source", name);
        Ok(aggregate(self.id(), seed, reports, summary))
    }
}

struct EnsembleOverlap;

impl Experiment for EnsembleOverlap {
    fn id(&self) -> &'static str {
        "ensemble-overlap"
    }
    fn stream_id(&self) -> u64 {
        7
    }
    fn description(&self) -> &'static str {
        "ensemble estimation with overlap devices on an epsilon-net"
    }
    fn parameters(&self) -> Vec<ParamSpec> {
        vec![
            int("n", 10_000, "draws from the source"),
            text("source", "uniform", "zero, uniform or three"),
            ParamSpec::new(
                "epsilons",
                ParamValue::List(vec![0.05, 0.01]),
                "decreasing net resolutions",
            ),
            int("cap", 100_000, "largest allowed net"),
            int("repetitions", 1, "independent seeded repetitions"),
            real("threshold", 0.05, "total-variation criterion"),
        ]
    }
    fn execute(&self, p: &Params, seed: u64) -> Result<RunOutput> {
        let s = self.parameters();
        let name = p.text("source", &s)?;
        let source = match name.as_str() {
            "zero" => Ensemble::pure(qubit(0)),
            "uniform" => Ensemble::uniform(vec![qubit(0), qubit(1)])?,
            "three" => EnsembleReadout::sources("three")?.remove(0),
            other => {
                return Err(QsimError::Unknown {
                    kind: "ensemble source",
                    name: other.into(),
                })
            }
        };
        let cfg = OverlapConfig {
            epsilons: p.list("epsilons", &s)?,
            n: p.count("n", &s)?,
            cap: p.count("cap", &s)?,
            ..OverlapConfig::default()
        };
        let threshold = p.real("threshold", &s)?;
        let reps = p.count("repetitions", &s)?.max(1);
        let reports = repeat(seed, self.stream_id(), reps, |_, rng| {
            ensemble_estimate_overlap(&source, &cfg, threshold, rng).map(|r| report_entry(&r))
        })?;
        let summary = Record::new().with("source", name);
        Ok(aggregate(self.id(), seed, reports, summary))
    }
}

/// Experiments by id.
#[derive(Clone)]
pub struct ExperimentRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Experiment>>,
}

impl fmt::Debug for ExperimentRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        Self::with_catalog()
    }
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_catalog() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Fpvnem));
        r.register(Arc::new(SpodUpdate));
        r.register(Arc::new(NoSignalling));
        r.register(Arc::new(Cloning));
        r.register(Arc::new(Tomography));
        r.register(Arc::new(EnsembleReadout));
        r.register(Arc::new(EnsembleOverlap));
        r
    }

    pub fn register(&mut self, experiment: Arc<dyn Experiment>) {
        self.entries.insert(experiment.id(), experiment);
    }

    pub fn ids(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn Experiment>> {
        self.entries.get(id).cloned().ok_or_else(|| QsimError::Unknown {
            kind: "experiment",
            name: id.into(),
        })
    }

    pub fn run(&self, id: &str, params: &Params, seed: u64) -> Result<RunOutput> {
        self.get(id)?.run(params, seed)
    }
}
