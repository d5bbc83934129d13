//! Executes validated plans and renders their output.

use std::sync::Arc;

use pqsim_core::devices::{Device, EntropyMeter, Outcome};
use pqsim_core::experiments::{ParamSpec, ParamValue, Params, RunOutput, Verdict};
use pqsim_core::opf::{
    check_closure, check_estimation_assumption, opf_from_device, opf_from_quantum,
    product_form_witness, product_form_witness_with, product_probes, ClosureConfig,
    DeviceFamily, EstimationFamily, MeasurementFamily, QuantumPovmFamily, ScaledFamily,
    QUADRATIC_TOLERANCE, VIOLATION_THRESHOLD,
};
use pqsim_core::qcore::{FactorSpace, PureState, RandomStream};
use pqsim_core::records::{Record, RecordValue};
use pqsim_core::Result;

use crate::config::{Action, CheckKind, OutputFormat, Plan};

const DEVICE_STREAM: u64 = 100;
const CHECK_STREAM: u64 = 200;

/// Parameters accepted by each check.
pub fn check_parameters(check: CheckKind) -> Vec<ParamSpec> {
    let int = |n, v, h| ParamSpec::new(n, ParamValue::Int(v), h);
    let text = |n, v: &str, h| ParamSpec::new(n, ParamValue::Text(v.into()), h);
    match check {
        CheckKind::Closure => vec![
            text("family", "quantum_povm", "quantum_povm, fpvnem or scaled"),
            int("d", 2, "dimension of the measured system"),
            int("background", 2, "dimension of the attached system"),
            int("outcomes", 3, "outcomes of random quantum POVMs"),
            int("m", 3, "meter precision for the fpvnem family"),
            ParamSpec::new("factor", ParamValue::Real(0.9), "scale of the scaled family"),
            int("samples", 1000, "random states per property"),
        ],
        CheckKind::ProductForm => vec![
            text("opf", "fpvnem", "fpvnem or quantum"),
            int("d", 2, "local dimension of the bipartite space"),
            int("m", 3, "meter precision for fpvnem"),
            ParamSpec::new("product_only", ParamValue::Bool(false), "check on product states only"),
        ],
        CheckKind::EstimationAssumption => vec![
            text("family", "readout", "quantum_povm, spod, erd_sevrd, entropy_meter or readout"),
            int("d", 2, "dimension, 2..=4"),
        ],
    }
}

fn outcome_value(o: &Outcome) -> RecordValue {
    match o {
        Outcome::Real(x) => RecordValue::Real(*x),
        Outcome::Label(l) => RecordValue::Int(*l),
        Outcome::Bit(b) => RecordValue::Int(i64::from(*b)),
        Outcome::Matrix { entries, .. } => entries.into(),
        Outcome::Overflow { .. } => RecordValue::Text("overflow".into()),
    }
}

fn run_device(
    device: &Arc<dyn Device>,
    state: &PureState,
    target: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<RunOutput> {
    let mut rng = RandomStream::new(seed, DEVICE_STREAM, 0);
    let dist = device.distribution(state, target)?;
    let mut counts = vec![0u64; dist.entries().len()];
    let mut trials = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let o = device.measure(state, target, &mut rng)?;
        if let Some(k) = dist.position(&o) {
            counts[k] += 1;
        }
        trials.push(Record::new().with("repetition", rep).with("outcome", outcome_value(&o)));
    }
    let mut summary = Record::new()
        .with("device", device.label())
        .with("kind", device.kind().name())
        .with("target", target.iter().map(|&t| t as f64).collect::<Vec<_>>())
        .with("repetitions", repetitions)
        .with("support", dist.entries().len())
        .with("seed", seed);
    for (k, ((o, p), n)) in dist.entries().iter().zip(&counts).enumerate() {
        summary.insert(format!("outcome{k}"), outcome_value(o));
        summary.insert(format!("probability{k}"), *p);
        summary.insert(format!("count{k}"), *n);
    }
    Ok(RunOutput {
        experiment: "device".into(),
        seed,
        verdict: None,
        passed: true,
        summary,
        trials,
    })
}

fn run_closure(params: &Params, seed: u64) -> Result<RunOutput> {
    let s = check_parameters(CheckKind::Closure);
    let outcomes = params.count("outcomes", &s)?;
    let family: Box<dyn MeasurementFamily> = match params.text("family", &s)?.as_str() {
        "quantum_povm" => Box::new(QuantumPovmFamily { outcomes }),
        "fpvnem" => Box::new(DeviceFamily::fpvnem(params.count("m", &s)? as u32)),
        "scaled" => Box::new(ScaledFamily {
            inner: Box::new(QuantumPovmFamily { outcomes }),
            factor: params.real("factor", &s)?,
        }),
        other => {
            return Err(pqsim_core::QsimError::Unknown {
                kind: "measurement family",
                name: other.into(),
            })
        }
    };
    let space = FactorSpace::single(params.count("d", &s)?)?;
    let background = FactorSpace::single(params.count("background", &s)?)?;
    let config = ClosureConfig {
        samples: params.count("samples", &s)?,
        ..ClosureConfig::default()
    };
    let mut rng = RandomStream::new(seed, CHECK_STREAM, 0);
    let r = check_closure(family.as_ref(), &space, &background, config, &mut rng)?;
    let summary = Record::new()
        .with("check", "closure")
        .with("family", r.family.as_str())
        .with("samples", r.samples)
        .with("tolerance", r.tolerance)
        .with("completeness", r.completeness)
        .with("range", r.range)
        .with("mixture", r.mixture)
        .with("unitary", r.unitary)
        .with("system", r.system)
        .with("max_violation", r.max_violation)
        .with("passed", r.passed())
        .with("seed", seed);
    Ok(RunOutput {
        experiment: "check-closure".into(),
        seed,
        verdict: None,
        passed: r.passed(),
        summary,
        trials: Vec::new(),
    })
}

fn run_product_form(params: &Params, seed: u64) -> Result<RunOutput> {
    let s = check_parameters(CheckKind::ProductForm);
    let d = params.count("d", &s)?;
    let space = FactorSpace::new(vec![d, d])?;
    let mut rng = RandomStream::new(seed, CHECK_STREAM, 1);
    let name = params.text("opf", &s)?;
    let f = match name.as_str() {
        "fpvnem" => {
            let meter: Arc<dyn Device> = Arc::new(EntropyMeter::fpvnem(params.count("m", &s)? as u32));
            opf_from_device(meter, space.clone(), &[0], Outcome::Real(0.0))?
        }
        "quantum" => {
            let effect = QuantumPovmFamily { outcomes: 2 }.random_povm(d * d, &mut rng).remove(0);
            opf_from_quantum(space.clone(), &effect)?
        }
        other => {
            return Err(pqsim_core::QsimError::Unknown {
                kind: "OPF",
                name: other.into(),
            })
        }
    };
    let product_only = params.flag("product_only", &s)?;
    let cert = if product_only {
        let fit = product_probes(&space, Some(&mut rng))?;
        let check: Vec<PureState> = (0..4 * d * d)
            .map(|_| PureState::random_product(&space, &mut rng))
            .collect();
        product_form_witness_with(&f, &fit, &check)?
    } else {
        product_form_witness(&f, &mut rng)?
    };
    let verdict = if cert.residual > VIOLATION_THRESHOLD {
        Verdict::ViolationCertified
    } else if cert.residual < QUADRATIC_TOLERANCE {
        Verdict::Consistent
    } else {
        Verdict::Fail
    };
    let summary = Record::new()
        .with("check", "product_form")
        .with("opf", name)
        .with("d", d)
        .with("product_only", product_only)
        .with("residual", cert.residual)
        .with("fit_probes", cert.fit_probes)
        .with("check_probes", cert.check_probes)
        .with("worst_probe", &cert.worst_probe)
        .with("verdict", verdict.as_str())
        .with("seed", seed);
    Ok(RunOutput {
        experiment: "check-product-form".into(),
        seed,
        verdict: Some(verdict),
        passed: verdict != Verdict::Fail,
        summary,
        trials: Vec::new(),
    })
}

fn run_estimation(params: &Params, seed: u64) -> Result<RunOutput> {
    let s = check_parameters(CheckKind::EstimationAssumption);
    let family = EstimationFamily::parse(&params.text("family", &s)?)?;
    let d = params.count("d", &s)?;
    let mut rng = RandomStream::new(seed, CHECK_STREAM, 2);
    let r = check_estimation_assumption(family, d, &mut rng)?;
    let mut summary = Record::new()
        .with("check", "estimation_assumption")
        .with("family", family.id())
        .with("d", d)
        .with("verdict", r.verdict.as_str())
        .with("outcomes", r.outcomes.len())
        .with("reconstruction_error", r.reconstruction_error)
        .with("prediction_error", r.prediction_error)
        .with("seed", seed);
    if let Some(w) = &r.witness {
        summary.insert("witness_probe", &w.probe);
        summary.insert("witness_first_value", w.first_value);
        summary.insert("witness_second_value", w.second_value);
        summary.insert("witness_density_gap", w.density_gap);
        for (name, ens) in [("witness_first", &w.first), ("witness_second", &w.second)] {
            for (k, (state, p)) in ens.members().iter().enumerate() {
                summary.insert(format!("{name}{k}_state"), state);
                summary.insert(format!("{name}{k}_weight"), *p);
            }
        }
    }
    Ok(RunOutput {
        experiment: "check-estimation".into(),
        seed,
        verdict: None,
        passed: true,
        summary,
        trials: Vec::new(),
    })
}

/// Runs a check by kind.
pub fn run_check(check: CheckKind, params: &Params, seed: u64) -> Result<RunOutput> {
    params.validate(check.name(), &check_parameters(check))?;
    match check {
        CheckKind::Closure => run_closure(params, seed),
        CheckKind::ProductForm => run_product_form(params, seed),
        CheckKind::EstimationAssumption => run_estimation(params, seed),
    }
}

/// Executes a validated plan.
pub fn execute(plan: &Plan) -> Result<RunOutput> {
    match &plan.action {
        Action::Device {
            device,
            target,
            repetitions,
            ..
        } => {
            let state = plan.state.as_ref().expect("validated device plans carry a state");
            run_device(device, state, target, *repetitions, plan.seed)
        }
        Action::Experiment { experiment, params } => experiment.run(params, plan.seed),
        Action::Check { check, params } => run_check(*check, params, plan.seed),
    }
}

fn human(v: &RecordValue) -> String {
    match v {
        RecordValue::Real(x) => format!("{x:?}"),
        RecordValue::List(items) => {
            let parts: Vec<String> = items.iter().map(human).collect();
            format!("[{}]", parts.join(", "))
        }
        other => other.to_string(),
    }
}

/// Text or record rendering of a run. Records put the summary first, then
/// one line per trial.
pub fn render(output: &RunOutput, format: OutputFormat) -> String {
    match format {
        OutputFormat::Records => {
            let mut lines = vec![output.summary.clone().with("record", "summary").to_string()];
            lines.extend(
                output
                    .trials
                    .iter()
                    .map(|t| t.clone().with("record", "trial").to_string()),
            );
            lines.join("\n") + "\n"
        }
        OutputFormat::Text => {
            let mut out = format!("{}  seed={}\n", output.experiment, output.seed);
            match output.verdict {
                Some(v) => out.push_str(&format!("verdict: {v}\n")),
                None => out.push_str(&format!(
                    "result: {}\n",
                    if output.passed { "PASS" } else { "FAIL" }
                )),
            }
            for key in output.summary.keys() {
                if let Some(v) = output.summary.get(key) {
                    out.push_str(&format!("  {key} = {}\n", human(v)));
                }
            }
            if !output.trials.is_empty() {
                out.push_str(&format!(
                    "{} per-trial records (use records format to list them)\n",
                    output.trials.len()
                ));
            }
            out
        }
    }
}
