//! Acceptance run: every criterion at its stated tolerance, one PASS/FAIL
//! line each with wall-clock time. Exits non-zero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use pqsim_core::devices::{Device, EntropyMeter, Outcome};
use pqsim_core::experiments::{
    cloning_demo, fpvnem_refutation, no_signalling_demo, spod_update_refutation, CloningConfig,
    ExperimentRegistry, FpvnemConfig, ParamValue, Params, Verdict,
};
use pqsim_core::opf::{check_estimation_assumption, AssumptionVerdict, EstimationFamily};
use pqsim_core::qcore::linalg::outer;
use pqsim_core::qcore::{CMatrix, PureState, RandomStream};

const SEED: u64 = 0x5EED;

/// Short notes for the report line, or the reason for failure.
type Notes = Result<Vec<String>, String>;

struct Criterion {
    number: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Notes,
}

macro_rules! require {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn binary_entropy(p: f64) -> f64 {
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

fn fpvnem() -> Notes {
    let cfg = FpvnemConfig {
        d: 2,
        m: 3,
        samples: 1000,
        entangled_probe: true,
    };
    let cert = err(fpvnem_refutation(cfg, &mut RandomStream::new(SEED, 1, 0)))?;
    let e = &cert.evidence;
    let count = e.int("outcome_count").unwrap_or(i64::MAX);
    let bound = e.int("outcome_bound").unwrap_or(-1);
    // ceil(2^3 · log2 2) + 1
    require!(bound == 9, "outcome bound {bound}, expected 9");
    require!(count <= 9, "{count} outcomes exceed the bound");
    let deviation = e.real("product_max_deviation").unwrap_or(f64::NAN);
    require!(deviation <= 1e-9, "f0 deviates from 1 by {deviation} on product states");
    let bell = e.real("entangled_value").unwrap_or(f64::NAN);
    require!(bell == 0.0, "f0(Bell) = {bell}");

    // independent read of the same outcome straight from the meter
    let direct = err(EntropyMeter::fpvnem(3).distribution(&PureState::bell(), &[0]))?
        .probability_of(&Outcome::Real(0.0));
    require!(direct == 0.0, "meter gives f0(Bell) = {direct}");

    let residual = e.real("residual").unwrap_or(f64::NAN);
    require!(residual > 0.1, "witness residual {residual}");
    require!(cert.verdict == Verdict::ViolationCertified, "verdict {}", cert.verdict);
    Ok(vec![
        format!("outcomes={count}<=9"),
        format!("product_dev={deviation:.1e}"),
        format!("f0(bell)={bell}"),
        format!("residual={residual:.3}"),
        cert.verdict.to_string(),
    ])
}

fn spod() -> Notes {
    let mut rng = RandomStream::new(SEED, 2, 0);
    let p0 = outer(err(PureState::ket(2, 0))?.amplitudes());
    let cert = err(spod_update_refutation(&p0, 100, &mut rng))?;
    let e = &cert.evidence;
    require!(e.bool("state_unchanged") == Some(true), "state changed across calls");
    let fid = e.real("min_fidelity").unwrap_or(f64::NAN);
    require!((1.0 - fid).abs() <= 1e-12, "fidelity {fid}");
    let residual = e.real("residual").unwrap_or(f64::NAN);
    require!(residual > 0.1, "residual {residual} for |0><0|");
    require!(cert.verdict == Verdict::ViolationCertified, "verdict {}", cert.verdict);

    let half = CMatrix::identity(2, 2).scale(0.5);
    let control = err(spod_update_refutation(&half, 100, &mut rng))?;
    let control_residual = control.evidence.real("residual").unwrap_or(f64::NAN);
    require!(control_residual < 1e-10, "control residual {control_residual}");
    require!(control.verdict == Verdict::Consistent, "control verdict {}", control.verdict);
    Ok(vec![
        format!("fidelity={fid}"),
        format!("residual(P0)={residual:.3}"),
        format!("residual(I/2)={control_residual:.1e}"),
    ])
}

fn no_signalling() -> Notes {
    let mut rng = RandomStream::new(SEED, 3, 0);
    let bell = err(no_signalling_demo(&PureState::bell(), &mut rng))?;
    let before = bell.evidence.real("before").unwrap_or(f64::NAN);
    let after = bell.evidence.real("after").unwrap_or(f64::NAN);
    require!((before - 1.0).abs() <= 1e-10, "Bell reads {before} before");
    require!(after.abs() <= 1e-10, "Bell reads {after} after");

    let partial = err(no_signalling_demo(&err(PureState::two_qubit_schmidt(0.36))?, &mut rng))?;
    let p_before = partial.evidence.real("before").unwrap_or(f64::NAN);
    let oracle = binary_entropy(0.36);
    require!((p_before - 0.9427).abs() <= 1e-3, "partial reads {p_before}");
    require!((p_before - oracle).abs() <= 1e-10, "partial {p_before} vs oracle {oracle}");
    Ok(vec![
        format!("bell={before}->{after}"),
        format!("partial={p_before:.4}"),
    ])
}

fn cloning() -> Notes {
    let mut rng = RandomStream::new(SEED, 4, 0);
    let exact = err(cloning_demo(
        CloningConfig {
            d: 2,
            precision: None,
            trials: 100,
        },
        &mut rng,
    ))?;
    let min = exact.evidence.real("min_fidelity").unwrap_or(f64::NAN);
    require!(min >= 1.0 - 1e-9, "infinite precision min fidelity {min}");
    require!(exact.verdict == Verdict::ViolationCertified, "verdict {}", exact.verdict);

    let finite = err(cloning_demo(
        CloningConfig {
            d: 2,
            precision: Some(8),
            trials: 100,
        },
        &mut rng,
    ))?;
    let passing = finite.evidence.int("passing_trials").unwrap_or(0);
    let threshold = finite.evidence.real("fidelity_threshold").unwrap_or(f64::NAN);
    require!((threshold - (1.0 - 10.0 / 256.0)).abs() < 1e-15, "threshold {threshold}");
    require!(passing >= 95, "m=8: {passing}/100 trials above {threshold}");
    Ok(vec![format!("min_fidelity={min:.12}"), format!("m8_passing={passing}/100")])
}

fn params(entries: &[(&str, ParamValue)]) -> Params {
    entries
        .iter()
        .fold(Params::new(), |p, (k, v)| p.with(k, v.clone()))
}

fn tomography() -> Notes {
    let registry = ExperimentRegistry::with_catalog();
    let mut notes = Vec::new();
    for source in ["zero", "mixed", "plus"] {
        let out = err(registry.run(
            "tomography",
            &params(&[
                ("n", ParamValue::Int(100_000)),
                ("source", ParamValue::Text(source.into())),
                ("repetitions", ParamValue::Int(100)),
                ("threshold", ParamValue::Real(0.02)),
            ]),
            SEED,
        ))?;
        let passing = out.summary.int("passing_repetitions").unwrap_or(0);
        let worst = out.summary.real("max_metric").unwrap_or(f64::NAN);
        require!(passing >= 95, "{source}: {passing}/100 repetitions below 0.02");
        notes.push(format!("{source}={passing}/100(max_td={worst:.4})"));
    }
    Ok(notes)
}

fn ensemble_readout() -> Notes {
    let registry = ExperimentRegistry::with_catalog();
    let three = err(registry.run(
        "ensemble-readout",
        &params(&[
            ("n", ParamValue::Int(10_000)),
            ("source", ParamValue::Text("three".into())),
            ("repetitions", ParamValue::Int(100)),
            ("threshold", ParamValue::Real(0.05)),
        ]),
        SEED,
    ))?;
    let passing = three.summary.int("passing_repetitions").unwrap_or(0);
    require!(passing >= 95, "three-member ensemble: {passing}/100 below 0.05");

    let witness = err(registry.run(
        "ensemble-readout",
        &params(&[
            ("n", ParamValue::Int(10_000)),
            ("source", ParamValue::Text("witness".into())),
            ("repetitions", ParamValue::Int(100)),
        ]),
        SEED,
    ))?;
    let disjoint = witness
        .trials
        .iter()
        .filter(|t| t.bool("supports_disjoint") == Some(true))
        .count();
    require!(witness.trials.len() == 100, "{} witness trials", witness.trials.len());
    require!(disjoint == 100, "witness supports disjoint in {disjoint}/100");
    Ok(vec![
        format!("three={passing}/100(max_tv={:.4})", three.summary.real("max_metric").unwrap_or(f64::NAN)),
        format!("witness_disjoint={disjoint}/100"),
    ])
}

fn estimation_verdicts() -> Notes {
    let mut rng = RandomStream::new(SEED, 7, 0);
    let mut notes = Vec::new();
    for family in [EstimationFamily::Spod, EstimationFamily::ErdSevrd, EstimationFamily::QuantumPovm] {
        let check = err(check_estimation_assumption(family, 2, &mut rng))?;
        require!(check.verdict == AssumptionVerdict::Satisfied, "{family}: {}", check.verdict);
        require!(check.outcomes.len() == 3, "{family}: {} outcomes", check.outcomes.len());
        notes.push(format!("{family}={}({})", check.verdict, check.outcomes.len()));
    }
    let meter = err(check_estimation_assumption(EstimationFamily::EntropyMeter, 2, &mut rng))?;
    require!(
        meter.verdict == AssumptionVerdict::SatisfiedTrivially,
        "entropy_meter: {}",
        meter.verdict
    );
    notes.push(format!("entropy_meter={}", meter.verdict));

    let readout = err(check_estimation_assumption(EstimationFamily::Readout, 2, &mut rng))?;
    require!(readout.verdict == AssumptionVerdict::Fails, "readout: {}", readout.verdict);
    let w = readout.witness.as_ref().ok_or("readout check gave no witness")?;
    let values = (w.first_value, w.second_value);
    require!(
        (values.0 - 0.5).abs() < 1e-12 && values.1.abs() < 1e-12,
        "witness values {values:?}"
    );
    require!(w.density_gap < 1e-12, "witness ensembles differ in density by {}", w.density_gap);
    notes.push(format!("readout={}({}vs{})", readout.verdict, values.0, values.1));
    Ok(notes)
}

fn property_suite() -> Notes {
    let mut failures = Vec::new();
    let invariants = common::invariant_suite();
    for (name, check) in &invariants {
        let first_failure = (0..1000u64).find_map(|i| check(0xA11CE + i).err());
        if let Some(e) = first_failure {
            failures.push(format!("{name}: {e}"));
        }
    }
    if let Err(e) = common::quantum_povm_injective(0x1D) {
        failures.push(format!("quantum_povm_injective: {e}"));
    }
    let chi = common::chi_square_suite();
    let mut min_p: f64 = 1.0;
    for (name, case) in &chi {
        for i in 0..4 {
            match case(0xC41 + i) {
                Ok(p) if p > common::P_MIN => min_p = min_p.min(p),
                Ok(p) => failures.push(format!("{name}#{i}: chi-square p = {p:e}")),
                Err(e) => failures.push(format!("{name}#{i}: {e}")),
            }
        }
    }
    let limits = common::limit_suite();
    for (i, (name, check)) in limits.iter().enumerate() {
        if let Err(e) = check(0x11 + i as u64) {
            failures.push(format!("limit {name}: {e}"));
        }
    }
    require!(failures.is_empty(), "{}", failures.join("; "));
    Ok(vec![
        format!("invariants={}x1000", invariants.len() + 1),
        format!("chi_square={}x4(min_p={min_p:.3})", chi.len()),
        format!("limits={}x{}", limits.len(), common::LIMIT_CASES),
    ])
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { number: 1, name: "fpvnem refutation", budget: Duration::from_secs(10), run: fpvnem },
        Criterion { number: 2, name: "spod state-update refutation", budget: Duration::from_secs(5), run: spod },
        Criterion { number: 3, name: "no-signalling violation", budget: Duration::from_secs(1), run: no_signalling },
        Criterion { number: 4, name: "cloning", budget: Duration::from_secs(5), run: cloning },
        Criterion { number: 5, name: "tomography", budget: Duration::from_secs(60), run: tomography },
        Criterion { number: 6, name: "ensemble estimation via readout", budget: Duration::from_secs(60), run: ensemble_readout },
        Criterion { number: 7, name: "estimation-assumption verdicts", budget: Duration::from_secs(10), run: estimation_verdicts },
        Criterion { number: 8, name: "property suite", budget: Duration::from_secs(120), run: property_suite },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let line = match result {
            Ok(notes) if elapsed <= c.budget => format!("PASS criterion {} {}: {}", c.number, c.name, notes.join(" ")),
            Ok(notes) => {
                failed += 1;
                format!(
                    "FAIL criterion {} {}: over budget {:.0?} ({})",
                    c.number,
                    c.name,
                    c.budget,
                    notes.join(" ")
                )
            }
            Err(e) => {
                failed += 1;
                format!("FAIL criterion {} {}: {e}", c.number, c.name)
            }
        };
        println!("{line} ({:.2?})", elapsed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
