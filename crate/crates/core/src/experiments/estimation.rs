use rand_distr::{Binomial, Distribution};

use super::harness::{wilson_interval, WILSON_Z95};
use crate::devices::{overlap_test, readout_density, Outcome};
use crate::error::{QsimError, Result};
use crate::opf::{informationally_complete_projectors, linear_inversion};
use crate::qcore::linalg::{c, hermitian_eigen, max_abs_diff, trace_product};
use crate::qcore::{CMatrix, CVector, DensityMatrix, Ensemble, FactorSpace, PureState, RandomStream};
use crate::records::Record;

const MIN_TRIALS: usize = 100;
const CONFIDENCE: f64 = 0.95;
/// Infinite-precision readouts are the same description when this close.
const IDENTICAL_DESCRIPTION: f64 = 1e-9;
/// Estimated states closer than this to each other are merged.
const SAME_STATE: f64 = 1e-9;

/// Estimated source.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Density(DensityMatrix),
    Ensemble(Vec<(PureState, f64)>),
}

/// Estimate plus the statistics it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub experiment: String,
    pub estimate: Estimate,
    /// Observed frequency per outcome (or per recovered member).
    pub frequencies: Vec<f64>,
    /// Wilson interval per frequency.
    pub intervals: Vec<(f64, f64)>,
    /// Trials per outcome.
    pub trials: Vec<u64>,
    pub metric_name: &'static str,
    pub metric: f64,
    pub threshold: f64,
    pub confidence: f64,
    /// True only when `metric < threshold`.
    pub passed: bool,
    pub extra: Record,
}

impl EstimationReport {
    pub fn to_record(&self) -> Record {
        let mut r = self.extra.clone();
        r.insert("experiment", self.experiment.as_str());
        r.insert("metric_name", self.metric_name);
        r.insert("metric", self.metric);
        r.insert("threshold", self.threshold);
        r.insert("confidence", self.confidence);
        r.insert("passed", self.passed);
        r.insert("frequencies", self.frequencies.clone());
        r.insert("interval_low", self.intervals.iter().map(|i| i.0).collect::<Vec<_>>());
        r.insert("interval_high", self.intervals.iter().map(|i| i.1).collect::<Vec<_>>());
        r.insert("trials", self.trials.iter().map(|&t| t as f64).collect::<Vec<_>>());
        match &self.estimate {
            Estimate::Density(rho) => r.insert("estimate", rho.matrix()),
            Estimate::Ensemble(members) => {
                r.insert("members", members.len());
                for (k, (s, w)) in members.iter().enumerate() {
                    r.insert(format!("member{k}_state"), s);
                    r.insert(format!("member{k}_weight"), *w);
                }
            }
        }
        r
    }
}

fn require_trials(n: usize) -> Result<()> {
    if n < MIN_TRIALS {
        return Err(QsimError::OutOfRange(format!(
            "{n} trials is too few for 95% Wilson intervals; need at least {MIN_TRIALS}"
        )));
    }
    Ok(())
}

fn require_qubit(space: &FactorSpace) -> Result<()> {
    if space.total_dim() != 2 {
        return Err(QsimError::DimensionMismatch {
            expected: 2,
            found: space.total_dim(),
        });
    }
    Ok(())
}

/// Quantum tomography: `N` shots split evenly over the `d² − 1`
/// informationally complete two-outcome measurements `{P_i, I − P_i}`, linear
/// inversion, then projection onto the density matrices.
pub fn tomography_estimate(
    source: &Ensemble,
    n: usize,
    threshold: f64,
    rng: &mut RandomStream,
) -> Result<EstimationReport> {
    require_qubit(source.space())?;
    require_trials(n)?;
    let truth = source.density_matrix();
    let projectors = informationally_complete_projectors(2);
    let k = projectors.len();
    let mut frequencies = Vec::with_capacity(k);
    let mut intervals = Vec::with_capacity(k);
    let mut trials = Vec::with_capacity(k);
    for (i, p) in projectors.iter().enumerate() {
        let shots = (n / k + usize::from(i < n % k)) as u64;
        let prob = trace_product(p, truth.matrix()).re.clamp(0.0, 1.0);
        // Born counts: a binomial draw is the law of `shots` independent
        // measurements of `{P, I − P}` on states drawn from the source.
        let hits = Binomial::new(shots, prob)
            .map_err(|e| QsimError::InvalidParameters(e.to_string()))?
            .sample(rng);
        frequencies.push(hits as f64 / shots as f64);
        intervals.push(wilson_interval(hits, shots, WILSON_Z95));
        trials.push(shots);
    }
    let raw = linear_inversion(&projectors, &frequencies)?;
    let estimate = DensityMatrix::project_psd(&raw)?;
    let metric = estimate.trace_distance(&truth);
    let extra = Record::new()
        .with("n", n)
        .with("truth", truth.matrix())
        .with("raw_inversion", &raw);
    Ok(EstimationReport {
        experiment: "tomography".into(),
        estimate: Estimate::Density(estimate),
        frequencies,
        intervals,
        trials,
        metric_name: "trace_distance",
        metric,
        threshold,
        confidence: CONFIDENCE,
        passed: metric < threshold,
        extra,
    })
}

/// Readout precision per draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecisionSchedule {
    Infinite,
    /// Draw `i` uses `min(start + step·i, cap)` bits.
    Increasing { start: u32, step: u32, cap: u32 },
}

impl Default for PrecisionSchedule {
    fn default() -> Self {
        PrecisionSchedule::Increasing {
            start: 4,
            step: 1,
            cap: 40,
        }
    }
}

impl PrecisionSchedule {
    pub fn precision_at(&self, draw: usize) -> Option<u32> {
        match *self {
            PrecisionSchedule::Infinite => None,
            PrecisionSchedule::Increasing { start, step, cap } => {
                let m = u64::from(start) + u64::from(step) * draw as u64;
                Some(m.min(u64::from(cap)).max(1) as u32)
            }
        }
    }
}

/// Max component distance after aligning the global phase of `v` to `u`.
fn aligned_distance(u: &CVector, v: &CVector) -> f64 {
    let inner = v.dotc(u);
    let phase = if inner.norm() > 0.0 {
        inner / inner.norm()
    } else {
        c(1.0, 0.0)
    };
    u.iter()
        .zip(v.iter())
        .map(|(a, b)| (a - b * phase).norm())
        .fold(0.0, f64::max)
}

fn top_eigenvector(m: &CMatrix) -> CVector {
    let (_, vectors) = hermitian_eigen(m);
    vectors.column(m.nrows() - 1).into_owned()
}

struct Cluster {
    description: CMatrix,
    vector: CVector,
    precision: Option<u32>,
    count: u64,
}

/// Matches each estimated member to the closest true member. Returns the
/// total variation `Σ_j |p_j − p^e_j|`, where `p^e_j` sums the weights
/// matched to member `j`, and the worst phase-aligned component error.
fn match_to_truth(estimate: &[(PureState, f64)], truth: &Ensemble) -> (f64, f64) {
    let mut matched = vec![0.0; truth.len()];
    let mut worst: f64 = 0.0;
    for (s, w) in estimate {
        let (j, _) = truth
            .members()
            .iter()
            .enumerate()
            .map(|(j, (t, _))| (j, t.overlap(s)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        matched[j] += w;
        worst = worst.max(aligned_distance(truth.members()[j].0.amplitudes(), s.amplitudes()));
    }
    let tv = truth
        .weights()
        .iter()
        .zip(&matched)
        .map(|(p, q)| (p - q).abs())
        .sum();
    (tv, worst)
}

fn ensemble_report(
    experiment: &str,
    members: Vec<(PureState, u64)>,
    n: usize,
    truth: &Ensemble,
    threshold: f64,
    mut extra: Record,
) -> EstimationReport {
    let total = n as u64;
    let frequencies: Vec<f64> = members.iter().map(|(_, k)| *k as f64 / n as f64).collect();
    let intervals = members
        .iter()
        .map(|(_, k)| wilson_interval(*k, total, WILSON_Z95))
        .collect();
    let trials = members.iter().map(|(_, k)| *k).collect();
    let estimate: Vec<(PureState, f64)> = members
        .into_iter()
        .zip(&frequencies)
        .map(|((s, _), &f)| (s, f))
        .collect();
    let (metric, state_error) = match_to_truth(&estimate, truth);
    extra.insert("n", n);
    extra.insert("max_state_error", state_error);
    EstimationReport {
        experiment: experiment.into(),
        estimate: Estimate::Ensemble(estimate),
        frequencies,
        intervals,
        trials,
        metric_name: "total_variation",
        metric,
        threshold,
        confidence: CONFIDENCE,
        passed: metric < threshold,
        extra,
    }
}

/// Ensemble estimation with the readout device: draw `N` members, read each
/// out, and group identical descriptions. At finite precision descriptions
/// are grouped by their top eigenvector, with tolerance `2^-(m−1)` at the
/// coarser of the two precisions involved.
pub fn ensemble_estimate_readout(
    source: &Ensemble,
    n: usize,
    schedule: PrecisionSchedule,
    threshold: f64,
    rng: &mut RandomStream,
) -> Result<EstimationReport> {
    require_trials(n)?;
    let target: Vec<usize> = (0..source.space().num_factors()).collect();
    let mut clusters: Vec<Cluster> = Vec::new();
    for draw in 0..n {
        let (psi, _) = &source.members()[source.sample_index(rng)];
        let m = schedule.precision_at(draw);
        let description = match readout_density(psi, &target, None, m)? {
            Outcome::Matrix { entries, .. } => entries,
            other => {
                return Err(QsimError::InvalidParameters(format!(
                    "readout returned {other:?}"
                )))
            }
        };
        let vector = top_eigenvector(&description);
        let hit = clusters.iter_mut().find(|cl| match (m, cl.precision) {
            (None, None) => max_abs_diff(&cl.description, &description) < IDENTICAL_DESCRIPTION,
            _ => {
                let coarse = m.into_iter().chain(cl.precision).min().unwrap_or(1);
                aligned_distance(&cl.vector, &vector) < 2f64.powi(1 - coarse as i32)
            }
        });
        match hit {
            Some(cl) => {
                cl.count += 1;
                // Keep the sharpest description as the representative.
                let sharper = match (m, cl.precision) {
                    (None, Some(_)) => true,
                    (Some(a), Some(b)) => a > b,
                    _ => false,
                };
                if sharper {
                    cl.description = description;
                    cl.vector = vector;
                    cl.precision = m;
                }
            }
            None => clusters.push(Cluster {
                description,
                vector,
                precision: m,
                count: 1,
            }),
        }
    }
    let members = clusters
        .into_iter()
        .map(|cl| Ok((PureState::normalized(source.space().clone(), cl.vector)?, cl.count)))
        .collect::<Result<Vec<_>>>()?;
    let mut extra = Record::new();
    match schedule {
        PrecisionSchedule::Infinite => extra.insert("precision", "infinite"),
        PrecisionSchedule::Increasing { start, step, cap } => {
            extra.insert("precision_start", start);
            extra.insert("precision_step", step);
            extra.insert("precision_cap", cap);
        }
    }
    Ok(ensemble_report("ensemble-readout", members, n, source, threshold, extra))
}

/// True when no state of `a` lies on the same ray as a state of `b`.
pub fn supports_disjoint(a: &[(PureState, f64)], b: &[(PureState, f64)]) -> bool {
    a.iter()
        .all(|(s, _)| b.iter().all(|(t, _)| s.overlap(t) < 1.0 - 1e-6))
}

/// `n` Bloch vectors on a Fibonacci spiral; near-uniform coverage.
pub fn fibonacci_net(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

fn bloch_state(r: &[f64; 3]) -> Result<PureState> {
    let theta = r[2].clamp(-1.0, 1.0).acos();
    let phi = r[1].atan2(r[0]);
    let (s, co) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    PureState::new(
        FactorSpace::single(2)?,
        vec![c(co, 0.0), c(s * phi.cos(), s * phi.sin())],
    )
}

fn normalize3(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 1e-12).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

fn angle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0).acos()
}

/// Bloch angle at which two pure states have overlap `1 − ε`.
fn net_radius(eps: f64) -> f64 {
    2.0 * (1.0 - eps).sqrt().acos()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapConfig {
    /// Decreasing resolutions, one probing round each.
    pub epsilons: Vec<f64>,
    pub n: usize,
    /// Largest net any round may use.
    pub cap: usize,
    /// Round `t` uses `⌈c / ε_t⌉` net points.
    pub net_constant: f64,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.05, 0.01],
            n: 10_000,
            cap: 100_000,
            net_constant: 4.0,
        }
    }
}

struct Localisation {
    estimate: Option<[f64; 3]>,
    probes: usize,
}

/// Locates one unknown qubit state with hard overlap devices `SOD(φ, 1 − ε)`.
/// The first round probes the whole net; later rounds only net points within
/// `θ_{t−1} + θ_t` of the running estimate, which still contains every point
/// that can fire.
fn localise(
    psi: &PureState,
    nets: &[(f64, Vec<[f64; 3]>)],
    rng: &mut RandomStream,
) -> Result<Localisation> {
    let mut estimate: Option<[f64; 3]> = None;
    let mut previous_radius = std::f64::consts::PI;
    let mut probes = 0;
    for (eps, net) in nets {
        let radius = net_radius(*eps);
        let mut sum = [0.0; 3];
        let mut fired = 0;
        for point in net {
            if let Some(e) = &estimate {
                if angle(e, point) > previous_radius + radius {
                    continue;
                }
            }
            probes += 1;
            let phi = bloch_state(point)?;
            if overlap_test(psi, &[0], &phi, 1.0 - eps, None, rng)? == Outcome::Bit(1) {
                fired += 1;
                for k in 0..3 {
                    sum[k] += point[k];
                }
            }
        }
        if fired == 0 {
            break;
        }
        estimate = normalize3(sum).or(estimate);
        previous_radius = radius;
    }
    Ok(Localisation { estimate, probes })
}

/// Ensemble estimation with overlap devices on qubits. Every draw is
/// localised by successively finer ε-nets; equal estimates are pooled.
/// The hard device is deterministic, so each member is localised once and
/// the result reused for later draws of the same member.
pub fn ensemble_estimate_overlap(
    source: &Ensemble,
    cfg: &OverlapConfig,
    threshold: f64,
    rng: &mut RandomStream,
) -> Result<EstimationReport> {
    require_qubit(source.space())?;
    require_trials(cfg.n)?;
    if cfg.epsilons.is_empty() {
        return Err(QsimError::InvalidParameters("epsilon schedule is empty".into()));
    }
    if let Some(e) = cfg.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(QsimError::OutOfRange(format!("epsilon {e} must lie in (0, 1)")));
    }
    let sizes: Vec<usize> = cfg
        .epsilons
        .iter()
        .map(|e| (cfg.net_constant / e).ceil() as usize)
        .collect();
    let largest = sizes.iter().copied().max().unwrap_or(0);
    let mut extra = Record::new()
        .with("epsilons", cfg.epsilons.clone())
        .with("net_cap", cfg.cap)
        .with("largest_net", largest);
    if largest > cfg.cap {
        extra.insert(
            "note",
            format!("net of {largest} points exceeds the cap of {}", cfg.cap),
        );
        return Ok(EstimationReport {
            experiment: "ensemble-overlap".into(),
            estimate: Estimate::Ensemble(Vec::new()),
            frequencies: Vec::new(),
            intervals: Vec::new(),
            trials: Vec::new(),
            metric_name: "total_variation",
            metric: f64::INFINITY,
            threshold,
            confidence: CONFIDENCE,
            passed: false,
            extra,
        });
    }
    let nets: Vec<(f64, Vec<[f64; 3]>)> = cfg
        .epsilons
        .iter()
        .zip(&sizes)
        .map(|(&e, &s)| (e, fibonacci_net(s)))
        .collect();

    let mut memo: Vec<Option<Option<PureState>>> = vec![None; source.len()];
    let mut members: Vec<(PureState, u64)> = Vec::new();
    let mut unlocated = 0u64;
    let mut probes = 0usize;
    for _ in 0..cfg.n {
        let idx = source.sample_index(rng);
        if memo[idx].is_none() {
            let loc = localise(&source.members()[idx].0, &nets, &mut rng.fork("sod"))?;
            probes += loc.probes;
            memo[idx] = Some(loc.estimate.as_ref().map(bloch_state).transpose()?);
        }
        match memo[idx].as_ref().and_then(|e| e.as_ref()) {
            Some(state) => match members.iter_mut().find(|(s, _)| s.same_ray(state, SAME_STATE)) {
                Some((_, k)) => *k += 1,
                None => members.push((state.clone(), 1)),
            },
            None => unlocated += 1,
        }
    }
    extra.insert("unlocated_draws", unlocated);
    extra.insert("device_calls", probes);
    let mut report = ensemble_report("ensemble-overlap", members, cfg.n, source, threshold, extra);
    // Draws that no net point caught count against the estimate.
    report.metric += unlocated as f64 / cfg.n as f64;
    report.passed = report.metric < threshold;
    Ok(report)
}
