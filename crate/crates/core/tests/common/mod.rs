//! Invariant checks shared by the proptest suites and the acceptance target.
//!
//! Each check draws its random instance from a seed and returns `Err` with a
//! description on the first violated bound. Oracles here are written against
//! raw `nalgebra` arithmetic, not the crate's own helpers, wherever that is
//! practical.

#![allow(dead_code)]

use std::sync::Arc;

use pqsim_core::devices::{
    entropy_meter, readout_density, BasisSelect, Device, EigenVariant,
    EigenvalueSampler, EntanglementAnalyser, EntropyCertifier, EntropyMeter, ExpectationReadout,
    FunctionReadout, MatrixFunction, Outcome, OverlapTest, PovmSampler, Readout,
    UncertaintySampler,
};
use pqsim_core::opf::{
    check_estimation_assumption, compose_system, compose_unitary, mix, opf_from_device,
    opf_from_quantum, product_form_witness, EstimationFamily, FullMeasurement, Opf,
    QuantumPovmFamily,
};
use pqsim_core::qcore::linalg::{c, random_hermitian, random_unitary, standard_complex};
use pqsim_core::qcore::{
    born_probabilities, entropy, partial_trace, quantize, renyi_entropy, schmidt_decompose,
    CMatrix, DensityMatrix, FactorSpace, HermitianObservable, OrthonormalBasis, PovmSet,
    PureState, RandomStream, C64,
};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub type Check = fn(u64) -> Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

pub fn stream(seed: u64) -> RandomStream {
    RandomStream::new(seed, 0xC0FFEE, 0)
}

/// Spaces with total dimension at most 16.
const SPACES: &[&[usize]] = &[
    &[2, 2],
    &[2, 3],
    &[3, 2],
    &[2, 2, 2],
    &[3, 3],
    &[2, 4],
    &[4, 2],
    &[4, 4],
    &[2, 2, 2, 2],
    &[2, 2, 3],
    &[3, 5],
    &[2, 7],
];

pub fn random_space(rng: &mut RandomStream) -> FactorSpace {
    let dims = SPACES[rng.random_range(0..SPACES.len())];
    FactorSpace::new(dims.to_vec()).unwrap()
}

fn random_selection(n: usize, rng: &mut RandomStream) -> Vec<usize> {
    loop {
        let keep: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if !keep.is_empty() && keep.len() < n {
            return keep;
        }
    }
}

/// Random density matrix of rank between 1 and `d`.
pub fn random_density(d: usize, rng: &mut RandomStream) -> DensityMatrix {
    let rank = rng.random_range(1..=d);
    let g = CMatrix::from_fn(d, rank, |_, _| standard_complex(rng));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.unscale(tr)).unwrap()
}

/// Random qubit-pair state whose first factor has reduced state `rho` up to
/// a purification: `Σ √λ_i |e_i⟩|i⟩`.
pub fn purification(rho: &DensityMatrix) -> PureState {
    let d = rho.dim();
    let eig = rho.matrix().clone().symmetric_eigen();
    let mut v = nalgebra::DVector::<C64>::zeros(d * d);
    for i in 0..d {
        let w = eig.eigenvalues[i].max(0.0).sqrt();
        for a in 0..d {
            v[a * d + i] += eig.eigenvectors[(a, i)] * c(w, 0.0);
        }
    }
    PureState::normalized(FactorSpace::new(vec![d, d]).unwrap(), v).unwrap()
}

fn hermitian_gap(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn entry_gap(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Naive index-summation partial trace.
pub fn partial_trace_oracle(state: &PureState, keep: &[usize]) -> CMatrix {
    let dims = state.space().dims();
    let n = dims.len();
    let digits = |mut idx: usize| {
        let mut out = vec![0; n];
        for f in (0..n).rev() {
            out[f] = idx % dims[f];
            idx /= dims[f];
        }
        out
    };
    let kept_dim: usize = keep.iter().map(|&f| dims[f]).product();
    let kept_index = |digs: &[usize]| keep.iter().fold(0, |acc, &f| acc * dims[f] + digs[f]);
    let psi = state.amplitudes();
    let mut rho = CMatrix::zeros(kept_dim, kept_dim);
    for x in 0..psi.len() {
        let dx = digits(x);
        for y in 0..psi.len() {
            let dy = digits(y);
            if (0..n).any(|f| !keep.contains(&f) && dx[f] != dy[f]) {
                continue;
            }
            rho[(kept_index(&dx), kept_index(&dy))] += psi[x] * psi[y].conj();
        }
    }
    rho
}

// ---- qcore ----

pub fn partial_trace_is_density(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let space = random_space(&mut rng);
    let keep = random_selection(space.num_factors(), &mut rng);
    let psi = PureState::random(space, &mut rng);
    let rho = ok(partial_trace(&psi, &keep))?;
    let m = rho.matrix();
    ensure!(hermitian_gap(m) <= 1e-9, "not Hermitian: {}", hermitian_gap(m));
    ensure!((m.trace().re - 1.0).abs() <= 1e-9, "trace {}", m.trace());
    ensure!(min_eigenvalue(m) >= -1e-9, "negative eigenvalue {}", min_eigenvalue(m));
    let oracle = partial_trace_oracle(&psi, &keep);
    ensure!(entry_gap(m, &oracle) <= 1e-12, "oracle gap {}", entry_gap(m, &oracle));
    Ok(())
}

pub fn schmidt_matches_reduced(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let space = random_space(&mut rng);
    let cut = random_selection(space.num_factors(), &mut rng);
    let psi = if rng.random_bool(0.2) {
        PureState::random_product(&space, &mut rng)
    } else {
        PureState::random(space, &mut rng)
    };
    let s = ok(schmidt_decompose(&psi, &cut))?;
    let reduced = sorted_desc(
        partial_trace_oracle(&psi, &cut)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect(),
    );
    for (i, &ev) in reduced.iter().enumerate() {
        let w = s.weights.get(i).copied().unwrap_or(0.0);
        ensure!((w - ev).abs() <= 1e-9, "weight {i}: {w} vs eigenvalue {ev}");
    }
    ensure!(s.weights.iter().all(|&p| p > 0.0), "non-positive weight");
    let total = s.weights.iter().fold(0.0, |a, b| a + b);
    ensure!((total - 1.0).abs() <= 1e-9, "weights sum to {total}");
    for states in [&s.left_states, &s.right_states] {
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let g = a.amplitudes().dotc(b.amplitudes());
                let want = if i == j { 1.0 } else { 0.0 };
                ensure!((g - c(want, 0.0)).norm() <= 1e-8, "Gram entry ({i},{j}) = {g}");
            }
        }
    }
    let rebuilt = PureState::normalized(psi.space().clone(), s.reconstruct()).map_err(|e| e.to_string())?;
    let fid = rebuilt.overlap(&psi);
    ensure!((fid - 1.0).abs() <= 1e-8, "reconstruction overlap {fid}");
    Ok(())
}

pub fn born_sums_to_one(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let d = rng.random_range(2..=5);
    let rho = random_density(d, &mut rng);
    let povm = if rng.random_bool(0.5) {
        let n = rng.random_range(1..=6);
        ok(PovmSet::new(QuantumPovmFamily { outcomes: n }.random_povm(d, &mut rng)))?
    } else {
        PovmSet::from_observable(&ok(HermitianObservable::new(random_hermitian(d, &mut rng)))?)
    };
    let p = ok(born_probabilities(&rho, &povm))?;
    let total = p.iter().fold(0.0, |a, b| a + b);
    ensure!((total - 1.0).abs() <= 1e-9, "Born probabilities sum to {total}");
    ensure!(p.iter().all(|&x| x >= 0.0), "negative probability in {p:?}");
    Ok(())
}

pub fn quantize_idempotent_at(x: f64, m: u32) -> Result<(), String> {
    let q = quantize(x, m);
    ensure!(quantize(q, m) == q, "quantize({x}, {m}) = {q} is not a fixed point");
    let step = 2f64.powi(-(m as i32));
    ensure!((q - x).abs() <= step / 2.0 + f64::EPSILON * x.abs(), "quantize({x}, {m}) = {q} too far");
    Ok(())
}

pub fn quantize_idempotent(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let m = rng.random_range(1..=20);
    let x = rng.random_range(-1e3..1e3);
    quantize_idempotent_at(x, m)
}

pub fn renyi_monotone(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let rho = random_density(rng.random_range(2..=6), &mut rng);
    let values: Vec<f64> = [0.5, 2.0, 3.0, 5.0]
        .iter()
        .map(|&a| ok(renyi_entropy(&rho, a)))
        .collect::<Result<_, _>>()?;
    for w in values.windows(2) {
        ensure!(w[1] <= w[0] + 1e-9, "Rényi entropies not monotone: {values:?}");
    }
    Ok(())
}

pub fn entropy_unitary_invariant(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let d = rng.random_range(2..=6);
    let rho = random_density(d, &mut rng);
    let u = random_unitary(d, &mut rng);
    let rotated = rho.conjugate(&u);
    for alpha in [0.0, 0.5, 1.0, 2.0, 3.0] {
        let a = ok(entropy(&rho, alpha))?;
        let b = ok(entropy(&rotated, alpha))?;
        ensure!((a - b).abs() < 1e-8, "alpha {alpha}: {a} vs {b}");
    }
    Ok(())
}

// ---- devices ----

fn random_observable(d: usize, rng: &mut RandomStream) -> HermitianObservable {
    if rng.random_bool(0.3) {
        // forced degeneracy
        let basis = OrthonormalBasis::from_unitary(random_unitary(d, rng)).unwrap();
        let distinct: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let values: Vec<f64> = (0..d).map(|i| distinct[i / 2]).collect();
        HermitianObservable::from_spectrum(&values, &basis).unwrap()
    } else {
        HermitianObservable::new(random_hermitian(d, rng)).unwrap()
    }
}

/// One random device acting on a target of dimension `d`.
pub fn random_device(d: usize, rng: &mut RandomStream) -> Arc<dyn Device> {
    let precision = rng.random_bool(0.5).then(|| rng.random_range(1..=12));
    let sharp = rng.random_bool(0.5).then(|| rng.random_range(0.5..50.0));
    let phi = PureState::random(FactorSpace::single(d).unwrap(), rng);
    let basis = OrthonormalBasis::from_unitary(random_unitary(d, rng)).unwrap();
    match rng.random_range(0..11) {
        0 => Arc::new(Readout {
            basis: rng.random_bool(0.5).then_some(basis),
            precision,
        }),
        1 => Arc::new(FunctionReadout {
            function: MatrixFunction::Power(rng.random_range(1..=3)),
            basis: None,
            precision,
        }),
        2 => Arc::new(ExpectationReadout {
            observable: random_observable(d, rng),
            precision,
        }),
        3 => Arc::new(EigenvalueSampler {
            observable: random_observable(d, rng),
            variant: EigenVariant::Value { precision },
        }),
        4 => Arc::new(ok(PovmSampler::new(
            PovmSet::new(QuantumPovmFamily { outcomes: 3 }.random_povm(d, rng)).unwrap(),
            rng.random_bool(0.5).then_some(1),
        )).unwrap()),
        5 => Arc::new(OverlapTest::new(phi, rng.random_range(0.05..0.95), sharp).unwrap()),
        6 => Arc::new(BasisSelect::new(basis, sharp).unwrap()),
        7 => Arc::new(EntropyMeter::new(rng.random_range(0.0..4.0), precision).unwrap()),
        8 => Arc::new(
            EntropyCertifier::new(1.0, 0.5 * (d as f64).log2(), sharp).unwrap(),
        ),
        9 => Arc::new(EntanglementAnalyser {
            basis: Some(basis),
            precision,
        }),
        _ => Arc::new(UncertaintySampler {
            observable: random_observable(d, rng),
            precision,
        }),
    }
}

pub fn trivial_update(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let space = random_space(&mut rng);
    let target = rng.random_range(0..space.num_factors());
    let d = space.dims()[target];
    let psi = PureState::random(space, &mut rng);
    let before = psi.amplitudes().clone();
    let device = random_device(d, &mut rng);
    for _ in 0..3 {
        ok(device.measure(&psi, &[target], &mut rng))?;
        ensure!(
            psi.amplitudes().iter().zip(before.iter()).all(|(a, b)| a.re.to_bits() == b.re.to_bits()
                && a.im.to_bits() == b.im.to_bits()),
            "{} changed the global state",
            device.label()
        );
    }
    Ok(())
}

fn matrix_of(o: &Outcome) -> Result<CMatrix, String> {
    o.as_matrix().cloned().ok_or_else(|| format!("expected a matrix outcome, got {o:?}"))
}

pub fn readout_basis_covariance(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let space = random_space(&mut rng);
    let target = random_selection(space.num_factors(), &mut rng);
    let psi = PureState::random(space, &mut rng);
    let computational = matrix_of(&ok(readout_density(&psi, &target, None, None))?)?;
    let d = computational.nrows();
    let u = random_unitary(d, &mut rng);
    let basis = ok(OrthonormalBasis::from_unitary(u.clone()))?;
    let in_basis = matrix_of(&ok(readout_density(&psi, &target, Some(&basis), None))?)?;
    let oracle = u.adjoint() * &computational * &u;
    ensure!(entry_gap(&in_basis, &oracle) <= 1e-10, "basis covariance gap {}", entry_gap(&in_basis, &oracle));
    Ok(())
}

pub fn entropy_meter_local_invariance(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let space = random_space(&mut rng);
    let target = random_selection(space.num_factors(), &mut rng);
    let psi = PureState::random(space.clone(), &mut rng);
    let d = space.selection_dim(&target);
    let moved = ok(psi.apply_local_unitary(&random_unitary(d, &mut rng), &target))?;
    for alpha in [0.5, 1.0, 2.0] {
        let a = ok(entropy_meter(&psi, &target, alpha, None))?.as_real().unwrap();
        let b = ok(entropy_meter(&moved, &target, alpha, None))?.as_real().unwrap();
        ensure!((a - b).abs() < 1e-8, "alpha {alpha}: {a} vs {b}");
    }
    Ok(())
}

pub fn projective_povm_matches_eigen(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let d = rng.random_range(2..=4);
    let psi = PureState::random(FactorSpace::new(vec![d, 2]).unwrap(), &mut rng);
    let observable = random_observable(d, &mut rng);
    let povm = ok(PovmSampler::new(PovmSet::from_observable(&observable), None))?;
    let eigen = EigenvalueSampler {
        observable,
        variant: EigenVariant::IntegerLabel { offset: 1 },
    };
    let a = ok(povm.distribution(&psi, &[0]))?;
    let b = ok(eigen.distribution(&psi, &[0]))?;
    ensure!(a.entries().len() == b.entries().len(), "outcome counts differ");
    for ((oa, pa), (ob, pb)) in a.entries().iter().zip(b.entries()) {
        ensure!(oa == ob, "labels differ: {oa:?} vs {ob:?}");
        ensure!((pa - pb).abs() <= 1e-12, "{oa:?}: {pa} vs {pb}");
    }
    Ok(())
}

// ---- opf ----

fn random_effect(d: usize, rng: &mut RandomStream) -> CMatrix {
    let povm = QuantumPovmFamily { outcomes: 2 }.random_povm(d, rng);
    povm[0].clone()
}

fn random_opf(space: &FactorSpace, rng: &mut RandomStream) -> Opf {
    let d = space.total_dim();
    match rng.random_range(0..5) {
        0 => opf_from_quantum(space.clone(), &random_effect(d, rng)).unwrap(),
        1 => {
            let device = random_device(space.dims()[0], rng);
            let psi = PureState::random(space.clone(), rng);
            let outcome = device.measure(&psi, &[0], rng).unwrap();
            opf_from_device(device, space.clone(), &[0], outcome).unwrap()
        }
        2 => {
            let a = random_opf(space, rng);
            let b = random_opf(space, rng);
            let w = rng.random_range(0.0..1.0);
            mix(&[a, b], &[w, 1.0 - w]).unwrap()
        }
        3 => compose_unitary(&random_opf(space, rng), &random_unitary(d, rng)).unwrap(),
        _ => random_opf(space, rng).complement(),
    }
}

pub fn opf_in_range(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let space = random_space(&mut rng);
    let f = random_opf(&space, &mut rng);
    for _ in 0..4 {
        let psi = PureState::random(space.clone(), &mut rng);
        let v = ok(f.value(&psi))?;
        ensure!((-1e-9..=1.0 + 1e-9).contains(&v), "OPF value {v} out of range ({:?})", f.provenance());
    }
    Ok(())
}

pub fn full_measurement_complete(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let space = random_space(&mut rng);
    let d = space.dims()[0];
    let device = random_device(d, &mut rng);
    if device.outcome_set(d).is_none() {
        return Ok(());
    }
    let m = ok(FullMeasurement::from_device(device.clone(), space.clone(), &[0]))?;
    let psi = PureState::random(space, &mut rng);
    let total = m.outcomes().iter().map(|f| f.value(&psi).unwrap()).fold(0.0, |a, b| a + b);
    ensure!((total - 1.0).abs() <= 1e-8, "{} outcomes sum to {total}", device.label());
    Ok(())
}

fn quadratic(q: &CMatrix, psi: &PureState) -> f64 {
    let v = psi.amplitudes();
    (v.adjoint() * q * v)[(0, 0)].re
}

pub fn operator_constructions(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let (a, b) = (rng.random_range(2..=3), rng.random_range(2..=3));
    let space = FactorSpace::new(vec![a, b]).unwrap();
    let d = a * b;
    let (qa, qb) = (random_effect(d, &mut rng), random_effect(d, &mut rng));
    let fa = ok(opf_from_quantum(space.clone(), &qa))?;
    let fb = ok(opf_from_quantum(space.clone(), &qb))?;
    let w = rng.random_range(0.0..1.0);
    let u = random_unitary(d, &mut rng);
    let phi = PureState::random(FactorSpace::single(b).unwrap(), &mut rng);

    // V = I ⊗ |φ⟩ built entrywise
    let mut v = CMatrix::zeros(d, a);
    for i in 0..a {
        for k in 0..b {
            v[(i * b + k, i)] = phi.amplitudes()[k];
        }
    }
    let cases: Vec<(&str, Opf, CMatrix, FactorSpace)> = vec![
        ("mix", ok(mix(&[fa.clone(), fb], &[w, 1.0 - w]))?, qa.scale(w) + qb.scale(1.0 - w), space.clone()),
        ("unitary", ok(compose_unitary(&fa, &u))?, u.adjoint() * &qa * &u, space.clone()),
        ("system", ok(compose_system(&fa, &phi))?, v.adjoint() * &qa * &v, FactorSpace::single(a).unwrap()),
    ];
    for (name, f, oracle, sp) in cases {
        let op = f.operator().ok_or_else(|| format!("{name}: no operator"))?;
        ensure!(entry_gap(op, &oracle) <= 1e-10, "{name}: operator gap {}", entry_gap(op, &oracle));
        let psi = PureState::random(sp, &mut rng);
        let (x, y) = (ok(f.value(&psi))?, quadratic(&oracle, &psi));
        ensure!((x - y).abs() <= 1e-10, "{name}: value {x} vs oracle {y}");
    }
    Ok(())
}

/// Residual of the product-form witness under two independent probe draws.
pub fn witness_resampling_invariant(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let space = FactorSpace::new(vec![2, rng.random_range(2..=3)]).unwrap();
    let f = if rng.random_bool(0.5) {
        ok(opf_from_quantum(space.clone(), &random_effect(space.total_dim(), &mut rng)))?
    } else {
        let m = rng.random_range(1..=4);
        ok(opf_from_device(Arc::new(EntropyMeter::fpvnem(m)), space, &[0], Outcome::Real(0.0)))?
    };
    let r1 = ok(product_form_witness(&f, &mut stream(seed ^ 0x1111)))?.residual;
    let r2 = ok(product_form_witness(&f, &mut stream(seed ^ 0x2222)))?.residual;
    ensure!((r1 - r2).abs() <= 1e-8, "residuals {r1} and {r2} differ");
    Ok(())
}

/// Value-vector injectivity of the qubit quantum-POVM outcome list on 100
/// random density-matrix pairs.
pub fn quantum_povm_injective(seed: u64) -> Result<(), String> {
    let mut rng = stream(seed);
    let check = ok(check_estimation_assumption(EstimationFamily::QuantumPovm, 2, &mut rng))?;
    let ops: Vec<CMatrix> = check
        .outcomes
        .iter()
        .map(|f| f.operator().cloned().ok_or("outcome without operator".to_string()))
        .collect::<Result<_, _>>()?;
    let values = |rho: &DensityMatrix| -> Vec<f64> {
        ops.iter().map(|q| (q * rho.matrix()).trace().re).collect()
    };
    let mut tested = 0;
    while tested < 100 {
        let (r, s) = (random_density(2, &mut rng), random_density(2, &mut rng));
        if r.trace_distance(&s) <= 1e-3 {
            continue;
        }
        tested += 1;
        let gap = values(&r).iter().zip(values(&s)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(gap > 1e-6, "pair at trace distance {} maps to gap {gap}", r.trace_distance(&s));
    }
    Ok(())
}

/// All seeded invariant checks with their names.
pub fn invariant_suite() -> Vec<(&'static str, Check)> {
    vec![
        ("partial_trace_is_density", partial_trace_is_density),
        ("schmidt_matches_reduced", schmidt_matches_reduced),
        ("born_sums_to_one", born_sums_to_one),
        ("quantize_idempotent", quantize_idempotent),
        ("renyi_monotone", renyi_monotone),
        ("entropy_unitary_invariant", entropy_unitary_invariant),
        ("trivial_update", trivial_update),
        ("readout_basis_covariance", readout_basis_covariance),
        ("entropy_meter_local_invariance", entropy_meter_local_invariance),
        ("projective_povm_matches_eigen", projective_povm_matches_eigen),
        ("opf_in_range", opf_in_range),
        ("full_measurement_complete", full_measurement_complete),
        ("operator_constructions", operator_constructions),
        ("witness_resampling_invariant", witness_resampling_invariant),
    ]
}

// ---- sampling ----

pub const DRAWS: usize = 10_000;
pub const P_MIN: f64 = 1e-3;

/// Pearson chi-square p-value of `observed` against `expected` probabilities.
/// Cells with expected count below 5 are pooled into one.
pub fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
    let n = observed.iter().sum::<u64>() as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected) {
        if p * n >= 5.0 {
            cells.push((o as f64, p * n));
        } else {
            pooled.0 += o as f64;
            pooled.1 += p * n;
        }
    }
    if pooled.1 > 0.0 || pooled.0 > 0.0 {
        if pooled.1 <= 0.0 {
            return 0.0;
        }
        cells.push(pooled);
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    ChiSquared::new((cells.len() - 1) as f64).unwrap().sf(stat)
}

/// Draws `DRAWS` outcomes from `device` and tests them against the oracle
/// outcome list. Any draw outside the oracle support fails outright.
pub fn sampled_p_value(
    device: &dyn Device,
    psi: &PureState,
    target: &[usize],
    oracle: &[(Outcome, f64)],
    rng: &mut RandomStream,
) -> Result<f64, String> {
    let mut counts = vec![0u64; oracle.len()];
    for _ in 0..DRAWS {
        let o = ok(device.measure(psi, target, rng))?;
        let i = oracle
            .iter()
            .position(|(x, _)| x.matches(&o))
            .ok_or_else(|| format!("{} drew {o:?} outside the oracle support", device.label()))?;
        counts[i] += 1;
    }
    let probs: Vec<f64> = oracle.iter().map(|(_, p)| *p).collect();
    Ok(chi_square_p(&counts, &probs))
}

/// Eigen decomposition grouped by value with the crate's degeneracy rule,
/// computed straight from `nalgebra`.
pub fn eigen_oracle(a: &CMatrix, rho: &CMatrix) -> Vec<(f64, f64)> {
    let eig = a.clone().symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..a.nrows())
        .map(|i| {
            let v = eig.eigenvectors.column(i);
            (eig.eigenvalues[i], (v.adjoint() * rho * v)[(0, 0)].re)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut grouped: Vec<(f64, f64)> = Vec::new();
    for (value, p) in pairs {
        match grouped.last_mut() {
            Some(last) if (value - last.0).abs() < 1e-9 * (1.0 + value.abs()) => last.1 += p,
            _ => grouped.push((value, p)),
        }
    }
    grouped
}

pub fn logistic_oracle(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn quantize_oracle(x: f64, m: u32) -> f64 {
    let scale = 2f64.powi(m as i32);
    (x * scale).round_ties_even() / scale
}

fn vn_oracle(rho: &CMatrix) -> f64 {
    rho.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .filter(|&&p| p > 1e-12)
        .map(|&p| -p * p.log2())
        .fold(0.0, |a, b| a + b)
}

fn expectation(op: &CMatrix, rho: &CMatrix) -> f64 {
    (op * rho).trace().re
}

/// Merges oracle entries whose outcomes match.
fn merged(entries: Vec<(Outcome, f64)>) -> Vec<(Outcome, f64)> {
    let mut out: Vec<(Outcome, f64)> = Vec::new();
    for (o, p) in entries {
        match out.iter_mut().find(|(x, _)| x.matches(&o)) {
            Some(slot) => slot.1 += p,
            None => out.push((o, p)),
        }
    }
    out
}

struct Instance {
    psi: PureState,
    rho: CMatrix,
    d: usize,
    rng: RandomStream,
}

fn instance(seed: u64) -> Instance {
    let mut rng = stream(seed);
    let d = rng.random_range(2..=4);
    let psi = PureState::random(FactorSpace::new(vec![d, rng.random_range(2..=3)]).unwrap(), &mut rng);
    let rho = partial_trace_oracle(&psi, &[0]);
    Instance { psi, rho, d, rng }
}

fn run_chi(device: &dyn Device, inst: &mut Instance, oracle: Vec<(Outcome, f64)>) -> Result<f64, String> {
    let oracle = merged(oracle);
    let total = oracle.iter().map(|(_, p)| p).fold(0.0, |a, b| a + b);
    ensure!((total - 1.0).abs() < 1e-9, "oracle mass {total}");
    let psi = inst.psi.clone();
    sampled_p_value(device, &psi, &[0], &oracle, &mut inst.rng)
}

fn eigen_case(seed: u64, variant: fn(&mut RandomStream) -> EigenVariant) -> Result<f64, String> {
    let mut inst = instance(seed);
    let obs = random_observable(inst.d, &mut inst.rng);
    let variant = variant(&mut inst.rng);
    let spectrum = eigen_oracle(obs.matrix(), &inst.rho);
    let oracle: Vec<(Outcome, f64)> = match variant {
        EigenVariant::Value { precision } => spectrum
            .iter()
            .map(|&(v, p)| (Outcome::Real(precision.map_or(v, |m| quantize_oracle(v, m))), p))
            .collect(),
        EigenVariant::IntegerLabel { offset } => spectrum
            .iter()
            .enumerate()
            .map(|(i, &(_, p))| (Outcome::Label(i as i64 + offset), p))
            .collect(),
        EigenVariant::Finite { bound, offset } => {
            let mut kept = Vec::new();
            let mut lost = 0.0;
            for (i, &(_, p)) in spectrum.iter().enumerate() {
                let label = i as i64 + offset;
                if label.abs() <= i64::from(bound) {
                    kept.push((Outcome::Label(label), p));
                } else {
                    lost += p;
                }
            }
            if lost > 0.0 {
                kept.push((Outcome::Overflow { excluded_mass: lost }, lost));
            }
            kept
        }
        EigenVariant::StateProjection => unreachable!(),
    };
    run_chi(&EigenvalueSampler { observable: obs, variant }, &mut inst, oracle)
}

pub fn chi_eigen_value(seed: u64) -> Result<f64, String> {
    eigen_case(seed, |_| EigenVariant::Value { precision: None })
}

pub fn chi_eigen_finite_precision(seed: u64) -> Result<f64, String> {
    eigen_case(seed, |r| EigenVariant::Value {
        precision: Some(r.random_range(1..=4)),
    })
}

pub fn chi_eigen_integer_label(seed: u64) -> Result<f64, String> {
    eigen_case(seed, |r| EigenVariant::IntegerLabel {
        offset: r.random_range(-2..=1),
    })
}

pub fn chi_eigen_finite_label(seed: u64) -> Result<f64, String> {
    eigen_case(seed, |r| EigenVariant::Finite {
        bound: r.random_range(0..=1),
        offset: r.random_range(-1..=0),
    })
}

pub fn chi_state_projection(seed: u64) -> Result<f64, String> {
    let mut inst = instance(seed);
    let phi = PureState::random(FactorSpace::single(inst.d).unwrap(), &mut inst.rng);
    let v = phi.amplitudes();
    let p1 = (v.adjoint() * &inst.rho * v)[(0, 0)].re;
    let oracle = vec![(Outcome::Bit(1), p1), (Outcome::Bit(0), 1.0 - p1)];
    run_chi(&EigenvalueSampler::state_projection(&phi), &mut inst, oracle)
}

pub fn chi_uncertainty(seed: u64) -> Result<f64, String> {
    let mut inst = instance(seed);
    let obs = random_observable(inst.d, &mut inst.rng);
    let precision = inst.rng.random_bool(0.5).then(|| inst.rng.random_range(1..=4));
    let mean = expectation(obs.matrix(), &inst.rho);
    let oracle = eigen_oracle(obs.matrix(), &inst.rho)
        .into_iter()
        .map(|(v, p)| (Outcome::Real(precision.map_or(v - mean, |m| quantize_oracle(v - mean, m))), p))
        .collect();
    run_chi(&UncertaintySampler { observable: obs, precision }, &mut inst, oracle)
}

pub fn chi_povm(seed: u64) -> Result<f64, String> {
    let mut inst = instance(seed);
    let n = inst.rng.random_range(2..=5);
    let effects = QuantumPovmFamily { outcomes: n }.random_povm(inst.d, &mut inst.rng);
    let bound = inst.rng.random_bool(0.5).then(|| inst.rng.random_range(1..n as u32));
    let mut oracle = Vec::new();
    let mut lost = 0.0;
    for (i, e) in effects.iter().enumerate() {
        let p = expectation(e, &inst.rho);
        match bound {
            Some(m) if i as u32 >= m => lost += p,
            _ => oracle.push((Outcome::Label(i as i64 + 1), p)),
        }
    }
    if lost > 0.0 {
        oracle.push((Outcome::Overflow { excluded_mass: lost }, lost));
    }
    let device = ok(PovmSampler::new(ok(PovmSet::new(effects))?, bound))?;
    run_chi(&device, &mut inst, oracle)
}

pub fn chi_smoothed_overlap(seed: u64) -> Result<f64, String> {
    let mut inst = instance(seed);
    let phi = PureState::random(FactorSpace::single(inst.d).unwrap(), &mut inst.rng);
    let a = inst.rng.random_range(0.05..0.95);
    let k = inst.rng.random_range(1.0..20.0);
    let v = phi.amplitudes();
    let w = (v.adjoint() * &inst.rho * v)[(0, 0)].re;
    let p1 = logistic_oracle(k * (w - a));
    let oracle = vec![(Outcome::Bit(1), p1), (Outcome::Bit(0), 1.0 - p1)];
    run_chi(&ok(OverlapTest::new(phi, a, Some(k)))?, &mut inst, oracle)
}

pub fn chi_basis_select(seed: u64) -> Result<f64, String> {
    let mut inst = instance(seed);
    let u = random_unitary(inst.d, &mut inst.rng);
    let k = inst.rng.random_range(1.0..20.0);
    let weights: Vec<f64> = (0..inst.d)
        .map(|i| {
            let v = u.column(i);
            (v.adjoint() * &inst.rho * v)[(0, 0)].re
        })
        .collect();
    let z = weights.iter().map(|w| (k * w).exp()).fold(0.0, |a, b| a + b);
    let oracle = weights
        .iter()
        .enumerate()
        .map(|(i, w)| (Outcome::Label(i as i64), (k * w).exp() / z))
        .collect();
    let basis = ok(OrthonormalBasis::from_unitary(u))?;
    run_chi(&ok(BasisSelect::new(basis, Some(k)))?, &mut inst, oracle)
}

/// Hard basis selection on a maximally mixed target: uniform tie-break.
pub fn chi_basis_select_ties(seed: u64) -> Result<f64, String> {
    let mut rng = stream(seed);
    let d = rng.random_range(2..=4);
    let psi = PureState::maximally_entangled(d);
    let basis = ok(OrthonormalBasis::from_unitary(random_unitary(d, &mut rng)))?;
    let oracle: Vec<(Outcome, f64)> = (0..d).map(|i| (Outcome::Label(i as i64), 1.0 / d as f64)).collect();
    sampled_p_value(&ok(BasisSelect::new(basis, None))?, &psi, &[0], &oracle, &mut rng)
}

pub fn chi_smoothed_certifier(seed: u64) -> Result<f64, String> {
    let mut inst = instance(seed);
    let bound = (inst.d as f64).log2();
    let e = inst.rng.random_range(0.05 * bound..0.95 * bound);
    let k = inst.rng.random_range(1.0..10.0);
    let p1 = logistic_oracle(k * (vn_oracle(&inst.rho) - e));
    let oracle = vec![(Outcome::Bit(1), p1), (Outcome::Bit(0), 1.0 - p1)];
    run_chi(&ok(EntropyCertifier::new(1.0, e, Some(k)))?, &mut inst, oracle)
}

/// Every stochastic device variant with its chi-square case.
pub fn chi_square_suite() -> Vec<(&'static str, fn(u64) -> Result<f64, String>)> {
    vec![
        ("eigenvalue_sampler.value", chi_eigen_value),
        ("eigenvalue_sampler.finite_precision", chi_eigen_finite_precision),
        ("eigenvalue_sampler.integer_label", chi_eigen_integer_label),
        ("eigenvalue_sampler.finite_label", chi_eigen_finite_label),
        ("eigenvalue_sampler.state_projection", chi_state_projection),
        ("uncertainty_sampler", chi_uncertainty),
        ("povm_sampler", chi_povm),
        ("overlap_test.smoothed", chi_smoothed_overlap),
        ("basis_select.smoothed", chi_basis_select),
        ("basis_select.ties", chi_basis_select_ties),
        ("entropy_certifier.smoothed", chi_smoothed_certifier),
    ]
}

pub const LIMIT_K: f64 = 1e6;
pub const LIMIT_MARGIN: f64 = 1e-4;
pub const LIMIT_CASES: usize = 100;

/// Probability the smoothed device gives the hard device's (deterministic)
/// answer, checked on `LIMIT_CASES` inputs with margin above `LIMIT_MARGIN`.
fn limit_cases(
    seed: u64,
    mut case: impl FnMut(&mut RandomStream) -> Result<Option<(Arc<dyn Device>, Arc<dyn Device>, PureState)>, String>,
) -> Result<(), String> {
    let mut rng = stream(seed);
    let mut done = 0;
    let mut attempts = 0;
    while done < LIMIT_CASES {
        attempts += 1;
        ensure!(attempts < 100 * LIMIT_CASES, "too few cases with margin");
        let Some((hard, smooth, psi)) = case(&mut rng)? else {
            continue;
        };
        done += 1;
        let h = ok(hard.distribution(&psi, &[0]))?;
        ensure!(h.entries().len() == 1 || h.entries().iter().filter(|(_, p)| *p > 0.0).count() == 1, "hard device is not deterministic here");
        let answer = h.entries().iter().find(|(_, p)| *p > 0.5).unwrap().0.clone();
        let s = ok(smooth.distribution(&psi, &[0]))?;
        let agree = s.probability_of(&answer);
        ensure!(agree > 1.0 - 1e-12, "{} agrees with {} only with probability {agree}", smooth.label(), hard.label());
        let drawn = ok(smooth.measure(&psi, &[0], &mut rng))?;
        ensure!(drawn.matches(&answer), "{} drew {drawn:?}, hard answer {answer:?}", smooth.label());
    }
    Ok(())
}

pub fn limit_overlap(seed: u64) -> Result<(), String> {
    limit_cases(seed, |rng| {
        let inst_seed = rng.random::<u64>();
        let inst = instance(inst_seed);
        let mut local = stream(inst_seed ^ 0xA);
        let phi = PureState::random(FactorSpace::single(inst.d).unwrap(), &mut local);
        let v = phi.amplitudes();
        let w = (v.adjoint() * &inst.rho * v)[(0, 0)].re;
        let a = rng.random_range(0.01..0.99);
        if (w - a).abs() <= LIMIT_MARGIN {
            return Ok(None);
        }
        let hard: Arc<dyn Device> = Arc::new(ok(OverlapTest::new(phi.clone(), a, None))?);
        let smooth: Arc<dyn Device> = Arc::new(ok(OverlapTest::new(phi, a, Some(LIMIT_K)))?);
        Ok(Some((hard, smooth, inst.psi)))
    })
}

pub fn limit_basis_select(seed: u64) -> Result<(), String> {
    limit_cases(seed, |rng| {
        let inst = instance(rng.random::<u64>());
        let u = random_unitary(inst.d, rng);
        let mut w: Vec<f64> = (0..inst.d)
            .map(|i| {
                let v = u.column(i);
                (v.adjoint() * &inst.rho * v)[(0, 0)].re
            })
            .collect();
        w.sort_by(|a, b| b.total_cmp(a));
        if w[0] - w[1] <= LIMIT_MARGIN {
            return Ok(None);
        }
        let basis = ok(OrthonormalBasis::from_unitary(u))?;
        let hard: Arc<dyn Device> = Arc::new(ok(BasisSelect::new(basis.clone(), None))?);
        let smooth: Arc<dyn Device> = Arc::new(ok(BasisSelect::new(basis, Some(LIMIT_K)))?);
        Ok(Some((hard, smooth, inst.psi)))
    })
}

pub fn limit_certifier(seed: u64) -> Result<(), String> {
    limit_cases(seed, |rng| {
        let inst = instance(rng.random::<u64>());
        let bound = (inst.d as f64).log2();
        let e = rng.random_range(0.01 * bound..0.99 * bound);
        if (vn_oracle(&inst.rho) - e).abs() <= LIMIT_MARGIN {
            return Ok(None);
        }
        let hard: Arc<dyn Device> = Arc::new(ok(EntropyCertifier::new(1.0, e, None))?);
        let smooth: Arc<dyn Device> = Arc::new(ok(EntropyCertifier::new(1.0, e, Some(LIMIT_K)))?);
        Ok(Some((hard, smooth, inst.psi)))
    })
}

pub fn limit_suite() -> Vec<(&'static str, Check)> {
    vec![
        ("overlap_test", limit_overlap),
        ("basis_select", limit_basis_select),
        ("entropy_certifier", limit_certifier),
    ]
}
