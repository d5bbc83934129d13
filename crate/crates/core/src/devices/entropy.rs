use super::selection::logistic;
use super::{Device, DeviceKind, Outcome, OutcomeDistribution};
use crate::error::{QsimError, Result};
use crate::qcore::{entropy, quantize, reduced_state, PureState, RandomStream};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(QsimError::OutOfRange(format!("entropy order {alpha} must be >= 0")))
    }
}

fn order_is_von_neumann(alpha: f64) -> bool {
    (alpha - 1.0).abs() <= 1e-9
}

/// `S_α(ρ₁)` in bits (`α = 1` is von Neumann), quantized when `m` is given.
pub fn entropy_meter(
    global: &PureState,
    target: &[usize],
    alpha: f64,
    m: Option<u32>,
) -> Result<Outcome> {
    check_alpha(alpha)?;
    let s = entropy(&reduced_state(global, target)?, alpha)?;
    Ok(Outcome::Real(m.map_or(s, |bits| quantize(s, bits))))
}

/// UEC: bit 1 iff `S_α(ρ₁) > E`; smoothed with sharpness `k`.
pub fn entropy_certify(
    global: &PureState,
    target: &[usize],
    alpha: f64,
    threshold: f64,
    sharpness: Option<f64>,
    rng: &mut RandomStream,
) -> Result<Outcome> {
    EntropyCertifier::new(alpha, threshold, sharpness)?.measure(global, target, rng)
}

/// Universal entropy meter (VNEM/REM/UEM; finite-precision with `precision`).
#[derive(Debug, Clone)]
pub struct EntropyMeter {
    pub alpha: f64,
    pub precision: Option<u32>,
}

impl EntropyMeter {
    pub fn new(alpha: f64, precision: Option<u32>) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, precision })
    }

    /// Finite-precision von Neumann meter.
    pub fn fpvnem(m: u32) -> Self {
        Self {
            alpha: 1.0,
            precision: Some(m),
        }
    }
}

impl Device for EntropyMeter {
    fn kind(&self) -> DeviceKind {
        DeviceKind::EntropyMeter
    }

    fn label(&self) -> String {
        let base = if order_is_von_neumann(self.alpha) {
            "VNEM".to_string()
        } else {
            format!("REM(alpha={})", self.alpha)
        };
        match self.precision {
            Some(m) => format!("FP{base}(m={m})"),
            None => base,
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        entropy_meter(global, target, self.alpha, self.precision).map(OutcomeDistribution::certain)
    }

    /// Multiples of `2^-m` from 0 up to the quantized `log₂ d`.
    fn outcome_set(&self, target_dim: usize) -> Option<Vec<Outcome>> {
        let m = self.precision?;
        let top = quantize((target_dim as f64).log2(), m);
        let steps = (top * 2f64.powi(m as i32)).round() as i64;
        Some(
            (0..=steps)
                .map(|j| Outcome::Real(j as f64 / 2f64.powi(m as i32)))
                .collect(),
        )
    }
}

/// Universal entropy certifier (UEC; smoothed with `sharpness`).
#[derive(Debug, Clone)]
pub struct EntropyCertifier {
    pub alpha: f64,
    pub threshold: f64,
    pub sharpness: Option<f64>,
}

impl EntropyCertifier {
    pub fn new(alpha: f64, threshold: f64, sharpness: Option<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(QsimError::OutOfRange(format!(
                "entropy threshold {threshold} must be positive"
            )));
        }
        if let Some(k) = sharpness {
            if !(k > 0.0 && k.is_finite()) {
                return Err(QsimError::OutOfRange(format!("sharpness {k} must be positive")));
            }
        }
        Ok(Self {
            alpha,
            threshold,
            sharpness,
        })
    }

    /// Rejects thresholds outside `0 < E < log₂ d` for a target of dimension `d`.
    pub fn check_range(&self, target_dim: usize) -> Result<()> {
        let bound = (target_dim as f64).log2();
        if self.threshold < bound {
            Ok(())
        } else {
            Err(QsimError::OutOfRange(format!(
                "entropy threshold {} outside 0 < E < {bound} (log2 {target_dim})",
                self.threshold
            )))
        }
    }
}

impl Device for EntropyCertifier {
    fn kind(&self) -> DeviceKind {
        DeviceKind::EntropyCertifier
    }

    fn label(&self) -> String {
        match self.sharpness {
            Some(k) => format!("SUEC(alpha={},E={},k={k})", self.alpha, self.threshold),
            None => format!("UEC(alpha={},E={})", self.alpha, self.threshold),
        }
    }

    fn distribution(&self, global: &PureState, target: &[usize]) -> Result<OutcomeDistribution> {
        let rho = reduced_state(global, target)?;
        self.check_range(rho.dim())?;
        let s = entropy(&rho, self.alpha)?;
        Ok(match self.sharpness {
            None => OutcomeDistribution::certain(Outcome::Bit(u8::from(s > self.threshold))),
            Some(k) => {
                let p = logistic(k * (s - self.threshold));
                OutcomeDistribution::new(vec![(Outcome::Bit(1), p), (Outcome::Bit(0), 1.0 - p)])
            }
        })
    }

    fn outcome_set(&self, _target_dim: usize) -> Option<Vec<Outcome>> {
        Some(vec![Outcome::Bit(0), Outcome::Bit(1)])
    }
}
