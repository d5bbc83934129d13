use rayon::prelude::*;

use crate::error::Result;
use crate::qcore::RandomStream;

/// Two-sided 95% normal quantile.
pub const WILSON_Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Runs `trial` for `0..reps` in parallel; trial `t` gets
/// `RandomStream::new(seed, experiment, t)`. Results come back in trial order.
pub fn repeat<T, F>(seed: u64, experiment: u64, reps: usize, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut RandomStream) -> Result<T> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|t| trial(t, &mut RandomStream::new(seed, experiment, t as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn wilson_brackets_the_frequency() {
        let (lo, hi) = wilson_interval(50, 100, WILSON_Z95);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (lo, hi) = wilson_interval(0, 10, WILSON_Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.35);
    }

    #[test]
    fn repetitions_are_reproducible() {
        let a = repeat(7, 1, 16, |_, r| Ok(r.random::<u64>())).unwrap();
        let b = repeat(7, 1, 16, |_, r| Ok(r.random::<u64>())).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }
}
