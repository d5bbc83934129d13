use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Seeded random stream addressed by `(seed, experiment, trial)`.
///
/// Identical addresses yield identical sequences on every platform; distinct
/// trials of one experiment get independent ChaCha20 keys.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    experiment: u64,
    trial: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(seed: u64, experiment: u64, trial: u64) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&experiment.to_le_bytes());
        key[16..24].copy_from_slice(&trial.to_le_bytes());
        key[24..32].copy_from_slice(b"pqsim-rs");
        Self {
            seed,
            experiment,
            trial,
            rng: ChaCha20Rng::from_seed(key),
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0, 0)
    }

    /// Fresh stream for `trial` under the same seed and experiment.
    pub fn derive(&self, trial: u64) -> Self {
        Self::new(self.seed, self.experiment, trial)
    }

    /// Fresh stream for a named sub-experiment; the id is hashed into the
    /// experiment slot together with the current one.
    pub fn fork(&self, label: &str) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.experiment.rotate_left(17) ^ self.trial;
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        Self::new(self.seed, h, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn address(&self) -> (u64, u64, u64) {
        (self.seed, self.experiment, self.trial)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
