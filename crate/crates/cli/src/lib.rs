//! Configuration parsing, execution and rendering behind the `pqsim` binary.

pub mod catalog;
pub mod config;
pub mod runner;

/// Seed used when neither a flag, the configuration nor `PQSIM_SEED` sets one.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Decimal or `0x`-prefixed hexadecimal seed.
pub fn parse_seed(text: &str) -> Result<u64, String> {
    let t = text.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|e| format!("invalid seed `{text}`: {e}"))
}

/// Seed from `PQSIM_SEED`, else [`DEFAULT_SEED`].
pub fn environment_seed() -> Result<u64, String> {
    match std::env::var("PQSIM_SEED") {
        Ok(v) => parse_seed(&v),
        Err(_) => Ok(DEFAULT_SEED),
    }
}
