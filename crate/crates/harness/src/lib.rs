//! Std side of clawgate: runs the adversarial harness end to end and writes
//! its artifacts (per-sample CSV, markdown report, audit and witness
//! journals, signed manifests).
//!
//! The decision logic lives in `clawgate-core`; this crate supplies the
//! clock, entropy, filesystem, and CLI.

pub mod config;
pub mod csvio;
pub mod fingerprint;
pub mod report;
pub mod runner;
pub mod scrub;

use std::time::{SystemTime, UNIX_EPOCH};

use clawgate_core::Clock;
use ed25519_dalek::SigningKey;

pub use config::{RunConfig, SubjectKind};
pub use runner::{run_experiment, RunOutcome, SubjectResult};

/// Milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
}

/// Fresh Ed25519 key from the OS entropy source.
pub fn generate_key() -> anyhow::Result<SigningKey> {
    let mut seed = [0u8; 32];
    getrandom::getrandom(&mut seed).map_err(|e| anyhow::anyhow!("entropy source: {e}"))?;
    Ok(SigningKey::from_bytes(&seed))
}

/// Random seed string for runs started without `--seed`.
pub fn random_seed_string() -> anyhow::Result<String> {
    let mut b = [0u8; 8];
    getrandom::getrandom(&mut b).map_err(|e| anyhow::anyhow!("entropy source: {e}"))?;
    Ok(hex::encode(b))
}
