use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use clawgate_core::harness::Channel;
use clawgate_core::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubjectKind {
    Passthrough,
    Gated,
    GatedWitness,
}

impl SubjectKind {
    pub const ALL: [SubjectKind; 3] = [SubjectKind::Passthrough, SubjectKind::Gated, SubjectKind::GatedWitness];

    pub const fn as_str(self) -> &'static str {
        match self {
            SubjectKind::Passthrough => "passthrough",
            SubjectKind::Gated => "gated",
            SubjectKind::GatedWitness => "gated-witness",
        }
    }
}

impl fmt::Display for SubjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubjectKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SubjectKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .with_context(|| format!("unknown subject `{s}` (expected passthrough, gated, gated-witness)"))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n_per_cell: usize,
    pub channels: Vec<Channel>,
    /// `None` draws a random seed string, recorded in the fingerprint.
    pub seed: Option<String>,
    pub stats_only: bool,
    pub disable_witness: bool,
    pub widened_dlp: bool,
    pub out_dir: PathBuf,
    pub subjects: Vec<SubjectKind>,
    /// Overrides the built-in channel policy.
    pub policy: Option<Policy>,
    /// Print the headline matrix to stdout.
    pub print_headline: bool,
}

pub const STRESS_N: usize = 10_000;
pub const STRESS_CHANNEL: Channel = Channel::TelegramMock;

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            n_per_cell: 100,
            channels: Channel::ALL.to_vec(),
            seed: None,
            stats_only: false,
            disable_witness: false,
            widened_dlp: false,
            out_dir: out_dir.into(),
            subjects: SubjectKind::ALL.to_vec(),
            policy: None,
            print_headline: false,
        }
    }

    /// n = 10000 per cell on the single stress channel.
    pub fn stress(mut self) -> Self {
        self.n_per_cell = STRESS_N;
        self.channels = vec![STRESS_CHANNEL];
        self
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n_per_cell < 1 {
            bail!("n per cell must be at least 1");
        }
        if self.channels.is_empty() {
            bail!("at least one channel is required");
        }
        if self.subjects.is_empty() {
            bail!("at least one subject is required");
        }
        let mut seen = self.subjects.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.subjects.len() {
            bail!("subjects must not repeat");
        }
        let mut ch = self.channels.clone();
        ch.sort();
        ch.dedup();
        if ch.len() != self.channels.len() {
            bail!("channels must not repeat");
        }
        if let Some(p) = &self.policy {
            p.validate().context("policy")?;
        }
        Ok(())
    }
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, T::Err> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(T::from_str).collect()
}

pub fn load_policy(path: &std::path::Path) -> anyhow::Result<Policy> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let p: Policy = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    p.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_parse_and_reject_unknowns() {
        assert_eq!(parse_list::<SubjectKind>("gated, passthrough").unwrap(), [SubjectKind::Gated, SubjectKind::Passthrough]);
        assert!(parse_list::<SubjectKind>("gated,nope").is_err());
        assert_eq!(parse_list::<Channel>("telegram-mock").unwrap(), [Channel::TelegramMock]);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::new("/tmp/x");
        assert!(c.validate().is_ok());
        c.n_per_cell = 0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::new("/tmp/x");
        c.subjects = vec![SubjectKind::Gated, SubjectKind::Gated];
        assert!(c.validate().is_err());
        let s = RunConfig::new("/tmp/x").stress();
        assert_eq!((s.n_per_cell, s.channels.as_slice()), (10_000, &[Channel::TelegramMock][..]));
    }
}
