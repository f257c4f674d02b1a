//! Host fingerprint recorded with every run.

use std::fs;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Fingerprint {
    pub runtime_version: String,
    pub os_name: String,
    pub cpu_model: String,
    pub cpu_count: usize,
    pub total_ram_bytes: u64,
    pub source_commit: String,
    pub seed_string: String,
}

impl Fingerprint {
    pub fn gather(seed_string: &str) -> Self {
        Fingerprint {
            runtime_version: env!("CLAWGATE_RUSTC_VERSION").into(),
            os_name: os_name(),
            cpu_model: cpu_model().unwrap_or_else(|| std::env::consts::ARCH.into()),
            cpu_count: std::thread::available_parallelism().map_or(1, usize::from),
            total_ram_bytes: total_ram_bytes().unwrap_or(0),
            source_commit: env!("CLAWGATE_SOURCE_COMMIT").into(),
            seed_string: seed_string.into(),
        }
    }

    /// `(field, value)` rows for the report table.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("runtime", self.runtime_version.clone()),
            ("os", self.os_name.clone()),
            ("cpu model", self.cpu_model.clone()),
            ("cpu count", self.cpu_count.to_string()),
            ("total RAM (bytes)", self.total_ram_bytes.to_string()),
            ("source commit", self.source_commit.clone()),
            ("seed", self.seed_string.clone()),
        ]
    }
}

fn os_name() -> String {
    let pretty = fs::read_to_string("/etc/os-release").ok().and_then(|t| {
        t.lines()
            .find_map(|l| l.strip_prefix("PRETTY_NAME="))
            .map(|v| v.trim_matches('"').to_string())
    });
    match pretty {
        Some(p) => format!("{p} ({})", std::env::consts::OS),
        None => std::env::consts::OS.into(),
    }
}

fn cpu_model() -> Option<String> {
    let text = fs::read_to_string("/proc/cpuinfo").ok()?;
    text.lines()
        .find(|l| l.starts_with("model name"))
        .and_then(|l| l.split_once(':'))
        .map(|(_, v)| v.trim().to_string())
}

fn total_ram_bytes() -> Option<u64> {
    let text = fs::read_to_string("/proc/meminfo").ok()?;
    let line = text.lines().find(|l| l.starts_with("MemTotal:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
