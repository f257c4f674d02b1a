//! End-to-end checks through the built binary.

use std::path::Path;
use std::process::Command;

use clawgate::csvio::{reader, split_trailer, verify_trailer, with_trailer, writer};
use clawgate_core::detectors::{widened_catalog, Severity};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clawgate"))
}

fn run_default(dir: &Path, extra: &[&str]) -> std::process::Output {
    bin()
        .args(["--seed", "cli-test", "--n", "20", "--out-dir"])
        .arg(dir)
        .args(extra)
        .env_remove("CLAWGATE_N")
        .output()
        .expect("spawn")
}

#[test]
fn run_writes_every_artifact_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_default(dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("McNemar gated vs passthrough: b=160 c=0"));
    for f in [
        "samples.csv",
        "report.md",
        "audit-passthrough.jsonl",
        "audit-gated.jsonl",
        "audit-gated-witness.jsonl",
        "witness.jsonl",
        "fingerprint.json",
        "manifests/discord-mock-adapter.json",
        "manifests/signer.pub",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = std::fs::read(dir.path().join("samples.csv")).unwrap();
    assert!(verify_trailer(&csv).is_ok());
    let report = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(report.contains("## Fingerprint") && report.contains("| seed | cli-test |"));
    let witness = std::fs::read_to_string(dir.path().join("witness.jsonl")).unwrap();
    assert_eq!(witness.lines().count(), 2);
}

#[test]
fn verify_journal_reports_tampering() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_default(dir.path(), &["--subjects", "gated"]).status.success());
    let path = dir.path().join("audit-gated.jsonl");
    let ok = bin().arg("verify-journal").arg(&path).output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("ok: "));

    let mut bytes = std::fs::read(&path).unwrap();
    let second_line = bytes.iter().position(|&b| b == b'\n').unwrap() + 10;
    bytes[second_line] ^= 0x01;
    std::fs::write(&path, bytes).unwrap();
    let bad = bin().arg("verify-journal").arg(&path).output().unwrap();
    assert!(!bad.status.success());
    assert_eq!(String::from_utf8_lossy(&bad.stdout).trim(), "broken: first bad record at index 1");
}

#[test]
fn scrubbed_full_run_rescans_clean() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin().args(["--seed", "cli-test", "--out-dir"]).arg(dir.path()).env_remove("CLAWGATE_N").status().unwrap();
    assert!(st.success());
    let input = dir.path().join("samples.csv");
    let out = bin().arg("scrub-csv").arg(&input).output().unwrap();
    assert!(out.status.success());
    let scrubbed = std::fs::read(dir.path().join("samples.scrubbed.csv")).unwrap();
    assert!(verify_trailer(&scrubbed).is_ok());
    let cat = widened_catalog();
    let (body, _) = split_trailer(&scrubbed);
    let mut rdr = reader(body);
    let col = rdr.headers().unwrap().iter().position(|h| h == "content").unwrap();
    let mut redacted = 0;
    for rec in rdr.records() {
        let content = rec.unwrap()[col].to_string();
        redacted += usize::from(content.contains("[REDACTED:"));
        assert!(cat.scan(&content).iter().all(|f| f.severity < Severity::High), "{content}");
    }
    assert_eq!(redacted, 400);
}

#[test]
fn scrub_leaves_legit_only_csv_untouched() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_default(dir.path(), &[]).status.success());
    let full = std::fs::read(dir.path().join("samples.csv")).unwrap();
    let (body, _) = split_trailer(&full);
    let mut rdr = reader(body);
    let headers = rdr.headers().unwrap().clone();
    let label = headers.iter().position(|h| h == "label").unwrap();
    let mut legit = Vec::new();
    {
        let mut w = writer(&mut legit);
        w.write_record(&headers).unwrap();
        for rec in rdr.records() {
            let rec = rec.unwrap();
            if &rec[label] == "legit" {
                w.write_record(&rec).unwrap();
            }
        }
        w.flush().unwrap();
    }
    let legit = with_trailer(legit);
    let input = dir.path().join("legit.csv");
    std::fs::write(&input, &legit).unwrap();
    let out = dir.path().join("legit-out.csv");
    assert!(bin().arg("scrub-csv").arg(&input).arg("--out").arg(&out).status().unwrap().success());
    assert_eq!(std::fs::read(out).unwrap(), legit);
}

#[test]
fn env_vars_apply_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--out-dir"])
        .arg(dir.path())
        .env("CLAWGATE_N", "3")
        .env("CLAWGATE_SEED", "env-seed")
        .env("CLAWGATE_CHANNELS", "telegram-mock")
        .env("CLAWGATE_STATS_ONLY", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("clawgate run: seed=env-seed n/cell=3 channels=telegram-mock samples=24"), "{stdout}");

    let out = bin()
        .args(["--n", "2", "--out-dir"])
        .arg(dir.path())
        .env("CLAWGATE_N", "3")
        .env("CLAWGATE_SEED", "env-seed")
        .output()
        .unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains("n/cell=2"));
}

#[test]
fn disabled_witness_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_default(dir.path(), &["--disable-witness"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("gated-witness (fail-closed: WitnessUnavailable)"));

    let bad = run_default(dir.path(), &["--subjects", "gated,unknown"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = run_default(dir.path(), &["--n", "0"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn policy_file_overrides_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("policy.json");
    std::fs::write(
        &policy,
        r#"{"allowedChannels":["discord-mock"],"egressHostAllowlist":["*.discord-mock.local"]}"#,
    )
    .unwrap();
    let out = run_default(dir.path(), &["--subjects", "gated", "--policy", policy.to_str().unwrap()]);
    assert!(out.status.success());
    let report = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(report.contains("| gated | telegram-mock-adapter | false | ChannelDenied |"), "{report}");

    std::fs::write(&policy, r#"{"vpnOnly":true}"#).unwrap();
    let out = run_default(dir.path(), &["--policy", policy.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn catalog_subcommand_prints_both_tiers() {
    let strict = bin().arg("catalog").output().unwrap();
    let wide = bin().args(["catalog", "--widened"]).output().unwrap();
    let s: serde_json::Value = serde_json::from_slice(&strict.stdout).unwrap();
    let w: serde_json::Value = serde_json::from_slice(&wide.stdout).unwrap();
    assert_eq!(s.as_array().unwrap().len(), 8);
    assert_eq!(w.as_array().unwrap().len(), 13);
}
