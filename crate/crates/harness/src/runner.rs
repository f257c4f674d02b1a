//! End-to-end run: generate, boot, mediate, score, write, re-verify.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::Context;
use clawgate_core::audit::{parse_journal, verify_journal, ChainVerdict, GATE_DECISION};
use clawgate_core::detectors::{strict_catalog, widened_catalog};
use clawgate_core::gatekeeper::{AdmissionReason, LocalWitness, WitnessedDecision};
use clawgate_core::harness::{
    generate_samples, harness_policy, mcnemar_pair, overall, per_cell, run_subjects, Cell, ChannelSink, Decision,
    GatedConfig, GatedSubject, GenConfig, McNemarResult, MockChannelSink, Mulberry32, NullSink, Passthrough, Sample,
    Subject,
};
use clawgate_core::stats::ConfusionMatrix;
use ed25519_dalek::VerifyingKey;

use crate::config::{RunConfig, SubjectKind};
use crate::csvio::render_samples_csv;
use crate::fingerprint::Fingerprint;
use crate::report::{headline, render_report};
use crate::{generate_key, random_seed_string, SystemClock};

pub const SIGNER_KEY_ID: &str = "harness-signer";
pub const WITNESS_KEY_ID: &str = "harness-witness";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissionRow {
    pub extension: String,
    pub admitted: bool,
    pub reason: AdmissionReason,
}

#[derive(Debug, Clone)]
pub struct SubjectResult {
    pub kind: SubjectKind,
    pub decisions: Vec<Decision>,
    pub cells: BTreeMap<Cell, ConfusionMatrix>,
    pub overall: ConfusionMatrix,
    pub admissions: Vec<AdmissionRow>,
    /// `Some(true)` when the witness failed closed; `None` without a witness.
    pub witness_failed_closed: Option<bool>,
    pub audit_records: usize,
    pub tamper_records: usize,
    pub journal_path: PathBuf,
    pub journal_verdict: ChainVerdict,
}

impl SubjectResult {
    pub fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    pub fn failed_closed(&self) -> bool {
        self.witness_failed_closed == Some(true)
    }
}

#[derive(Debug, Clone)]
pub struct PairResult {
    pub a: SubjectKind,
    pub b: SubjectKind,
    pub result: McNemarResult,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub seed: String,
    pub fingerprint: Fingerprint,
    pub samples: Vec<Sample>,
    pub subjects: Vec<SubjectResult>,
    pub mcnemar: Vec<PairResult>,
    pub csv_path: PathBuf,
    pub csv_digest: String,
    pub report_path: PathBuf,
    pub witness_path: PathBuf,
    /// Witness lines on disk, and whether every one verified.
    pub witness_lines: usize,
    pub witness_ok: bool,
    pub posts: Option<usize>,
    pub elapsed: Duration,
}

impl RunOutcome {
    pub fn subject(&self, kind: SubjectKind) -> Option<&SubjectResult> {
        self.subjects.iter().find(|s| s.kind == kind)
    }

    pub fn pair(&self, a: SubjectKind, b: SubjectKind) -> Option<&McNemarResult> {
        self.mcnemar.iter().find(|p| p.a == a && p.b == b).map(|p| &p.result)
    }

    /// Every journal reloaded from disk verified, and so did the witness file.
    pub fn all_verified(&self) -> bool {
        self.witness_ok && self.subjects.iter().all(|s| s.journal_verdict.is_ok())
    }
}

enum Booted {
    Passthrough(Passthrough),
    Gated(Box<GatedSubject>),
}

impl Booted {
    fn subject(&mut self) -> &mut dyn Subject {
        match self {
            Booted::Passthrough(p) => p,
            Booted::Gated(g) => g.as_mut(),
        }
    }

    fn gated(&self) -> Option<&GatedSubject> {
        match self {
            Booted::Gated(g) => Some(g),
            Booted::Passthrough(_) => None,
        }
    }
}

const PAIRS: [(SubjectKind, SubjectKind); 3] = [
    (SubjectKind::Gated, SubjectKind::Passthrough),
    (SubjectKind::GatedWitness, SubjectKind::Passthrough),
    (SubjectKind::Gated, SubjectKind::GatedWitness),
];

pub fn run_experiment(cfg: &RunConfig) -> anyhow::Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let seed = match &cfg.seed {
        Some(s) => s.clone(),
        None => random_seed_string()?,
    };
    let fingerprint = Fingerprint::gather(&seed);

    let gen = GenConfig {
        n_per_cell: cfg.n_per_cell,
        channels: cfg.channels.clone(),
    };
    let samples = generate_samples(&gen, &mut Mulberry32::from_seed_str(&seed));

    let catalog = if cfg.widened_dlp {
        widened_catalog()
    } else {
        strict_catalog()
    };
    let policy = cfg.policy.clone().unwrap_or_else(|| harness_policy(&cfg.channels));
    let signer = generate_key()?;
    let witness_key = generate_key()?;
    let witness_pub = witness_key.verifying_key();

    let mut booted = Vec::new();
    for &kind in &cfg.subjects {
        let b = match kind {
            SubjectKind::Passthrough => Booted::Passthrough(Passthrough::new(kind.as_str())),
            SubjectKind::Gated | SubjectKind::GatedWitness => {
                let witness = (kind == SubjectKind::GatedWitness).then(|| {
                    Box::new(LocalWitness::new(WITNESS_KEY_ID, witness_key.clone(), !cfg.disable_witness)) as _
                });
                let g = GatedSubject::boot(GatedConfig {
                    name: kind.as_str().into(),
                    policy: policy.clone(),
                    catalog: catalog.clone(),
                    channels: cfg.channels.clone(),
                    signer_key_id: SIGNER_KEY_ID.into(),
                    signer: signer.clone(),
                    witness,
                    clock: Box::new(SystemClock),
                })
                .with_context(|| format!("booting {kind}"))?;
                Booted::Gated(Box::new(g))
            }
        };
        booted.push((kind, b));
    }

    let mut mock = MockChannelSink::default();
    let mut null = NullSink;
    let sink: &mut dyn ChannelSink = if cfg.stats_only { &mut null } else { &mut mock };
    let decisions = {
        let mut refs: Vec<&mut dyn Subject> = booted.iter_mut().map(|(_, b)| b.subject()).collect();
        run_subjects(&samples, &mut refs, sink)
    };
    let posts = (!cfg.stats_only).then_some(mock.count);

    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let out = cfg.out_dir.as_path();

    let names: Vec<&str> = cfg.subjects.iter().map(|k| k.as_str()).collect();
    let csv = render_samples_csv(&samples, &names, &decisions)?;
    let csv_digest = crate::csvio::verify_trailer(&csv)?;
    let csv_path = out.join("samples.csv");
    write(&csv_path, &csv)?;

    write_manifests(out, &booted, &signer.verifying_key())?;

    let mut subjects = Vec::new();
    let mut witness_decisions: Vec<WitnessedDecision> = Vec::new();
    for ((kind, b), decisions) in booted.iter().zip(decisions) {
        let journal_path = out.join(format!("audit-{kind}.jsonl"));
        let journal = match b.gated() {
            Some(g) => g.runtime().audit().to_journal()?,
            None => String::new(),
        };
        write(&journal_path, journal.as_bytes())?;
        let on_disk = fs::read(&journal_path)?;
        let journal_verdict = verify_journal(&on_disk);

        let (admissions, witness_failed_closed, audit_records, tamper_records) = match b.gated() {
            Some(g) => {
                if *kind == SubjectKind::GatedWitness {
                    witness_decisions.extend(g.witnessed_decisions().cloned());
                }
                let rows = g
                    .admissions()
                    .iter()
                    .map(|d| AdmissionRow {
                        extension: d.extension.clone(),
                        admitted: d.admitted,
                        reason: d.reason,
                    })
                    .collect();
                let audit = g.runtime().audit();
                (
                    rows,
                    g.witness_state().map(|s| s.failed_closed),
                    audit.len(),
                    audit.count_type(clawgate_core::audit::TAMPER_ATTEMPT),
                )
            }
            None => (Vec::new(), None, 0, 0),
        };

        let cells = per_cell(&samples, &decisions);
        subjects.push(SubjectResult {
            kind: *kind,
            overall: overall(&cells),
            cells,
            decisions,
            admissions,
            witness_failed_closed,
            audit_records,
            tamper_records,
            journal_path,
            journal_verdict,
        });
    }

    let witness_path = out.join("witness.jsonl");
    let mut witness_text = String::new();
    for d in &witness_decisions {
        witness_text.push_str(&d.to_journal_line()?);
        witness_text.push('\n');
    }
    write(&witness_path, witness_text.as_bytes())?;
    write(&out.join("witness.pub"), format!("{}\n", hex::encode(witness_pub.as_bytes())).as_bytes())?;
    let witness_audit = subjects
        .iter()
        .find(|s| s.kind == SubjectKind::GatedWitness)
        .map(|s| s.journal_path.clone());
    let (witness_lines, witness_ok) = verify_witness_file(&witness_path, &witness_pub, witness_audit.as_deref())?;

    let mcnemar = PAIRS
        .iter()
        .filter_map(|&(a, b)| {
            let da = &subjects.iter().find(|s| s.kind == a)?.decisions;
            let db = &subjects.iter().find(|s| s.kind == b)?.decisions;
            Some(PairResult {
                a,
                b,
                result: mcnemar_pair(da, db),
            })
        })
        .collect();

    let mut outcome = RunOutcome {
        config: cfg.clone(),
        seed,
        fingerprint,
        samples,
        subjects,
        mcnemar,
        csv_path,
        csv_digest,
        report_path: out.join("report.md"),
        witness_path,
        witness_lines,
        witness_ok,
        posts,
        elapsed: Duration::ZERO,
    };
    outcome.elapsed = start.elapsed();
    write(&outcome.report_path, render_report(&outcome).as_bytes())?;
    write(
        &out.join("fingerprint.json"),
        format!("{}\n", serde_json::to_string_pretty(&outcome.fingerprint)?).as_bytes(),
    )?;
    if cfg.print_headline {
        print!("{}", headline(&outcome));
    }
    Ok(outcome)
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_manifests(out: &Path, booted: &[(SubjectKind, Booted)], signer: &VerifyingKey) -> anyhow::Result<()> {
    let dir = out.join("manifests");
    fs::create_dir_all(&dir)?;
    write(&dir.join("signer.pub"), format!("{}\n", hex::encode(signer.as_bytes())).as_bytes())?;
    if let Some(g) = booted.iter().find_map(|(_, b)| b.gated()) {
        for ext in g.extensions() {
            let name = &ext.manifest.body.name;
            write(&dir.join(format!("{name}.json")), ext.manifest.to_file_string()?.as_bytes())?;
            write(&dir.join(format!("{name}.bin")), &ext.content)?;
        }
    }
    Ok(())
}

/// Re-reads the witness journal and checks each line's signature. When the
/// witnessed subject's audit journal is given, each decision must also point
/// at the `gate.decision` record it co-signed.
pub fn verify_witness_file(path: &Path, key: &VerifyingKey, audit_journal: Option<&Path>) -> anyhow::Result<(usize, bool)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let chain = match audit_journal {
        Some(p) => parse_journal(&fs::read(p)?).ok(),
        None => None,
    };
    let mut n = 0;
    let mut ok = true;
    for line in text.lines() {
        n += 1;
        let Ok(d) = serde_json::from_str::<WitnessedDecision>(line) else {
            ok = false;
            continue;
        };
        ok &= d.verify(key);
        if let Some(chain) = &chain {
            let rec = chain.records().get(d.decision.audit_seq as usize);
            ok &= rec.is_some_and(|r| {
                r.record_type == GATE_DECISION
                    && r.prev_hash == d.decision.audit_prev_hash
                    && r.payload.ok == d.decision.admitted
            });
        }
    }
    Ok((n, ok))
}
