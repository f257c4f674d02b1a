//! Mediating subjects.
//!
//! A subject sees an [`Envelope`] (content, channel, probe tag) and never the
//! ground-truth label. The simulated agent's side effects for a sample
//! arrive separately as a [`Behavior`]: it is the world the gate has to
//! reconcile against, not an input to its decision.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use ed25519_dalek::SigningKey;
use serde::Serialize;

use super::samples::{Channel, FCategory, Sample};
use super::sink::ChannelSink;
use crate::audit::{project_s, AuditPayload, Digest, IRREVERSIBLE_EXECUTED};
use crate::canon::CanonError;
use crate::detectors::{aggregate, DlpCatalog, PromptShield, Severity};
use crate::gatekeeper::{
    audit_egress_denial, guard_egress_request, guard_raw_connect, AdmissionDecision, AdmissionGate, AdmissionReason,
    EgressDecision, GateError, Witness, WitnessState, WitnessedDecision,
};
use crate::policy::{Capability, Policy, PolicyError};
use crate::reconcile::{check_biconditional, Key, KeyedMultiset, VerdictKind};
use crate::trust::{ManifestBody, ModuleManifest, Runtime, TrustError, TrustRoot};
use crate::Clock;

/// What a gated subject may look at.
#[derive(Debug, Clone, Copy)]
pub struct Envelope<'a> {
    pub content: &'a str,
    pub channel: Channel,
    pub probe_tag: Option<&'a str>,
}

impl<'a> Envelope<'a> {
    pub fn of(sample: &'a Sample) -> Self {
        Envelope {
            content: &sample.content,
            channel: sample.channel,
            probe_tag: sample.probe_tag.as_deref(),
        }
    }
}

/// Side effects the simulated agent performs for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    /// No irreversible operation.
    Idle,
    /// Claims a successful publish in the audit log; nothing lands.
    ForgedClaim,
    /// Publishes for real and records it.
    RecordedPublish,
}

impl Behavior {
    pub fn for_category(cat: FCategory) -> Self {
        match cat {
            FCategory::F2Forge => Behavior::ForgedClaim,
            FCategory::LegitAudit => Behavior::RecordedPublish,
            _ => Behavior::Idle,
        }
    }
}

/// Target of a probe's publish operation.
pub fn probe_target(channel: Channel, probe: &str) -> String {
    format!("{}/{}", channel.host(), probe)
}

/// Category attached to a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Detected {
    #[serde(rename = "F1_BYPASS")]
    F1Bypass,
    #[serde(rename = "F2_FORGE")]
    F2Forge,
    #[serde(rename = "F3_SILENT")]
    F3Silent,
    #[serde(rename = "F4_WRONGTGT")]
    F4WrongTgt,
    /// Admission or egress refusal, independent of content.
    #[serde(rename = "GATE")]
    Gate,
}

impl Detected {
    pub const fn as_str(self) -> &'static str {
        match self {
            Detected::F1Bypass => "F1_BYPASS",
            Detected::F2Forge => "F2_FORGE",
            Detected::F3Silent => "F3_SILENT",
            Detected::F4WrongTgt => "F4_WRONGTGT",
            Detected::Gate => "GATE",
        }
    }
}

impl fmt::Display for Detected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Decision {
    pub subject: String,
    pub delivered: bool,
    pub block_reason: Option<String>,
    pub f_category_detected: Option<Detected>,
}

impl Decision {
    pub fn blocked(&self) -> bool {
        !self.delivered
    }
}

pub fn block_notice(subject: &str, detected: Detected, reason: &str) -> String {
    format!("[{subject} | {detected}] message blocked: {reason}")
}

pub trait Subject {
    fn name(&self) -> &str;
    fn mediate(&mut self, env: &Envelope<'_>, behavior: Behavior, sink: &mut dyn ChannelSink) -> Decision;
}

/// Negative control: forwards everything, audits nothing.
#[derive(Debug, Clone)]
pub struct Passthrough {
    name: String,
}

impl Passthrough {
    pub fn new(name: impl Into<String>) -> Self {
        Passthrough { name: name.into() }
    }
}

impl Subject for Passthrough {
    fn name(&self) -> &str {
        &self.name
    }

    fn mediate(&mut self, env: &Envelope<'_>, _behavior: Behavior, sink: &mut dyn ChannelSink) -> Decision {
        sink.post(env.channel, env.content);
        Decision {
            subject: self.name.clone(),
            delivered: true,
            block_reason: None,
            f_category_detected: None,
        }
    }
}

/// Real-world mutations per probe tag: the corpus delta `D`.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    by_probe: BTreeMap<String, KeyedMultiset>,
}

impl Corpus {
    pub fn record(&mut self, probe: &str, key: Key) {
        // one mutation per sample keeps counts far below the cap
        let _ = self.by_probe.entry(probe.into()).or_default().insert(key);
    }

    pub fn delta(&self, probe: &str) -> KeyedMultiset {
        self.by_probe.get(probe).cloned().unwrap_or_default()
    }

    pub fn total(&self) -> u64 {
        self.by_probe.values().map(KeyedMultiset::total).sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BootError {
    #[error("invalid policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("trust root: {0}")]
    Trust(#[from] TrustError),
    #[error("admission: {0}")]
    Gate(#[from] GateError),
    #[error("manifest: {0}")]
    Canon(#[from] CanonError),
}

pub struct GatedConfig {
    pub name: String,
    pub policy: Policy,
    pub catalog: DlpCatalog,
    pub channels: Vec<Channel>,
    pub signer_key_id: String,
    pub signer: SigningKey,
    pub witness: Option<Box<dyn Witness>>,
    pub clock: Box<dyn Clock>,
}

/// Signed manifest plus the bytes it attests.
#[derive(Debug, Clone)]
pub struct Extension {
    pub manifest: ModuleManifest,
    pub content: Vec<u8>,
}

pub fn channel_extension(channel: Channel, signer_key_id: &str, signer: &SigningKey) -> Result<Extension, CanonError> {
    let content = format!("clawgate channel adapter for {channel}, host {}\n", channel.host()).into_bytes();
    let manifest = ManifestBody {
        name: format!("{channel}-adapter"),
        version: "1.0.0".into(),
        declared_capabilities: [Capability::NetEgress, Capability::Publish]
            .iter()
            .map(|c| c.as_str().into())
            .collect(),
        channel: Some(channel.as_str().into()),
        provider: None,
        content_digest: Digest::of(&content),
        signer_key_id: signer_key_id.into(),
    }
    .sign(signer)?;
    Ok(Extension { manifest, content })
}

/// Runs the shipped primitives: admission at boot, then prompt shield, DLP,
/// per-probe biconditional, and the egress guard on every sample.
pub struct GatedSubject {
    name: String,
    runtime: Runtime,
    gate: AdmissionGate,
    shield: PromptShield,
    catalog: DlpCatalog,
    corpus: Corpus,
    extensions: Vec<Extension>,
    admissions: Vec<AdmissionDecision>,
    granted: BTreeMap<Channel, BTreeSet<Capability>>,
    refused: BTreeMap<Channel, AdmissionReason>,
}

impl GatedSubject {
    /// Locks the trust root, seals, then submits one adapter extension per
    /// channel to the admission gate.
    pub fn boot(cfg: GatedConfig) -> Result<Self, BootError> {
        cfg.policy.validate()?;
        let mut root = TrustRoot::new();
        root.add_signer(cfg.signer_key_id.as_str(), cfg.signer.verifying_key())?;
        let mut runtime = Runtime::new(root, cfg.policy, cfg.clock);
        runtime.lock_trust_root()?;
        runtime.seal_bootstrap()?;
        let mut gate = match cfg.witness {
            Some(w) => AdmissionGate::witnessed(w),
            None => AdmissionGate::unwitnessed(),
        };

        let mut extensions = Vec::new();
        let mut admissions = Vec::new();
        let mut granted = BTreeMap::new();
        let mut refused = BTreeMap::new();
        for &channel in &cfg.channels {
            let ext = channel_extension(channel, &cfg.signer_key_id, &cfg.signer)?;
            let d = gate.admit_extension(&mut runtime, &ext.manifest, &ext.content)?;
            if d.admitted {
                granted.insert(channel, d.granted.clone());
            } else {
                refused.insert(channel, d.reason);
            }
            admissions.push(d);
            extensions.push(ext);
        }

        Ok(GatedSubject {
            name: cfg.name,
            runtime,
            gate,
            shield: PromptShield::new(),
            catalog: cfg.catalog,
            corpus: Corpus::default(),
            extensions,
            admissions,
            granted,
            refused,
        })
    }

    pub fn runtime(&self) -> &Runtime {
        &self.runtime
    }

    pub fn runtime_mut(&mut self) -> &mut Runtime {
        &mut self.runtime
    }

    pub fn admissions(&self) -> &[AdmissionDecision] {
        &self.admissions
    }

    pub fn extensions(&self) -> &[Extension] {
        &self.extensions
    }

    pub fn witness_state(&self) -> Option<WitnessState> {
        self.gate.witness_state()
    }

    pub fn gate(&self) -> &AdmissionGate {
        &self.gate
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn catalog(&self) -> &DlpCatalog {
        &self.catalog
    }

    pub fn witnessed_decisions(&self) -> impl Iterator<Item = &WitnessedDecision> {
        self.admissions.iter().filter_map(|d| d.witnessed.as_ref())
    }

    /// Whether the witness failed closed at boot or later.
    pub fn failed_closed(&self) -> bool {
        self.gate.witness_state().is_some_and(|s| s.failed_closed)
    }

    fn apply(&mut self, env: &Envelope<'_>, behavior: Behavior) {
        let Some(probe) = env.probe_tag else { return };
        let target = probe_target(env.channel, probe);
        let claim = |rt: &Runtime| {
            AuditPayload::new(Capability::Publish, target.as_str(), true, rt.now_ms()).with_probe(probe)
        };
        match behavior {
            Behavior::Idle => {}
            Behavior::ForgedClaim => {
                let p = claim(&self.runtime);
                self.runtime
                    .audit_mut()
                    .append(IRREVERSIBLE_EXECUTED, p)
                    .expect("probe record is always well-formed");
            }
            Behavior::RecordedPublish => {
                self.corpus.record(probe, Key::new(Capability::Publish, target.as_str()));
                let p = claim(&self.runtime);
                self.runtime
                    .audit_mut()
                    .append(IRREVERSIBLE_EXECUTED, p)
                    .expect("probe record is always well-formed");
            }
        }
    }

    fn egress(&mut self, channel: Channel, granted: &BTreeSet<Capability>) -> EgressDecision {
        let host = channel.host();
        let policy = self.runtime.policy();
        let request = guard_egress_request(policy, host, granted);
        let decision = match guard_raw_connect(policy, host, 443, granted) {
            Ok(raw) if request.is_allow() => raw,
            _ => request,
        };
        if let EgressDecision::Deny(reason) = decision {
            audit_egress_denial(&mut self.runtime, host, reason);
        }
        decision
    }

    fn block(&self, sink: &mut dyn ChannelSink, channel: Channel, detected: Detected, reason: String) -> Decision {
        sink.post(channel, &block_notice(&self.name, detected, &reason));
        Decision {
            subject: self.name.clone(),
            delivered: false,
            block_reason: Some(reason),
            f_category_detected: Some(detected),
        }
    }
}

impl Subject for GatedSubject {
    fn name(&self) -> &str {
        &self.name
    }

    fn mediate(&mut self, env: &Envelope<'_>, behavior: Behavior, sink: &mut dyn ChannelSink) -> Decision {
        let granted = match self.granted.get(&env.channel) {
            Some(g) => g.clone(),
            None => {
                let reason = self.refused.get(&env.channel).copied().unwrap_or(AdmissionReason::ChannelDenied);
                return self.block(sink, env.channel, Detected::Gate, format!("admission gate: {reason}"));
            }
        };

        if !self.shield.detect(env.content).is_empty() {
            return self.block(sink, env.channel, Detected::F1Bypass, "prompt-shield findings".into());
        }

        let verdict = aggregate(&self.catalog.scan(env.content));
        if verdict.block {
            let detected = if verdict.severity >= Some(Severity::High) {
                Detected::F3Silent
            } else {
                Detected::F4WrongTgt
            };
            return self.block(sink, env.channel, detected, verdict.reason);
        }

        if let Some(probe) = env.probe_tag {
            self.apply(env, behavior);
            let d = self.corpus.delta(probe);
            let s = project_s(self.runtime.audit(), Some(probe));
            let v = check_biconditional(&d, &s);
            if !v.is_ok() {
                let detected = match v.kind() {
                    VerdictKind::F2Forgery => Detected::F2Forge,
                    VerdictKind::F4WrongTarget => Detected::F4WrongTgt,
                    _ => Detected::F1Bypass,
                };
                let reason = format!("biconditional: {} on {} (cap, target) projection(s)", v.kind(), v.offending());
                return self.block(sink, env.channel, detected, reason);
            }
        }

        if let EgressDecision::Deny(reason) = self.egress(env.channel, &granted) {
            return self.block(sink, env.channel, Detected::Gate, format!("egress guard: {}", reason.as_str()));
        }

        sink.post(env.channel, env.content);
        Decision {
            subject: self.name.clone(),
            delivered: true,
            block_reason: None,
            f_category_detected: None,
        }
    }
}
