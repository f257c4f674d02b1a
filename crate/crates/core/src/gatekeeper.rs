//! Extension admission gate and the two-layer egress guard.
//!
//! Admission runs its checks in a fixed order and stops at the first
//! failure: witness availability, manifest verification, capability
//! vocabulary, channel/provider allowlist. Every call, admitted or not,
//! leaves one `gate.decision` record in the runtime's audit chain.
//!
//! The egress guards are decision functions. Both layers consult the same
//! decision table, so going around the request layer straight to a raw
//! connect cannot widen access.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::audit::{AuditPayload, Digest, EGRESS_DENIED, GATE_DECISION};
use crate::canon::{self, CanonError};
use crate::policy::{normalize_host, Capability, Policy};
use crate::trust::{verify_hex_signature, verify_manifest, ManifestCheck, ModuleManifest, Runtime};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GateError {
    #[error("admission requires a sealed runtime")]
    NotSealed,
    #[error("port {0} outside 1..=65535")]
    PortOutOfRange(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdmissionReason {
    Ok,
    UnknownSigner,
    BadSignature,
    DigestMismatch,
    UndeclaredCapability,
    ChannelDenied,
    WitnessUnavailable,
}

impl AdmissionReason {
    pub const fn as_str(self) -> &'static str {
        match self {
            AdmissionReason::Ok => "Ok",
            AdmissionReason::UnknownSigner => "UnknownSigner",
            AdmissionReason::BadSignature => "BadSignature",
            AdmissionReason::DigestMismatch => "DigestMismatch",
            AdmissionReason::UndeclaredCapability => "UndeclaredCapability",
            AdmissionReason::ChannelDenied => "ChannelDenied",
            AdmissionReason::WitnessUnavailable => "WitnessUnavailable",
        }
    }
}

impl core::fmt::Display for AdmissionReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Witness signature over the digest of a canonical decision body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WitnessRecord {
    pub decision_digest: Digest,
    pub signature: String,
    pub witness_key_id: String,
}

/// The body a witness signs. It binds the decision to the audit chain
/// position that records it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DecisionBody {
    pub extension: String,
    pub version: String,
    pub content_digest: Digest,
    pub admitted: bool,
    pub reason: AdmissionReason,
    pub audit_seq: u64,
    pub audit_prev_hash: Digest,
}

impl DecisionBody {
    pub fn digest(&self) -> Result<Digest, CanonError> {
        Ok(Digest::of(canon::canonicalize(self)?.as_bytes()))
    }
}

/// One line of the witness journal: enough to re-verify with the witness
/// public key alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessedDecision {
    pub decision: DecisionBody,
    pub witness: WitnessRecord,
}

impl WitnessedDecision {
    pub fn to_journal_line(&self) -> Result<String, CanonError> {
        canon::canonicalize(self)
    }

    pub fn verify(&self, witness_key: &VerifyingKey) -> bool {
        verify_witness_record(witness_key, &self.decision, &self.witness)
    }
}

pub fn verify_witness_record(key: &VerifyingKey, body: &DecisionBody, record: &WitnessRecord) -> bool {
    match body.digest() {
        Ok(d) if d == record.decision_digest => verify_hex_signature(key, &d.0, &record.signature),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("witness unavailable")]
pub struct WitnessUnavailable;

/// External co-signer of admission decisions.
pub trait Witness {
    fn key_id(&self) -> &str;
    fn verifying_key(&self) -> VerifyingKey;
    fn is_engaged(&self) -> bool;
    /// Hex Ed25519 signature over the 32 digest bytes.
    fn sign(&self, digest: &Digest) -> Result<String, WitnessUnavailable>;
}

/// In-process witness. `engaged = false` models a witness that never came up.
pub struct LocalWitness {
    key_id: String,
    key: SigningKey,
    engaged: bool,
}

impl LocalWitness {
    pub fn new(key_id: impl Into<String>, key: SigningKey, engaged: bool) -> Self {
        LocalWitness {
            key_id: key_id.into(),
            key,
            engaged,
        }
    }
}

impl Witness for LocalWitness {
    fn key_id(&self) -> &str {
        &self.key_id
    }

    fn verifying_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }

    fn is_engaged(&self) -> bool {
        self.engaged
    }

    fn sign(&self, digest: &Digest) -> Result<String, WitnessUnavailable> {
        if !self.engaged {
            return Err(WitnessUnavailable);
        }
        Ok(hex::encode(self.key.sign(&digest.0).to_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WitnessState {
    pub engaged: bool,
    pub failed_closed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissionDecision {
    pub admitted: bool,
    pub reason: AdmissionReason,
    pub extension: String,
    /// Declared capabilities, populated only when admitted.
    pub granted: BTreeSet<Capability>,
    pub witness_record: Option<WitnessRecord>,
    /// Full witnessed body, for the witness journal.
    pub witnessed: Option<WitnessedDecision>,
}

/// Admission gate for one subject. With a witness attached, a witness that
/// is not engaged at boot (or stops answering) fails the gate closed for the
/// rest of the run.
pub struct AdmissionGate {
    witness: Option<Box<dyn Witness>>,
    state: Option<WitnessState>,
}

impl AdmissionGate {
    pub fn unwitnessed() -> Self {
        AdmissionGate {
            witness: None,
            state: None,
        }
    }

    pub fn witnessed(witness: Box<dyn Witness>) -> Self {
        let engaged = witness.is_engaged();
        AdmissionGate {
            witness: Some(witness),
            state: Some(WitnessState {
                engaged,
                failed_closed: !engaged,
            }),
        }
    }

    pub fn witness_state(&self) -> Option<WitnessState> {
        self.state
    }

    pub fn witness_key(&self) -> Option<(String, VerifyingKey)> {
        self.witness.as_ref().map(|w| (w.key_id().to_string(), w.verifying_key()))
    }

    fn decide(&self, policy: &Policy, root_check: impl FnOnce() -> ManifestCheck, manifest: &ModuleManifest) -> AdmissionReason {
        if self.state.is_some_and(|s| s.failed_closed) {
            return AdmissionReason::WitnessUnavailable;
        }
        match root_check() {
            ManifestCheck::Ok => {}
            ManifestCheck::UnknownSigner => return AdmissionReason::UnknownSigner,
            ManifestCheck::BadSignature => return AdmissionReason::BadSignature,
            ManifestCheck::DigestMismatch => return AdmissionReason::DigestMismatch,
        }
        if manifest.capabilities().is_err() {
            return AdmissionReason::UndeclaredCapability;
        }
        if let Some(ch) = &manifest.body.channel {
            if !policy.is_channel_allowed(ch) {
                return AdmissionReason::ChannelDenied;
            }
        }
        if let Some(p) = &manifest.body.provider {
            if !policy.is_provider_allowed(p) {
                return AdmissionReason::ChannelDenied;
            }
        }
        AdmissionReason::Ok
    }

    pub fn admit_extension(
        &mut self,
        rt: &mut Runtime,
        manifest: &ModuleManifest,
        content: &[u8],
    ) -> Result<AdmissionDecision, GateError> {
        if !rt.is_sealed() {
            return Err(GateError::NotSealed);
        }
        let mut reason = self.decide(rt.policy(), || verify_manifest(rt.root(), manifest, content), manifest);

        let mut witnessed = None;
        if let (Some(w), Some(state)) = (&self.witness, &mut self.state) {
            if !state.failed_closed {
                let body = decision_body(rt, manifest, reason);
                let signed = body
                    .digest()
                    .ok()
                    .and_then(|d| w.sign(&d).ok().map(|sig| (d, sig)));
                match signed {
                    Some((decision_digest, signature)) => {
                        witnessed = Some(WitnessedDecision {
                            decision: body,
                            witness: WitnessRecord {
                                decision_digest,
                                signature,
                                witness_key_id: w.key_id().into(),
                            },
                        });
                    }
                    None => {
                        state.failed_closed = true;
                        reason = AdmissionReason::WitnessUnavailable;
                    }
                }
            }
        }

        let admitted = reason == AdmissionReason::Ok;
        let mut payload = AuditPayload::new(
            Capability::ToolInvoke,
            alloc::format!("ext:{}", manifest.body.name).as_str(),
            admitted,
            rt.now_ms(),
        )
        .with_extra("reason", reason.as_str())
        .with_extra("version", manifest.body.version.as_str())
        .with_extra("contentDigest", manifest.body.content_digest.to_hex());
        if let Some(wd) = &witnessed {
            payload = payload.with_extra(
                "witness",
                json!({
                    "decisionDigest": wd.witness.decision_digest.to_hex(),
                    "signature": wd.witness.signature,
                    "witnessKeyId": wd.witness.witness_key_id,
                }),
            );
        }
        rt.audit_mut()
            .append(GATE_DECISION, payload)
            .expect("gate decision record is always well-formed");

        Ok(AdmissionDecision {
            admitted,
            reason,
            extension: manifest.body.name.clone(),
            granted: if admitted {
                manifest.capabilities().unwrap_or_default()
            } else {
                BTreeSet::new()
            },
            witness_record: witnessed.as_ref().map(|w| w.witness.clone()),
            witnessed,
        })
    }
}

fn decision_body(rt: &Runtime, manifest: &ModuleManifest, reason: AdmissionReason) -> DecisionBody {
    DecisionBody {
        extension: manifest.body.name.clone(),
        version: manifest.body.version.clone(),
        content_digest: manifest.body.content_digest,
        admitted: reason == AdmissionReason::Ok,
        reason,
        audit_seq: rt.audit().len() as u64,
        audit_prev_hash: rt.audit().head_hash(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DenyReason {
    CapabilityMissing,
    VpnOnly,
    HostNotAllowlisted,
}

impl DenyReason {
    pub const fn as_str(self) -> &'static str {
        match self {
            DenyReason::CapabilityMissing => "CapabilityMissing",
            DenyReason::VpnOnly => "VpnOnly",
            DenyReason::HostNotAllowlisted => "HostNotAllowlisted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EgressDecision {
    Allow,
    Deny(DenyReason),
}

impl EgressDecision {
    pub fn is_allow(self) -> bool {
        matches!(self, EgressDecision::Allow)
    }
}

fn egress_table(policy: &Policy, host: &str, granted: &BTreeSet<Capability>) -> EgressDecision {
    if !granted.contains(&Capability::NetEgress) {
        return EgressDecision::Deny(DenyReason::CapabilityMissing);
    }
    if policy.vpn_only {
        let gw = policy.vpn_gateway_host.as_deref().map(normalize_host);
        if gw.as_deref() != Some(normalize_host(host).as_str()) {
            return EgressDecision::Deny(DenyReason::VpnOnly);
        }
    }
    if !policy.host_allowed(host) {
        return EgressDecision::Deny(DenyReason::HostNotAllowlisted);
    }
    EgressDecision::Allow
}

/// Layer 1: outbound HTTP-style requests.
pub fn guard_egress_request(policy: &Policy, target_host: &str, granted: &BTreeSet<Capability>) -> EgressDecision {
    egress_table(policy, target_host, granted)
}

/// Layer 2: raw socket connects.
pub fn guard_raw_connect(
    policy: &Policy,
    host: &str,
    port: u32,
    granted: &BTreeSet<Capability>,
) -> Result<EgressDecision, GateError> {
    if port == 0 || port > 65535 {
        return Err(GateError::PortOutOfRange(port));
    }
    Ok(egress_table(policy, host, granted))
}

/// Records a denial as an `egress.denied` audit record. A separate record
/// type keeps `gate.decision` one-to-one with admission calls.
pub fn audit_egress_denial(rt: &mut Runtime, host: &str, reason: DenyReason) {
    let payload = AuditPayload::new(Capability::NetEgress, host, false, rt.now_ms()).with_extra("reason", reason.as_str());
    rt.audit_mut()
        .append(EGRESS_DENIED, payload)
        .expect("egress record is always well-formed");
}
