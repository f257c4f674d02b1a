//! Module-signing trust root, manifest verification, and the bootstrap seal.
//!
//! Boot order is: register signers, lock the root, load policy, seal. After
//! the seal neither the root nor the policy can change; every attempt is
//! refused and written to the audit chain as `tamper.attempt`.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};

use crate::audit::{AuditPayload, ChainState, Digest, TAMPER_ATTEMPT};
use crate::canon::{self, CanonError};
use crate::policy::{Capability, Policy};
use crate::Clock;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrustError {
    #[error("trust root is already locked")]
    AlreadyLocked,
    #[error("trust root is locked; signer set is immutable")]
    MutationAfterLock,
    #[error("bootstrap seal requires a locked trust root")]
    SealBeforeLock,
    #[error("runtime is sealed; refused mutation of {0}")]
    TamperAttempt(&'static str),
}

/// Signer public keys by key id.
#[derive(Debug, Clone, Default)]
pub struct TrustRoot {
    signers: BTreeMap<String, VerifyingKey>,
    locked: bool,
}

impl TrustRoot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_signer(&mut self, key_id: impl Into<String>, key: VerifyingKey) -> Result<(), TrustError> {
        if self.locked {
            return Err(TrustError::MutationAfterLock);
        }
        self.signers.insert(key_id.into(), key);
        Ok(())
    }

    pub fn lock(&mut self) -> Result<(), TrustError> {
        if self.locked {
            return Err(TrustError::AlreadyLocked);
        }
        self.locked = true;
        Ok(())
    }

    pub fn is_locked(&self) -> bool {
        self.locked
    }

    pub fn signer(&self, key_id: &str) -> Option<&VerifyingKey> {
        self.signers.get(key_id)
    }

    pub fn signers(&self) -> impl Iterator<Item = (&str, &VerifyingKey)> {
        self.signers.iter().map(|(k, v)| (k.as_str(), v))
    }
}

pub fn lock_trust_root(mut root: TrustRoot) -> Result<TrustRoot, TrustError> {
    root.lock()?;
    Ok(root)
}

/// Everything a manifest signature covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ManifestBody {
    pub name: String,
    pub version: String,
    /// Kept as raw strings: tokens outside the vocabulary must survive
    /// parsing so the admission gate can reject them by name.
    pub declared_capabilities: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    pub content_digest: Digest,
    pub signer_key_id: String,
}

impl ManifestBody {
    pub fn canonical(&self) -> Result<String, CanonError> {
        canon::canonicalize(self)
    }

    pub fn sign(self, key: &SigningKey) -> Result<ModuleManifest, CanonError> {
        let sig = key.sign(self.canonical()?.as_bytes());
        Ok(ModuleManifest {
            body: self,
            signature: hex::encode(sig.to_bytes()),
        })
    }
}

/// Signed extension manifest. On disk it is the canonical JSON of the body
/// with a detached hex `signature` field alongside the body fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleManifest {
    #[serde(flatten)]
    pub body: ManifestBody,
    pub signature: String,
}

impl ModuleManifest {
    pub fn to_file_string(&self) -> Result<String, CanonError> {
        let mut s = canon::canonicalize(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_file_str(text: &str) -> Result<Self, CanonError> {
        serde_json::from_str(text.trim_end()).map_err(|e| CanonError::Malformed(alloc::format!("{e}")))
    }

    /// Capabilities the manifest declares, or the first token outside the
    /// vocabulary.
    pub fn capabilities(&self) -> Result<BTreeSet<Capability>, String> {
        self.body
            .declared_capabilities
            .iter()
            .map(|t| t.parse::<Capability>().map_err(|_| t.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ManifestCheck {
    Ok,
    UnknownSigner,
    BadSignature,
    DigestMismatch,
}

impl ManifestCheck {
    pub const fn as_str(self) -> &'static str {
        match self {
            ManifestCheck::Ok => "Ok",
            ManifestCheck::UnknownSigner => "UnknownSigner",
            ManifestCheck::BadSignature => "BadSignature",
            ManifestCheck::DigestMismatch => "DigestMismatch",
        }
    }
}

/// Checks, in order: signer known, signature valid over the canonical body,
/// `SHA-256(content)` equals the declared digest. Reports the first failure.
pub fn verify_manifest(root: &TrustRoot, manifest: &ModuleManifest, content: &[u8]) -> ManifestCheck {
    let Some(key) = root.signer(&manifest.body.signer_key_id) else {
        return ManifestCheck::UnknownSigner;
    };
    let sig_ok = (|| {
        let raw: [u8; 64] = hex::decode(&manifest.signature).ok()?.try_into().ok()?;
        let body = manifest.body.canonical().ok()?;
        key.verify_strict(body.as_bytes(), &Signature::from_bytes(&raw)).ok()
    })()
    .is_some();
    if !sig_ok {
        return ManifestCheck::BadSignature;
    }
    if Digest::of(content) != manifest.body.content_digest {
        return ManifestCheck::DigestMismatch;
    }
    ManifestCheck::Ok
}

/// Verifies a detached Ed25519 signature given as hex.
pub fn verify_hex_signature(key: &VerifyingKey, msg: &[u8], sig_hex: &str) -> bool {
    let Some(raw) = hex::decode(sig_hex).ok().and_then(|v| <[u8; 64]>::try_from(v).ok()) else {
        return false;
    };
    key.verify_strict(msg, &Signature::from_bytes(&raw)).is_ok()
}

/// Monotone seal flag: `false -> true` only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SealState {
    sealed: bool,
}

impl SealState {
    pub fn is_sealed(self) -> bool {
        self.sealed
    }
}

/// The mutable boot-time state of one subject: trust root, policy, seal and
/// the subject's audit chain.
pub struct Runtime {
    root: TrustRoot,
    policy: Policy,
    seal: SealState,
    audit: ChainState,
    clock: Box<dyn Clock>,
}

impl core::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Runtime")
            .field("root", &self.root)
            .field("policy", &self.policy)
            .field("seal", &self.seal)
            .field("audit_len", &self.audit.len())
            .finish()
    }
}

impl Runtime {
    pub fn new(root: TrustRoot, policy: Policy, clock: Box<dyn Clock>) -> Self {
        Runtime {
            root,
            policy,
            seal: SealState::default(),
            audit: ChainState::new(),
            clock,
        }
    }

    pub fn root(&self) -> &TrustRoot {
        &self.root
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn seal_state(&self) -> SealState {
        self.seal
    }

    pub fn is_sealed(&self) -> bool {
        self.seal.sealed
    }

    pub fn audit(&self) -> &ChainState {
        &self.audit
    }

    pub fn audit_mut(&mut self) -> &mut ChainState {
        &mut self.audit
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn add_signer(&mut self, key_id: &str, key: VerifyingKey) -> Result<(), TrustError> {
        if self.seal.sealed {
            return Err(self.tamper("trust-root", "addSigner"));
        }
        self.root.add_signer(key_id, key)
    }

    pub fn lock_trust_root(&mut self) -> Result<(), TrustError> {
        if self.seal.sealed {
            return Err(self.tamper("trust-root", "lockTrustRoot"));
        }
        self.root.lock()
    }

    pub fn update_policy(&mut self, f: impl FnOnce(&mut Policy)) -> Result<(), TrustError> {
        if self.seal.sealed {
            return Err(self.tamper("policy", "updatePolicy"));
        }
        f(&mut self.policy);
        Ok(())
    }

    pub fn replace_policy(&mut self, policy: Policy) -> Result<(), TrustError> {
        self.update_policy(|p| *p = policy)
    }

    /// Seals the runtime. Sealing twice is a successful no-op.
    pub fn seal_bootstrap(&mut self) -> Result<SealState, TrustError> {
        if !self.root.is_locked() {
            return Err(TrustError::SealBeforeLock);
        }
        self.seal.sealed = true;
        Ok(self.seal)
    }

    fn tamper(&mut self, what: &'static str, attempt: &str) -> TrustError {
        let payload = AuditPayload::new(Capability::FsWrite, alloc::format!("runtime:{what}").as_str(), false, self.now_ms())
            .with_extra("attempt", attempt);
        // the record type and payload keys are fixed, so append cannot fail
        self.audit
            .append(TAMPER_ATTEMPT, payload)
            .expect("tamper record is always well-formed");
        TrustError::TamperAttempt(what)
    }
}

pub fn seal_bootstrap(runtime: &mut Runtime) -> Result<SealState, TrustError> {
    runtime.seal_bootstrap()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::TickClock;

    pub(crate) fn key(seed: u8) -> SigningKey {
        SigningKey::from_bytes(&[seed; 32])
    }

    pub(crate) fn manifest(name: &str, content: &[u8], caps: &[&str], signer: &str, key: &SigningKey) -> ModuleManifest {
        ManifestBody {
            name: name.into(),
            version: "1.0.0".into(),
            declared_capabilities: caps.iter().map(|s| String::from(*s)).collect(),
            channel: None,
            provider: None,
            content_digest: Digest::of(content),
            signer_key_id: signer.into(),
        }
        .sign(key)
        .unwrap()
    }

    fn root_with(id: &str, k: &SigningKey) -> TrustRoot {
        let mut r = TrustRoot::new();
        r.add_signer(id, k.verifying_key()).unwrap();
        r
    }

    #[test]
    fn lock_contract() {
        let k = key(1);
        let r = lock_trust_root(root_with("a", &k)).unwrap();
        let mut r2 = r.clone();
        assert_eq!(r2.add_signer("b", key(2).verifying_key()), Err(TrustError::MutationAfterLock));
        assert_eq!(lock_trust_root(r2).unwrap_err(), TrustError::AlreadyLocked);
        let m = manifest("ext", b"code", &["net.egress"], "a", &k);
        assert_eq!(verify_manifest(&r, &m, b"code"), ManifestCheck::Ok);
    }

    #[test]
    fn manifest_failures() {
        let k = key(1);
        let root = root_with("a", &k);
        let m = manifest("ext", b"code", &["net.egress"], "a", &k);
        assert_eq!(verify_manifest(&root, &m, b"code"), ManifestCheck::Ok);
        assert_eq!(verify_manifest(&root, &m, b"codf"), ManifestCheck::DigestMismatch);

        let stranger = manifest("ext", b"code", &["net.egress"], "z", &key(9));
        assert_eq!(verify_manifest(&root, &stranger, b"code"), ManifestCheck::UnknownSigner);

        // claims a trusted id but signed by someone else
        let forged = manifest("ext", b"code", &["net.egress"], "a", &key(9));
        assert_eq!(verify_manifest(&root, &forged, b"code"), ManifestCheck::BadSignature);

        let mut widened = m.clone();
        widened.body.declared_capabilities.insert("pay".into());
        assert_eq!(verify_manifest(&root, &widened, b"code"), ManifestCheck::BadSignature);

        let mut garbage = m.clone();
        garbage.signature = "zz".into();
        assert_eq!(verify_manifest(&root, &garbage, b"code"), ManifestCheck::BadSignature);

        // bad signature wins over a digest mismatch
        assert_eq!(verify_manifest(&root, &forged, b"other"), ManifestCheck::BadSignature);
    }

    #[test]
    fn manifest_file_round_trip() {
        let k = key(3);
        let m = manifest("ext", b"x", &["publish", "bogus.cap"], "a", &k);
        let text = m.to_file_string().unwrap();
        assert!(text.ends_with('\n'));
        let back = ModuleManifest::from_file_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.capabilities().unwrap_err(), "bogus.cap");
        assert!(verify_hex_signature(&k.verifying_key(), m.body.canonical().unwrap().as_bytes(), &m.signature));
    }

    fn runtime() -> Runtime {
        Runtime::new(TrustRoot::new(), Policy::default(), Box::new(TickClock::starting_at(0)))
    }

    #[test]
    fn seal_requires_lock() {
        let mut rt = runtime();
        assert_eq!(rt.seal_bootstrap(), Err(TrustError::SealBeforeLock));
        assert!(!rt.is_sealed());
    }

    #[test]
    fn seal_twice_is_noop() {
        let mut rt = runtime();
        rt.lock_trust_root().unwrap();
        rt.seal_bootstrap().unwrap();
        let before = (rt.audit().len(), rt.policy().clone());
        assert!(seal_bootstrap(&mut rt).unwrap().is_sealed());
        assert_eq!((rt.audit().len(), rt.policy().clone()), before);
    }

    #[test]
    fn post_seal_mutations_are_audited_once_each() {
        let mut rt = runtime();
        rt.add_signer("a", key(1).verifying_key()).unwrap();
        rt.update_policy(|p| {
            p.allowed_channels.insert("c".into());
        })
        .unwrap();
        rt.lock_trust_root().unwrap();
        rt.seal_bootstrap().unwrap();
        assert_eq!(rt.audit().count_type(TAMPER_ATTEMPT), 0);

        let attempts = [
            rt.update_policy(|p| p.vpn_only = true),
            rt.add_signer("b", key(2).verifying_key()),
            rt.replace_policy(Policy::default()),
            rt.lock_trust_root(),
        ];
        assert!(attempts.iter().all(|r| matches!(r, Err(TrustError::TamperAttempt(_)))));
        assert_eq!(rt.audit().count_type(TAMPER_ATTEMPT), 4);
        assert!(!rt.policy().vpn_only);
        assert!(rt.policy().is_channel_allowed("c"));
        assert!(rt.root().signer("b").is_none());
        assert!(crate::audit::verify_chain(rt.audit()).is_ok());
    }
}
