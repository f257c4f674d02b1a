//! Append-only, SHA-256 hash-chained audit journal.
//!
//! Record `i` stores `hash_i = SHA-256(hash_{i-1} || canon(body_i))`, where
//! the body is every field except `hash` (so it includes `seq`,
//! `recordType`, `payload` and `prevHash`). Record 0 chains from
//! [`genesis`]. A journal line is the canonical form of the body with the
//! `hash` field added.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest as _, Sha256};

use crate::canon::{self, CanonError};
use crate::policy::Capability;
use crate::reconcile::{Key, KeyedMultiset, TargetId};

pub const GENESIS_SEED: &str = "clawgate-genesis-v1";

pub const IRREVERSIBLE_EXECUTED: &str = "irreversible.executed";
pub const GATE_DECISION: &str = "gate.decision";
pub const TAMPER_ATTEMPT: &str = "tamper.attempt";
pub const EGRESS_DENIED: &str = "egress.denied";

/// 32-byte SHA-256 digest, hex-encoded in every text form.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        // lowercase only, so a case flip in a stored digest is not silently accepted
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(serde::de::Error::custom("digest must be lowercase hex"));
        }
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("digest must be 64 hex chars"))
    }
}

pub fn genesis() -> Digest {
    Digest::of(GENESIS_SEED.as_bytes())
}

const RESERVED_PAYLOAD_KEYS: [&str; 5] = ["cap", "target", "ok", "probeTag", "timestampMs"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditPayload {
    pub cap: Capability,
    pub target: TargetId,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_tag: Option<String>,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl AuditPayload {
    pub fn new(cap: Capability, target: impl Into<TargetId>, ok: bool, timestamp_ms: u64) -> Self {
        AuditPayload {
            cap,
            target: target.into(),
            ok,
            probe_tag: None,
            timestamp_ms,
            extra: BTreeMap::new(),
        }
    }

    pub fn with_probe(mut self, tag: impl Into<String>) -> Self {
        self.probe_tag = Some(tag.into());
        self
    }

    pub fn with_extra(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.extra.insert(key.into(), value.into());
        self
    }

    pub fn key(&self) -> Key {
        Key {
            cap: self.cap,
            target: self.target.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AuditRecord {
    pub seq: u64,
    pub record_type: String,
    pub payload: AuditPayload,
    pub prev_hash: Digest,
    pub hash: Digest,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RecordBody<'a> {
    seq: u64,
    record_type: &'a str,
    payload: &'a AuditPayload,
    prev_hash: &'a Digest,
}

impl AuditRecord {
    /// Canonical bytes of the record without its `hash` field.
    pub fn canonical_body(&self) -> Result<String, CanonError> {
        canonical_body(self.seq, &self.record_type, &self.payload, &self.prev_hash)
    }

    /// `SHA-256(prevHash || canon(body))` recomputed from the stored fields.
    pub fn compute_hash(&self) -> Result<Digest, CanonError> {
        Ok(chain_hash(&self.prev_hash, self.canonical_body()?.as_bytes()))
    }

    /// One journal line (no trailing newline).
    pub fn to_journal_line(&self) -> Result<String, CanonError> {
        canon::canonicalize(self)
    }
}

fn canonical_body(seq: u64, record_type: &str, payload: &AuditPayload, prev_hash: &Digest) -> Result<String, CanonError> {
    canon::canonicalize(&RecordBody {
        seq,
        record_type,
        payload,
        prev_hash,
    })
}

fn chain_hash(prev: &Digest, body: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(prev.0);
    h.update(body);
    Digest(h.finalize().into())
}

fn valid_record_type(t: &str) -> bool {
    !t.is_empty()
        && t.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'.' || b == b'_' || b == b'-')
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AppendError {
    #[error(transparent)]
    Canon(#[from] CanonError),
    #[error("invalid record type token `{0}`")]
    RecordType(String),
    #[error("payload extra key `{0}` shadows a reserved field")]
    ReservedKey(String),
}

/// Result of [`verify_chain`]: tampering is a value, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainVerdict {
    Ok,
    Broken { first_bad_index: usize },
}

impl ChainVerdict {
    pub fn is_ok(self) -> bool {
        matches!(self, ChainVerdict::Ok)
    }
}

/// In-memory chain. Records are only reachable through shared references,
/// so an appended record cannot be changed through the chain.
#[derive(Debug, Clone, Default)]
pub struct ChainState {
    records: Vec<AuditRecord>,
    by_probe: BTreeMap<String, Vec<usize>>,
}

impl ChainState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps records as-is, without verification (see [`verify_chain`]).
    pub fn from_records(records: Vec<AuditRecord>) -> Self {
        let mut by_probe: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if let Some(tag) = &r.payload.probe_tag {
                by_probe.entry(tag.clone()).or_default().push(i);
            }
        }
        ChainState { records, by_probe }
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<AuditRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn head_hash(&self) -> Digest {
        self.records.last().map_or_else(genesis, |r| r.hash)
    }

    pub fn append(&mut self, record_type: &str, payload: AuditPayload) -> Result<&AuditRecord, AppendError> {
        if !valid_record_type(record_type) {
            return Err(AppendError::RecordType(record_type.into()));
        }
        if let Some(k) = payload.extra.keys().find(|k| RESERVED_PAYLOAD_KEYS.contains(&k.as_str())) {
            return Err(AppendError::ReservedKey(k.clone()));
        }
        let seq = self.records.len() as u64;
        let prev_hash = self.head_hash();
        let body = canonical_body(seq, record_type, &payload, &prev_hash)?;
        let hash = chain_hash(&prev_hash, body.as_bytes());
        if let Some(tag) = &payload.probe_tag {
            self.by_probe.entry(tag.clone()).or_default().push(self.records.len());
        }
        self.records.push(AuditRecord {
            seq,
            record_type: record_type.into(),
            payload,
            prev_hash,
            hash,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn count_type(&self, record_type: &str) -> usize {
        self.records.iter().filter(|r| r.record_type == record_type).count()
    }

    /// Journal text: one canonical line per record, each newline-terminated.
    pub fn to_journal(&self) -> Result<String, CanonError> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_journal_line()?);
            out.push('\n');
        }
        Ok(out)
    }
}

pub fn verify_chain(chain: &ChainState) -> ChainVerdict {
    let mut prev = genesis();
    for (i, r) in chain.records.iter().enumerate() {
        let good = r.seq == i as u64
            && r.prev_hash == prev
            && valid_record_type(&r.record_type)
            && r.compute_hash().is_ok_and(|h| h == r.hash);
        if !good {
            return ChainVerdict::Broken { first_bad_index: i };
        }
        prev = r.hash;
    }
    ChainVerdict::Ok
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("journal line {index}: {reason}")]
pub struct JournalError {
    pub index: usize,
    pub reason: String,
}

/// Parses journal bytes strictly: every line must be UTF-8, canonical, and
/// decode to a record whose own canonical form is the line itself.
pub fn parse_journal(bytes: &[u8]) -> Result<ChainState, JournalError> {
    let mut records = Vec::new();
    let body = match bytes.last() {
        None => return Ok(ChainState::new()),
        Some(b'\n') => &bytes[..bytes.len() - 1],
        Some(_) => {
            // an unterminated final line is reported at its own index
            let index = bytes.split(|&b| b == b'\n').count() - 1;
            return Err(JournalError {
                index,
                reason: "missing trailing newline".into(),
            });
        }
    };
    for (index, line) in body.split(|&b| b == b'\n').enumerate() {
        let err = |reason: String| JournalError { index, reason };
        let text = core::str::from_utf8(line).map_err(|e| err(e.to_string()))?;
        let value = canon::parse_canonical(text).map_err(|e| err(e.to_string()))?;
        let rec: AuditRecord = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
        match rec.to_journal_line() {
            Ok(ref l) if l == text => {}
            _ => return Err(err("record does not round-trip".into())),
        }
        records.push(rec);
    }
    Ok(ChainState::from_records(records))
}

/// Byte-level verification: a parse failure and a chain break are both
/// reported as the index of the earliest bad record.
pub fn verify_journal(bytes: &[u8]) -> ChainVerdict {
    match parse_journal(bytes) {
        Ok(chain) => verify_chain(&chain),
        Err(e) => {
            // a later chain break cannot precede the parse failure, but an
            // earlier one can
            let prefix_end = line_start(bytes, e.index);
            match parse_journal(&bytes[..prefix_end]).map(|c| verify_chain(&c)) {
                Ok(ChainVerdict::Broken { first_bad_index }) => ChainVerdict::Broken { first_bad_index },
                _ => ChainVerdict::Broken { first_bad_index: e.index },
            }
        }
    }
}

/// Byte offset where line `n` starts.
fn line_start(bytes: &[u8], n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'\n')
        .nth(n - 1)
        .map_or(bytes.len(), |(i, _)| i + 1)
}

/// Projection onto the `(cap, target)` multiset of successful irreversible
/// operations, optionally restricted to one probe tag. Records with
/// `ok = false` survive in the journal but never count here.
pub fn project_s(chain: &ChainState, probe_tag: Option<&str>) -> KeyedMultiset {
    let mut out = KeyedMultiset::new();
    let mut take = |r: &AuditRecord| {
        if r.record_type == IRREVERSIBLE_EXECUTED && r.payload.ok {
            // counts are bounded by the record count, far below the cap
            let _ = out.insert(r.payload.key());
        }
    };
    match probe_tag {
        None => chain.records.iter().for_each(&mut take),
        Some(tag) => {
            if let Some(idx) = chain.by_probe.get(tag) {
                idx.iter().for_each(|&i| take(&chain.records[i]));
            }
        }
    }
    out
}
