//! Runtime security primitives for agent runtimes that perform irreversible
//! operations (publishing, paying, writing files, actuating devices).
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches a
//! clock, a file, or an entropy source is injected by the caller; the std
//! companion crate (`clawgate`) wires these to the operating system.
//!
//! Layout:
//!
//! - [`audit`]: hash-chained append-only journal and its projection onto
//!   `(capability, target)` multisets.
//! - [`reconcile`]: the biconditional check between what the world saw
//!   (corpus delta) and what the audit log claims.
//! - [`policy`]: capability vocabulary, Bell-LaPadula levels, allowlists.
//! - [`trust`]: Ed25519 signer root, manifest verification, bootstrap seal.
//! - [`gatekeeper`]: extension admission (optionally witnessed) and the
//!   two-layer egress guard.
//! - [`detectors`]: prompt-injection shield and DLP catalog.
//! - [`stats`]: Wilson intervals, McNemar, confusion matrices.
//! - [`harness`]: seeded sample generation and the mediating subjects.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod audit;
pub mod canon;
pub mod detectors;
pub mod gatekeeper;
pub mod harness;
pub mod policy;
pub mod reconcile;
pub mod stats;
pub mod trust;

pub use audit::{AuditPayload, AuditRecord, ChainState, ChainVerdict, Digest};
pub use policy::{Capability, ClassificationLevel, Policy};
pub use reconcile::{check_biconditional, multiset_diff, KeyedMultiset, TargetId, Verdict};

/// Source of wall-clock milliseconds for audit timestamps.
pub trait Clock {
    fn now_ms(&self) -> u64;
}

/// Clock that advances by one millisecond per reading. Used in tests and
/// anywhere reproducible journals matter more than real time.
#[derive(Debug, Default)]
pub struct TickClock {
    next: core::cell::Cell<u64>,
}

impl TickClock {
    pub fn starting_at(ms: u64) -> Self {
        Self {
            next: core::cell::Cell::new(ms),
        }
    }
}

impl Clock for TickClock {
    fn now_ms(&self) -> u64 {
        let v = self.next.get();
        self.next.set(v + 1);
        v
    }
}
