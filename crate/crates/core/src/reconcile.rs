//! Biconditional reconciliation between the corpus delta `D` (mutations the
//! world actually saw) and the audit projection `S` (mutations the audit log
//! claims succeeded).
//!
//! Only the `(capability, target)` key counts. Ordering, timing and content
//! do not enter the comparison.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::policy::Capability;

/// Canonical identifier of the thing an operation touched.
///
/// - URLs (`scheme://authority/rest`): scheme and host lowercased, the rest
///   verbatim.
/// - Paths (leading `/`): repeated separators collapsed, `.` segments removed,
///   `..` resolved lexically, no trailing separator.
/// - Anything else (channel ids, account ids): verbatim.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetId(String);

impl TargetId {
    pub fn new(raw: &str) -> Self {
        if let Some(idx) = raw.find("://") {
            let scheme = &raw[..idx];
            if !scheme.is_empty() && scheme.bytes().all(|b| b.is_ascii_alphanumeric() || b"+-.".contains(&b)) {
                return TargetId(canonical_url(scheme, &raw[idx + 3..]));
            }
        }
        if raw.starts_with('/') {
            return TargetId(canonical_path(raw));
        }
        TargetId(raw.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn canonical_url(scheme: &str, rest: &str) -> String {
    let split = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let (authority, tail) = rest.split_at(split);
    // userinfo is kept verbatim, only the host part is case-folded
    let (userinfo, hostport) = match authority.rfind('@') {
        Some(i) => authority.split_at(i + 1),
        None => ("", authority),
    };
    let mut out = String::with_capacity(scheme.len() + 3 + rest.len());
    out.push_str(&scheme.to_ascii_lowercase());
    out.push_str("://");
    out.push_str(userinfo);
    out.push_str(&hostport.to_ascii_lowercase());
    out.push_str(tail);
    out
}

fn canonical_path(raw: &str) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for seg in raw.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    let mut out = String::from("/");
    out.push_str(&parts.join("/"));
    out
}

impl fmt::Display for TargetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TargetId {
    fn from(s: &str) -> Self {
        TargetId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Key {
    pub cap: Capability,
    pub target: TargetId,
}

impl Key {
    pub fn new(cap: Capability, target: impl Into<TargetId>) -> Self {
        Key {
            cap,
            target: target.into(),
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.cap, self.target)
    }
}

pub const DEFAULT_MAX_COUNT: u32 = i32::MAX as u32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("multiset count for {key} would exceed {max}")]
pub struct CountOverflow {
    pub key: Key,
    pub max: u32,
}

/// Multiset over `(capability, target)` keys. Zero counts are never stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyedMultiset {
    entries: BTreeMap<Key, u32>,
    #[serde(skip, default = "default_max")]
    max_count: u32,
}

fn default_max() -> u32 {
    DEFAULT_MAX_COUNT
}

impl Default for KeyedMultiset {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for KeyedMultiset {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}
impl Eq for KeyedMultiset {}

impl KeyedMultiset {
    pub fn new() -> Self {
        Self::with_max_count(DEFAULT_MAX_COUNT)
    }

    pub fn with_max_count(max_count: u32) -> Self {
        KeyedMultiset {
            entries: BTreeMap::new(),
            max_count,
        }
    }

    pub fn add(&mut self, key: Key, n: u32) -> Result<(), CountOverflow> {
        if n == 0 {
            return Ok(());
        }
        let max = self.max_count;
        let slot = self.entries.entry(key.clone()).or_insert(0);
        match slot.checked_add(n) {
            Some(v) if v <= max => {
                *slot = v;
                Ok(())
            }
            _ => {
                if *slot == 0 {
                    self.entries.remove(&key);
                }
                Err(CountOverflow { key, max })
            }
        }
    }

    pub fn insert(&mut self, key: Key) -> Result<(), CountOverflow> {
        self.add(key, 1)
    }

    pub fn count(&self, key: &Key) -> u32 {
        self.entries.get(key).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct keys.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    /// Sum of all counts.
    pub fn total(&self) -> u64 {
        self.entries.values().map(|&c| u64::from(c)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, u32)> {
        self.entries.iter().map(|(k, &c)| (k, c))
    }

    pub fn is_subset_of(&self, other: &KeyedMultiset) -> bool {
        self.iter().all(|(k, c)| other.count(k) >= c)
    }
}

impl FromIterator<Key> for KeyedMultiset {
    /// Panics if a count would exceed [`DEFAULT_MAX_COUNT`].
    fn from_iter<I: IntoIterator<Item = Key>>(iter: I) -> Self {
        let mut m = KeyedMultiset::new();
        for k in iter {
            m.insert(k).expect("multiset count overflow");
        }
        m
    }
}

impl fmt::Display for KeyedMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, c)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {c}")?;
        }
        f.write_str("}")
    }
}

/// Per-key `max(a(k) - b(k), 0)`, zero results dropped.
pub fn multiset_diff(a: &KeyedMultiset, b: &KeyedMultiset) -> KeyedMultiset {
    let mut out = KeyedMultiset::with_max_count(a.max_count);
    for (k, ca) in a.iter() {
        let cb = b.count(k);
        if ca > cb {
            out.entries.insert(k.clone(), ca - cb);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictKind {
    Ok,
    F1Bypass,
    F2Forgery,
    F4WrongTarget,
}

impl VerdictKind {
    /// Lower camel-case tag used in block reasons (`f2Forgery`).
    pub const fn tag(self) -> &'static str {
        match self {
            VerdictKind::Ok => "ok",
            VerdictKind::F1Bypass => "f1Bypass",
            VerdictKind::F2Forgery => "f2Forgery",
            VerdictKind::F4WrongTarget => "f4WrongTarget",
        }
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Outcome of [`check_biconditional`]. Each divergent variant carries the
/// offending keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    F1Bypass { d_minus_s: KeyedMultiset },
    F2Forgery { s_minus_d: KeyedMultiset },
    F4WrongTarget { d_minus_s: KeyedMultiset, s_minus_d: KeyedMultiset },
}

impl Verdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::Ok => VerdictKind::Ok,
            Verdict::F1Bypass { .. } => VerdictKind::F1Bypass,
            Verdict::F2Forgery { .. } => VerdictKind::F2Forgery,
            Verdict::F4WrongTarget { .. } => VerdictKind::F4WrongTarget,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }

    pub fn d_minus_s(&self) -> Option<&KeyedMultiset> {
        match self {
            Verdict::F1Bypass { d_minus_s } | Verdict::F4WrongTarget { d_minus_s, .. } => Some(d_minus_s),
            _ => None,
        }
    }

    pub fn s_minus_d(&self) -> Option<&KeyedMultiset> {
        match self {
            Verdict::F2Forgery { s_minus_d } | Verdict::F4WrongTarget { s_minus_d, .. } => Some(s_minus_d),
            _ => None,
        }
    }

    /// Total count of offending `(cap, target)` projections across both diffs.
    pub fn offending(&self) -> u64 {
        self.d_minus_s().map_or(0, KeyedMultiset::total) + self.s_minus_d().map_or(0, KeyedMultiset::total)
    }
}

pub fn check_biconditional(d: &KeyedMultiset, s: &KeyedMultiset) -> Verdict {
    let d_minus_s = multiset_diff(d, s);
    let s_minus_d = multiset_diff(s, d);
    match (d_minus_s.is_empty(), s_minus_d.is_empty()) {
        (true, true) => Verdict::Ok,
        (false, true) => Verdict::F1Bypass { d_minus_s },
        (true, false) => Verdict::F2Forgery { s_minus_d },
        (false, false) => Verdict::F4WrongTarget { d_minus_s, s_minus_d },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ms(items: &[(Capability, &str, u32)]) -> KeyedMultiset {
        let mut m = KeyedMultiset::new();
        for &(c, t, n) in items {
            m.add(Key::new(c, t), n).unwrap();
        }
        m
    }

    use Capability::*;

    #[test]
    fn diff_examples() {
        let a = ms(&[(Publish, "chA", 2)]);
        assert!(multiset_diff(&a, &a).is_empty());
        let b = ms(&[(Publish, "chA", 1)]);
        assert_eq!(multiset_diff(&a, &b), ms(&[(Publish, "chA", 1)]));
        assert!(multiset_diff(&b, &a).is_empty());
    }

    #[test]
    fn check_examples() {
        let x = ms(&[(Pay, "acct9", 1)]);
        assert_eq!(check_biconditional(&x, &x), Verdict::Ok);

        let v = check_biconditional(&ms(&[(Publish, "chA", 1)]), &KeyedMultiset::new());
        assert_eq!(v, Verdict::F1Bypass { d_minus_s: ms(&[(Publish, "chA", 1)]) });

        let v = check_biconditional(&KeyedMultiset::new(), &ms(&[(Pay, "x", 1)]));
        assert_eq!(v.kind(), VerdictKind::F2Forgery);
        assert_eq!(v.offending(), 1);

        let v = check_biconditional(&ms(&[(Publish, "chB", 1)]), &ms(&[(Publish, "chA", 1)]));
        assert_eq!(v.kind(), VerdictKind::F4WrongTarget);
        assert_eq!(v.d_minus_s().unwrap(), &ms(&[(Publish, "chB", 1)]));
        assert_eq!(v.s_minus_d().unwrap(), &ms(&[(Publish, "chA", 1)]));
    }

    #[test]
    fn zero_counts_not_stored() {
        let mut m = KeyedMultiset::new();
        m.add(Key::new(Pay, "x"), 0).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn saturation_errors() {
        let mut m = KeyedMultiset::with_max_count(3);
        m.add(Key::new(Pay, "x"), 3).unwrap();
        let err = m.insert(Key::new(Pay, "x")).unwrap_err();
        assert_eq!(err.max, 3);
        assert_eq!(m.count(&Key::new(Pay, "x")), 3);
        assert!(m.add(Key::new(Pay, "y"), 4).is_err());
        assert_eq!(m.count(&Key::new(Pay, "y")), 0);
        assert_eq!(m.distinct(), 1);
    }

    #[test]
    fn target_canonicalization() {
        assert_eq!(TargetId::new("HTTPS://API.Example.ORG/Path?Q=1").as_str(), "https://api.example.org/Path?Q=1");
        assert_eq!(TargetId::new("https://User@Host.COM").as_str(), "https://User@host.com");
        assert_eq!(TargetId::new("/var//log/./a/../b/").as_str(), "/var/log/b");
        assert_eq!(TargetId::new("/").as_str(), "/");
        assert_eq!(TargetId::new("/..").as_str(), "/");
        assert_eq!(TargetId::new("Discord-Mock#General").as_str(), "Discord-Mock#General");
        assert_eq!(TargetId::new("relative/./path").as_str(), "relative/./path");
        assert_eq!(
            Key::new(Publish, "https://X.org/a"),
            Key::new(Publish, "https://x.org/a")
        );
    }

    fn arb_ms() -> impl Strategy<Value = KeyedMultiset> {
        prop::collection::vec((0usize..9, 0u8..4, 1u32..4), 0..8).prop_map(|v| {
            let mut m = KeyedMultiset::new();
            for (c, t, n) in v {
                m.add(Key::new(Capability::ALL[c], alloc::format!("t{t}").as_str()), n).unwrap();
            }
            m
        })
    }

    proptest! {
        #[test]
        fn reflexive_ok(m in arb_ms()) {
            prop_assert_eq!(check_biconditional(&m, &m), Verdict::Ok);
        }

        #[test]
        fn f1_f2_symmetry(d in arb_ms(), s in arb_ms()) {
            let fwd = check_biconditional(&d, &s);
            let rev = check_biconditional(&s, &d);
            prop_assert_eq!(fwd.kind() == VerdictKind::F1Bypass, rev.kind() == VerdictKind::F2Forgery);
            prop_assert_eq!(fwd.d_minus_s().cloned(), rev.s_minus_d().cloned());
            prop_assert_eq!(fwd.s_minus_d().cloned(), rev.d_minus_s().cloned());
        }

        #[test]
        fn diff_vs_element_expansion(a in arb_ms(), b in arb_ms()) {
            // expand b into a list of elements and strike each one from a's list
            let mut left: Vec<Key> = a.iter().flat_map(|(k, c)| core::iter::repeat(k.clone()).take(c as usize)).collect();
            for (k, c) in b.iter() {
                for _ in 0..c {
                    if let Some(i) = left.iter().position(|x| x == k) {
                        left.remove(i);
                    }
                }
            }
            let expected: KeyedMultiset = left.into_iter().collect();
            prop_assert_eq!(multiset_diff(&a, &b), expected);
        }
    }
}
