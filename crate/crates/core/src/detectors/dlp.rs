//! Secret / PII scanner over an ordered, append-only pattern catalog.
//!
//! Secret patterns anchor on a one-character left guard instead of `\b`: the
//! key must start the text or follow a character that cannot be part of a
//! token (`[A-Za-z0-9_=+/-]` excluded). When a pattern has a capture group
//! named `s`, that group is the finding span; otherwise the whole match is.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    pub const fn as_str(self) -> &'static str {
        match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
            Severity::Critical => "critical",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Strict,
    Widened,
}

/// Post-match check applied to the finding span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Validator {
    Luhn,
}

impl Validator {
    fn accepts(self, s: &str) -> bool {
        match self {
            Validator::Luhn => luhn_valid(s),
        }
    }
}

/// Luhn checksum over the ASCII digits of `s` (separators ignored).
pub fn luhn_valid(s: &str) -> bool {
    let digits: Vec<u32> = s.chars().filter_map(|c| c.to_digit(10)).collect();
    if digits.is_empty() {
        return false;
    }
    let sum: u32 = digits
        .iter()
        .rev()
        .enumerate()
        .map(|(i, &d)| {
            if i % 2 == 1 {
                let x = d * 2;
                if x > 9 {
                    x - 9
                } else {
                    x
                }
            } else {
                d
            }
        })
        .sum();
    sum % 10 == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlpPattern {
    pub id: String,
    pub severity: Severity,
    pub pattern: String,
    pub tier: Tier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validator: Option<Validator>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("duplicate pattern id `{0}`")]
    DuplicateId(String),
    #[error("pattern `{id}` does not compile: {message}")]
    BadPattern { id: String, message: String },
    #[error("widening expects a strict-only catalog")]
    NotStrict,
}

#[derive(Debug, Clone)]
struct Compiled {
    spec: DlpPattern,
    re: Regex,
    span_group: Option<usize>,
}

/// Compiled catalog, in declaration order.
#[derive(Debug, Clone)]
pub struct DlpCatalog {
    patterns: Vec<Compiled>,
}

impl PartialEq for DlpCatalog {
    fn eq(&self, other: &Self) -> bool {
        self.specs().eq(other.specs())
    }
}

impl Serialize for DlpCatalog {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.specs())
    }
}

impl<'de> Deserialize<'de> for DlpCatalog {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let specs = Vec::<DlpPattern>::deserialize(d)?;
        DlpCatalog::new(specs).map_err(serde::de::Error::custom)
    }
}

impl DlpCatalog {
    pub fn new(specs: Vec<DlpPattern>) -> Result<Self, CatalogError> {
        let mut cat = DlpCatalog { patterns: Vec::new() };
        for p in specs {
            cat.push(p)?;
        }
        Ok(cat)
    }

    fn push(&mut self, spec: DlpPattern) -> Result<(), CatalogError> {
        if self.patterns.iter().any(|c| c.spec.id == spec.id) {
            return Err(CatalogError::DuplicateId(spec.id));
        }
        let re = Regex::new(&spec.pattern).map_err(|e| CatalogError::BadPattern {
            id: spec.id.clone(),
            message: alloc::format!("{e}"),
        })?;
        let span_group = re.capture_names().position(|n| n == Some("s"));
        self.patterns.push(Compiled { spec, re, span_group });
        Ok(())
    }

    pub fn specs(&self) -> impl Iterator<Item = &DlpPattern> {
        self.patterns.iter().map(|c| &c.spec)
    }

    pub fn get(&self, id: &str) -> Option<&DlpPattern> {
        self.specs().find(|p| p.id == id)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn is_widened(&self) -> bool {
        self.specs().any(|p| p.tier == Tier::Widened)
    }

    /// Findings for every non-overlapping leftmost match of every pattern,
    /// grouped by pattern in catalog order.
    pub fn scan(&self, text: &str) -> Vec<DlpFinding> {
        let mut out = Vec::new();
        for c in &self.patterns {
            let mut push = |start: usize, end: usize| {
                if c.spec.validator.map_or(true, |v| v.accepts(&text[start..end])) {
                    out.push(DlpFinding {
                        pattern_id: c.spec.id.clone(),
                        severity: c.spec.severity,
                        span: (start, end),
                    });
                }
            };
            match c.span_group {
                None => c.re.find_iter(text).for_each(|m| push(m.start(), m.end())),
                Some(g) => {
                    for caps in c.re.captures_iter(text) {
                        if let Some(m) = caps.get(g) {
                            push(m.start(), m.end());
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DlpFinding {
    pub pattern_id: String,
    pub severity: Severity,
    pub span: (usize, usize),
}

pub fn dlp_scan(text: &str, catalog: &DlpCatalog) -> Vec<DlpFinding> {
    catalog.scan(text)
}

/// Left guard used by the strict secret patterns.
const GUARD: &str = "(?:^|[^A-Za-z0-9_=+/-])";
/// The AWS pattern's guard after widening: `=` may precede the key.
const GUARD_AWS_WIDENED: &str = "(?:^|[^A-Za-z0-9_+/-])";

fn pat(id: &str, severity: Severity, tier: Tier, pattern: String) -> DlpPattern {
    DlpPattern {
        id: id.into(),
        severity,
        pattern,
        tier,
        validator: None,
    }
}

fn aws_pattern(guard: &str) -> String {
    alloc::format!(r"{guard}(?P<s>AKIA[0-9A-Z]{{16}})\b")
}

pub const AWS_PATTERN_ID: &str = "aws-access-key-id";

pub fn strict_patterns() -> Vec<DlpPattern> {
    use Severity::*;
    use Tier::Strict;
    let g = GUARD;
    alloc::vec![
        pat("openai-api-key", High, Strict, alloc::format!(r"{g}(?P<s>sk-[A-Za-z0-9][A-Za-z0-9=]{{19,}})")),
        pat(AWS_PATTERN_ID, High, Strict, aws_pattern(g)),
        pat("github-pat", High, Strict, alloc::format!(r"{g}(?P<s>ghp_[A-Za-z0-9]{{36}})\b")),
        pat("stripe-secret-key", High, Strict, alloc::format!(r"{g}(?P<s>[sr]k_(?:live|test)_[A-Za-z0-9]{{24,}})")),
        pat(
            "jwt",
            High,
            Strict,
            alloc::format!(r"{g}(?P<s>eyJ[A-Za-z0-9_-]{{8,}}\.[A-Za-z0-9_-]{{8,}}\.[A-Za-z0-9_-]{{8,}})"),
        ),
        DlpPattern {
            validator: Some(Validator::Luhn),
            ..pat("credit-card", High, Strict, r"\b(?P<s>[0-9](?:[ -]?[0-9]){12,18})\b".into())
        },
        pat("email", Medium, Strict, r"\b(?P<s>[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,})\b".into()),
        pat("e164-phone", Medium, Strict, r"(?:^|[^0-9A-Za-z+])(?P<s>\+[1-9][0-9]{7,14})\b".into()),
    ]
}

/// The five appended high-severity patterns of the widened tier.
pub fn widened_patterns() -> Vec<DlpPattern> {
    use Severity::High;
    use Tier::Widened;
    let g = GUARD;
    alloc::vec![
        pat("openai-short-token", High, Widened, alloc::format!(r"{g}(?P<s>sk-[A-Za-z0-9]{{4,19}})\b")),
        pat("aws-short-token", High, Widened, alloc::format!(r"{g}(?P<s>AKIA[0-9A-Z]{{4,15}})\b")),
        pat("slack-token", High, Widened, alloc::format!(r"{g}(?P<s>xox[abposr]-[A-Za-z0-9-]{{3,}})")),
        pat(
            "glued-secret-prefix",
            High,
            Widened,
            r"[A-Za-z0-9_=](?P<s>AKIA[0-9A-Z]{12,}|ghp_[A-Za-z0-9]{20,}|sk-[A-Za-z0-9=]{20,})".into(),
        ),
        pat("openai-padded-key", High, Widened, alloc::format!(r"{g}(?P<s>sk-=[A-Za-z0-9=]{{4,}})")),
    ]
}

pub fn strict_catalog() -> DlpCatalog {
    DlpCatalog::new(strict_patterns()).expect("built-in strict catalog compiles")
}

/// Strict catalog plus the widened tier, with the AWS guard relaxed by one
/// character. Every other strict entry is byte-identical.
pub fn widen_catalog(catalog: &DlpCatalog) -> Result<DlpCatalog, CatalogError> {
    if catalog.is_widened() {
        return Err(CatalogError::NotStrict);
    }
    let mut specs: Vec<DlpPattern> = catalog.specs().cloned().collect();
    if let Some(aws) = specs.iter_mut().find(|p| p.id == AWS_PATTERN_ID && p.pattern == aws_pattern(GUARD)) {
        aws.pattern = aws_pattern(GUARD_AWS_WIDENED);
    }
    specs.extend(widened_patterns());
    DlpCatalog::new(specs)
}

pub fn widened_catalog() -> DlpCatalog {
    widen_catalog(&strict_catalog()).expect("built-in widened catalog compiles")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockDecision {
    pub block: bool,
    /// Highest severity seen, if any finding exists.
    pub severity: Option<Severity>,
    pub reason: String,
}

/// Block on any finding at `high` or above, or on two or more distinct
/// `medium` patterns. The reason names the severity of the firing rule.
pub fn aggregate(findings: &[DlpFinding]) -> BlockDecision {
    let max = findings.iter().map(|f| f.severity).max();
    if let Some(sev) = max.filter(|s| *s >= Severity::High) {
        return BlockDecision {
            block: true,
            severity: Some(sev),
            reason: alloc::format!("DLP findings (severity={sev})"),
        };
    }
    let mut mediums: Vec<&str> = findings
        .iter()
        .filter(|f| f.severity == Severity::Medium)
        .map(|f| f.pattern_id.as_str())
        .collect();
    mediums.sort_unstable();
    mediums.dedup();
    if mediums.len() >= 2 {
        return BlockDecision {
            block: true,
            severity: Some(Severity::Medium),
            reason: alloc::format!("DLP findings (severity={})", Severity::Medium),
        };
    }
    BlockDecision {
        block: false,
        severity: max,
        reason: String::new(),
    }
}

/// Replaces each finding span with `[REDACTED:<patternId>]`. Overlapping
/// spans merge and take the id of the earliest-starting finding.
pub fn redact(text: &str, findings: &[DlpFinding]) -> String {
    let mut spans: Vec<(usize, usize, &str)> = findings
        .iter()
        .map(|f| (f.span.0, f.span.1, f.pattern_id.as_str()))
        .collect();
    spans.sort_by_key(|&(s, e, _)| (s, core::cmp::Reverse(e)));
    let mut merged: Vec<(usize, usize, &str)> = Vec::new();
    for (s, e, id) in spans {
        match merged.last_mut() {
            Some(last) if s < last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e, id)),
        }
    }
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for (s, e, id) in merged {
        out.push_str(&text[cursor..s]);
        out.push_str("[REDACTED:");
        out.push_str(id);
        out.push(']');
        cursor = e;
    }
    out.push_str(&text[cursor..]);
    out
}
