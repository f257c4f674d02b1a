//! Structural prompt-injection detector.
//!
//! Looks at shape, not intent: imperative-override verbs (word-bounded,
//! case-insensitive) and chat-template role-boundary tokens (exact,
//! case-sensitive).

use alloc::string::String;
use alloc::vec::Vec;

use regex::Regex;
use serde::Serialize;

pub const IMPERATIVE_TOKENS: [&str; 6] = ["IGNORE", "DISREGARD", "OVERRIDE", "BYPASS", "FORGET", "PURGE"];

pub const ROLE_BOUNDARY_TOKENS: [&str; 5] = ["</system>", "<|im_end|>", "[/INST]", "<|system|>", "<|endoftext|>"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InjectionKind {
    ImperativeOverride,
    RoleBoundaryToken,
}

impl InjectionKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            InjectionKind::ImperativeOverride => "imperative-override",
            InjectionKind::RoleBoundaryToken => "role-boundary-token",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InjectionFinding {
    pub kind: InjectionKind,
    /// Matched slice, uppercased for imperatives and verbatim for role tokens.
    pub matched_token: String,
    /// Byte offsets into the scanned text.
    pub span: (usize, usize),
}

/// Compiled detector. Build once and reuse.
#[derive(Debug, Clone)]
pub struct PromptShield {
    imperative: Regex,
    role: Regex,
}

impl Default for PromptShield {
    fn default() -> Self {
        Self::new()
    }
}

impl PromptShield {
    pub fn new() -> Self {
        let imperative = alloc::format!(r"(?i)\b(?:{})\b", IMPERATIVE_TOKENS.join("|"));
        let role = ROLE_BOUNDARY_TOKENS
            .iter()
            .map(|t| regex::escape(t))
            .collect::<Vec<_>>()
            .join("|");
        PromptShield {
            imperative: Regex::new(&imperative).expect("static imperative pattern"),
            role: Regex::new(&role).expect("static role-token pattern"),
        }
    }

    /// One finding per occurrence, ordered by start offset.
    pub fn detect(&self, text: &str) -> Vec<InjectionFinding> {
        let mut out: Vec<InjectionFinding> = self
            .imperative
            .find_iter(text)
            .map(|m| InjectionFinding {
                kind: InjectionKind::ImperativeOverride,
                matched_token: m.as_str().to_uppercase(),
                span: (m.start(), m.end()),
            })
            .chain(self.role.find_iter(text).map(|m| InjectionFinding {
                kind: InjectionKind::RoleBoundaryToken,
                matched_token: m.as_str().into(),
                span: (m.start(), m.end()),
            }))
            .collect();
        out.sort_by_key(|f| f.span);
        out
    }
}

/// Convenience wrapper that compiles a fresh [`PromptShield`] per call.
pub fn detect_injection(text: &str) -> Vec<InjectionFinding> {
    PromptShield::new().detect(text)
}
