//! Content detectors: the prompt shield and the DLP catalog.

pub mod dlp;
pub mod injection;

pub use dlp::{
    aggregate, dlp_scan, redact, strict_catalog, widen_catalog, widened_catalog, BlockDecision, DlpCatalog,
    DlpFinding, DlpPattern, Severity, Tier,
};
pub use injection::{detect_injection, InjectionFinding, InjectionKind, PromptShield};
