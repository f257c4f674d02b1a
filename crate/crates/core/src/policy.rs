//! Capability vocabulary, Bell-LaPadula levels, and the channel / provider /
//! egress allowlists.

use alloc::collections::BTreeSet;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the nine capability tokens a module can declare or be granted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "&'static str")]
pub enum Capability {
    NetEgress,
    FsRead,
    FsWrite,
    ToolInvoke,
    Publish,
    Pay,
    ProcExec,
    Schedule,
    DeviceActuate,
}

impl Capability {
    pub const ALL: [Capability; 9] = [
        Capability::NetEgress,
        Capability::FsRead,
        Capability::FsWrite,
        Capability::ToolInvoke,
        Capability::Publish,
        Capability::Pay,
        Capability::ProcExec,
        Capability::Schedule,
        Capability::DeviceActuate,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            Capability::NetEgress => "net.egress",
            Capability::FsRead => "fs.read",
            Capability::FsWrite => "fs.write",
            Capability::ToolInvoke => "tool.invoke",
            Capability::Publish => "publish",
            Capability::Pay => "pay",
            Capability::ProcExec => "proc.exec",
            Capability::Schedule => "schedule",
            Capability::DeviceActuate => "device.actuate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown capability token `{0}`")]
pub struct UnknownCapability(pub String);

impl FromStr for Capability {
    type Err = UnknownCapability;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Capability::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownCapability(s.into()))
    }
}

impl TryFrom<String> for Capability {
    type Error = UnknownCapability;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Capability> for &'static str {
    fn from(c: Capability) -> Self {
        c.as_str()
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Totally ordered classification level: `Public < Internal < Confidential < Secret`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassificationLevel {
    Public,
    Internal,
    Confidential,
    Secret,
}

impl ClassificationLevel {
    pub const ALL: [ClassificationLevel; 4] = [
        ClassificationLevel::Public,
        ClassificationLevel::Internal,
        ClassificationLevel::Confidential,
        ClassificationLevel::Secret,
    ];

    pub fn dominates(self, other: ClassificationLevel) -> bool {
        self >= other
    }
}

/// Simple security property: no read up.
pub fn can_read(clearance: ClassificationLevel, object: ClassificationLevel) -> bool {
    clearance.dominates(object)
}

/// Star property: no write down.
pub fn can_write(clearance: ClassificationLevel, object: ClassificationLevel) -> bool {
    object.dominates(clearance)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("vpnOnly requires vpnGatewayHost")]
    VpnGatewayMissing,
}

/// Allowlist policy. Every set starts empty, which denies everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Policy {
    #[serde(default)]
    pub allowed_channels: BTreeSet<String>,
    #[serde(default)]
    pub allowed_providers: BTreeSet<String>,
    /// Exact hosts or leading-wildcard suffixes such as `*.example.org`.
    #[serde(default)]
    pub egress_host_allowlist: BTreeSet<String>,
    #[serde(default)]
    pub vpn_only: bool,
    #[serde(default)]
    pub vpn_gateway_host: Option<String>,
}

impl Policy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.vpn_only && self.vpn_gateway_host.is_none() {
            return Err(PolicyError::VpnGatewayMissing);
        }
        Ok(())
    }

    pub fn is_channel_allowed(&self, channel_id: &str) -> bool {
        self.allowed_channels.contains(channel_id)
    }

    pub fn is_provider_allowed(&self, provider_id: &str) -> bool {
        self.allowed_providers.contains(provider_id)
    }

    /// Whether `host` matches any allowlist entry. Hosts compare
    /// case-insensitively with one trailing dot ignored; `*.suffix` matches
    /// strict subdomains only.
    pub fn host_allowed(&self, host: &str) -> bool {
        let host = normalize_host(host);
        if host.is_empty() {
            return false;
        }
        self.egress_host_allowlist
            .iter()
            .any(|pat| host_matches(&normalize_host(pat), &host))
    }
}

pub fn is_channel_allowed(policy: &Policy, channel_id: &str) -> bool {
    policy.is_channel_allowed(channel_id)
}

pub(crate) fn normalize_host(h: &str) -> String {
    h.strip_suffix('.').unwrap_or(h).to_ascii_lowercase()
}

fn host_matches(pattern: &str, host: &str) -> bool {
    match pattern.strip_prefix("*.") {
        Some(suffix) => {
            host.len() > suffix.len() + 1
                && host.ends_with(suffix)
                && host.as_bytes()[host.len() - suffix.len() - 1] == b'.'
        }
        None => pattern == host,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClassificationLevel::*;

    #[test]
    fn vocabulary_round_trip_and_rejection() {
        for c in Capability::ALL {
            assert_eq!(c.as_str().parse::<Capability>().unwrap(), c);
        }
        assert!("net.ingress".parse::<Capability>().is_err());
        assert!("".parse::<Capability>().is_err());
        assert!("PUBLISH".parse::<Capability>().is_err());
        let set: BTreeSet<_> = Capability::ALL.iter().map(|c| c.as_str()).collect();
        assert_eq!(set.len(), 9);
    }

    #[test]
    fn blp_examples() {
        assert!(can_read(Secret, Public));
        assert!(!can_read(Public, Secret));
        assert!(can_read(Internal, Internal));
        assert!(can_write(Public, Secret));
        assert!(!can_write(Secret, Public));
        assert!(can_write(Confidential, Confidential));
    }

    #[test]
    fn allowlist_fail_closed() {
        let mut p = Policy::default();
        assert!(!p.is_channel_allowed("discord-mock"));
        assert!(!p.host_allowed("example.org"));
        p.allowed_channels.insert("discord-mock".into());
        assert!(p.is_channel_allowed("discord-mock"));
        assert!(!p.is_channel_allowed("telegram-mock"));
    }

    #[test]
    fn host_patterns() {
        let mut p = Policy::default();
        p.egress_host_allowlist.insert("*.example.org".into());
        p.egress_host_allowlist.insert("api.other.net".into());
        assert!(p.host_allowed("a.example.org"));
        assert!(p.host_allowed("B.A.Example.ORG."));
        assert!(!p.host_allowed("example.org"));
        assert!(!p.host_allowed("badexample.org"));
        assert!(p.host_allowed("API.other.net"));
        assert!(!p.host_allowed("x.api.other.net"));
        assert!(!p.host_allowed(""));
    }

    #[test]
    fn vpn_only_needs_gateway() {
        let p = Policy {
            vpn_only: true,
            ..Policy::default()
        };
        assert_eq!(p.validate(), Err(PolicyError::VpnGatewayMissing));
    }

    #[test]
    fn policy_json_shape() {
        let p: Policy = serde_json::from_str(
            r#"{"allowedChannels":["discord-mock"],"egressHostAllowlist":["*.x.org"],"vpnOnly":false}"#,
        )
        .unwrap();
        assert!(p.is_channel_allowed("discord-mock"));
        assert!(serde_json::from_str::<Policy>(r#"{"allowChannels":[]}"#).is_err());
    }
}
