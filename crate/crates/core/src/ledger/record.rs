use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::canonical::Digest;
use crate::ids::{CitizenId, PrincipalId, RecordId};
use crate::time::Timestamp;

/// Semantic storage stratum. T0 is the most stable and protected; T3 holds
/// cross-instance handover content and sits outside the stability order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StorageTier {
    T0,
    T1,
    T2,
    T3,
}

impl StorageTier {
    pub const ALL: [StorageTier; 4] = [Self::T0, Self::T1, Self::T2, Self::T3];

    /// Stability rank for T0..T2 (higher is more stable); `None` for T3.
    pub fn stability(self) -> Option<u8> {
        match self {
            Self::T0 => Some(3),
            Self::T1 => Some(2),
            Self::T2 => Some(1),
            Self::T3 => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::T0 => "T0",
            Self::T1 => "T1",
            Self::T2 => "T2",
            Self::T3 => "T3",
        }
    }
}

impl fmt::Display for StorageTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StorageTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T0" => Ok(Self::T0),
            "T1" => Ok(Self::T1),
            "T2" => Ok(Self::T2),
            "T3" => Ok(Self::T3),
            other => Err(format!("unknown tier {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrustKind {
    Firsthand,
    Reported,
    Inferred,
}

impl FromStr for TrustKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "firsthand" => Ok(Self::Firsthand),
            "reported" => Ok(Self::Reported),
            "inferred" => Ok(Self::Inferred),
            other => Err(format!("unknown trust level {other:?}")),
        }
    }
}

/// Provenance grade. `Inferred` content must carry a non-empty uncertainty
/// tag; that rule is a red line checked before anything is written.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustLevel {
    pub level: TrustKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty_tag: Option<String>,
}

impl TrustLevel {
    pub fn firsthand() -> Self {
        Self { level: TrustKind::Firsthand, uncertainty_tag: None }
    }

    pub fn reported() -> Self {
        Self { level: TrustKind::Reported, uncertainty_tag: None }
    }

    pub fn inferred(tag: impl Into<String>) -> Self {
        Self { level: TrustKind::Inferred, uncertainty_tag: Some(tag.into()) }
    }

    pub fn has_uncertainty_tag(&self) -> bool {
        self.uncertainty_tag.as_deref().is_some_and(|t| !t.trim().is_empty())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RecordStatus {
    Active,
    Forgotten,
    Archived,
    Destroyed,
}

/// Where a record's text lives.
///
/// Short bodies are carried inline in audit events. Bodies over the
/// inlining threshold live in the blob store and events carry only their
/// hash, so destruction can remove the text without touching the chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Content {
    Inline(String),
    Blob(Digest),
    Redacted,
}

impl Content {
    pub fn inline_text(&self) -> Option<&str> {
        match self {
            Self::Inline(s) => Some(s),
            _ => None,
        }
    }
}

/// One immutable ledger entry. Only `recall_weight` and `status` move after
/// append, and only through audited events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub record_id: RecordId,
    /// Citizen whose ledger the record was first written to.
    pub citizen_id: CitizenId,
    pub tier: StorageTier,
    pub category: String,
    pub content: Content,
    pub tags: BTreeSet<String>,
    pub trust: TrustLevel,
    pub recall_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<RecordId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derived_from: Vec<RecordId>,
    pub status: RecordStatus,
    pub created_by: PrincipalId,
    pub created_at: Timestamp,
    pub created_seq: u64,
    pub content_hash: Digest,
    /// Weight to restore when a forgotten record is brought back.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restore_weight: Option<f64>,
}

impl MemoryRecord {
    pub fn is_active(&self) -> bool {
        self.status == RecordStatus::Active
    }
}

/// The designated single writer for one (citizen, category).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnershipEntry {
    pub citizen_id: CitizenId,
    pub category: String,
    pub primary_writer: PrincipalId,
    pub since: Timestamp,
}
