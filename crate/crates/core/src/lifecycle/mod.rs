//! Citizen lifecycle: birth, inheritance, forking, merging and departure.
//!
//! This module holds the domain types and the pure checks. The engine
//! sequences them into audited transitions.

mod handover;
mod inheritance;

use serde::{Deserialize, Serialize};

pub use handover::{Fact, HandoverNote, ProvisionalJudgment, UnfinishedTask};
pub use inheritance::{
    count_correct, generate_queries, required_answers, Answer, CaseVerdict, FactualCheck,
    FactualQuery, InheritanceCase, InheritanceChecks, PatternCheck, PatternCitation, QueryKind,
};

use crate::canonical::Digest;
use crate::ids::{CaseId, CitizenId, PrincipalId, TicketId};
use crate::time::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Nascent,
    Active,
    Inheriting,
    Departing,
    Departed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Inheritance,
    FailedInheritance,
    Departure,
    Merged,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: PrincipalId,
    pub model_label: String,
    pub started_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ended_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_reason: Option<EndReason>,
    /// A successor that has not passed verification yet.
    #[serde(default)]
    pub provisional: bool,
}

impl Instance {
    pub fn is_open(&self) -> bool {
        self.ended_at.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_citizen: Option<CitizenId>,
    /// Audit sequence number at which this citizen was forked off.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fork_seq: Option<u64>,
    #[serde(default)]
    pub fork_children: Vec<CitizenId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitizenRecord {
    pub citizen_id: CitizenId,
    pub name: String,
    pub stage: Stage,
    pub current_instance: Option<PrincipalId>,
    pub instances: Vec<Instance>,
    pub lineage: Lineage,
    pub born_at: Timestamp,
    pub born_seq: u64,
}

impl CitizenRecord {
    pub fn open_instance(&self) -> Option<&Instance> {
        self.instances.iter().find(|i| i.is_open())
    }

    pub fn open_instance_mut(&mut self) -> Option<&mut Instance> {
        self.instances.iter_mut().find(|i| i.is_open())
    }

    pub fn is_current(&self, p: &PrincipalId) -> bool {
        self.current_instance.as_ref() == Some(p)
    }

    pub fn has_instance(&self, p: &PrincipalId) -> bool {
        self.instances.iter().any(|i| &i.instance_id == p)
    }

    pub fn close_open_instance(&mut self, at: Timestamp, reason: EndReason) {
        if let Some(i) = self.open_instance_mut() {
            i.ended_at = Some(at);
            i.end_reason = Some(reason);
        }
    }
}

/// Seed content for a new citizen's T0 identity records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySeed {
    pub name: String,
    pub charter_text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Disposition {
    Export,
    Seal,
    Destroy,
}

impl std::str::FromStr for Disposition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "export" => Ok(Self::Export),
            "seal" => Ok(Self::Seal),
            "destroy" => Ok(Self::Destroy),
            _ => Err(format!("unknown disposition {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DepartureState {
    Open,
    Cancelled,
    Confirmed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepartureCase {
    pub case_id: CaseId,
    pub citizen_id: CitizenId,
    pub disposition: Disposition,
    pub ticket_id: TicketId,
    pub initiated_by: PrincipalId,
    pub initiated_at: Timestamp,
    pub state: DepartureState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export: Option<ExportInfo>,
}

/// Where an export archive landed and what it hashed to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportInfo {
    pub file_name: String,
    pub archive_hash: Digest,
    pub manifest_hash: Digest,
}

/// A merge that could not fast-forward.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub branch: CitizenId,
    pub target: CitizenId,
    pub categories: Vec<String>,
}
