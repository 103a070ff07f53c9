//! Request bodies for engine calls. These are also the gateway's JSON
//! request shapes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::gate::{GateTicket, Verdict};
use crate::governance::RuleSpec;
use crate::ids::{CitizenId, ConsentId, PrincipalId, RecordId, TicketId};
use crate::ledger::{StorageTier, TrustLevel};
use crate::lifecycle::{Answer, Disposition, HandoverNote, IdentitySeed, PatternCitation};

/// Either the operation ran, or it is waiting on a gate ticket.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Done(T),
    Gated(GateTicket),
}

impl<T> Outcome<T> {
    pub fn done(self) -> Option<T> {
        match self {
            Self::Done(t) => Some(t),
            Self::Gated(_) => None,
        }
    }

    pub fn ticket(self) -> Option<GateTicket> {
        match self {
            Self::Gated(t) => Some(t),
            Self::Done(_) => None,
        }
    }
}

fn default_model_label() -> String {
    "unspecified".to_string()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthRequest {
    pub identity: IdentitySeed,
    #[serde(default)]
    pub constitution_pack: Vec<RuleSpec>,
    #[serde(default)]
    pub shared_knowledge: Vec<String>,
    /// Principal id for the first instance; minted when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<PrincipalId>,
    #[serde(default = "default_model_label")]
    pub model_label: String,
}

impl BirthRequest {
    pub fn named(name: &str, charter: &str) -> Self {
        Self {
            identity: IdentitySeed { name: name.into(), charter_text: charter.into() },
            constitution_pack: Vec::new(),
            shared_knowledge: Vec::new(),
            instance_id: None,
            model_label: default_model_label(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendRequest {
    pub tier: StorageTier,
    pub category: String,
    pub content: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default = "TrustLevel::firsthand")]
    pub trust: TrustLevel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectRequest {
    pub content: String,
    /// Defaults to the target's tags.
    #[serde(default)]
    pub tags: Option<BTreeSet<String>>,
    /// Defaults to the target's trust.
    #[serde(default)]
    pub trust: Option<TrustLevel>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillRequest {
    pub source_ids: Vec<RecordId>,
    pub category: String,
    pub content: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default = "TrustLevel::firsthand")]
    pub trust: TrustLevel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferRequest {
    pub category: String,
    pub new_writer: PrincipalId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub verdict: Verdict,
    /// Missing and empty are both refused with `EmptyRationale`.
    #[serde(default)]
    pub rationale: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DestroyRequest {
    /// Absent: open an R4 destruction ticket. Present: execute it.
    #[serde(default)]
    pub ticket_id: Option<TicketId>,
    #[serde(default)]
    pub consent_id: Option<ConsentId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoverRequest {
    pub note: HandoverNote,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InheritanceRequest {
    #[serde(default = "default_model_label")]
    pub model_label: String,
    #[serde(default)]
    pub instance_id: Option<PrincipalId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    #[serde(default)]
    pub answers: Vec<Answer>,
    #[serde(default)]
    pub pattern_citation: Option<PatternCitation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForkRequest {
    pub branch_name: String,
    #[serde(default)]
    pub instance_id: Option<PrincipalId>,
    #[serde(default = "default_model_label")]
    pub model_label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeRequest {
    pub target: CitizenId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepartureRequest {
    pub disposition: Disposition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfirmRequest {
    #[serde(default)]
    pub reaffirm: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightRequest {
    pub weight: f64,
}
