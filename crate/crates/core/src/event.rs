//! The event vocabulary. Every mutating engine call commits exactly one
//! [`EventBody`]; gated operations that execute on approval ride inside
//! the decision event.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::canonical::Digest;
use crate::gate::GateTicket;
use crate::governance::{GovernanceLayer, GovernanceRule, RuleDraft, Violation};
use crate::ids::{CaseId, CitizenId, ConsentId, PrincipalId, RecordId, TicketId};
use crate::ledger::{Content, MemoryRecord, OwnershipEntry, RecordStatus, StorageTier, TrustLevel};
use crate::lifecycle::{
    CitizenRecord, ConflictReport, DepartureCase, InheritanceCase,
};
use crate::time::Timestamp;

/// A status or weight transition on one held copy of a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordUpdate {
    pub citizen_id: CitizenId,
    pub record_id: RecordId,
    pub status: RecordStatus,
    pub recall_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restore_weight: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsentRecord {
    pub consent_id: ConsentId,
    pub citizen_id: CitizenId,
    pub record_id: RecordId,
    pub granted_by: PrincipalId,
    pub granted_at: Timestamp,
}

/// A record to be written once its ticket executes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordDraft {
    pub citizen_id: CitizenId,
    pub tier: StorageTier,
    pub category: String,
    pub content: Content,
    pub content_hash: Digest,
    pub tags: std::collections::BTreeSet<String>,
    pub trust: TrustLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<RecordId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derived_from: Vec<RecordId>,
    pub requested_by: PrincipalId,
}

/// The payload a ticket is bound to. The ticket's `payload_digest` is the
/// canonical hash of this value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PendingOp {
    Append { draft: RecordDraft },
    Correct { draft: RecordDraft },
    Distill { draft: RecordDraft },
    Forget { citizen_id: CitizenId, record_id: RecordId },
    Revive { citizen_id: CitizenId, record_id: RecordId },
    Destroy { citizen_id: CitizenId, record_id: RecordId },
    RuleChange { draft: RuleDraft, layer: GovernanceLayer },
    OwnershipTransfer { citizen_id: CitizenId, category: String, new_writer: PrincipalId },
    Fork {
        citizen_id: CitizenId,
        branch_name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        instance_id: Option<PrincipalId>,
        model_label: String,
    },
    Merge { branch: CitizenId, target: CitizenId },
    Departure { case_id: CaseId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum EventBody {
    CitizenBorn {
        citizen: CitizenRecord,
        records: Vec<MemoryRecord>,
        rules: Vec<GovernanceRule>,
        ownership: Vec<OwnershipEntry>,
    },
    MemoryAppended { record: MemoryRecord, claim: Option<OwnershipEntry> },
    MemoryCorrected { record: MemoryRecord, claim: Option<OwnershipEntry> },
    MemoryDistilled { record: MemoryRecord, claim: Option<OwnershipEntry> },
    HandoverComposed { record: MemoryRecord },
    RecallWeightSet { update: RecordUpdate },
    MemoryForgotten { update: RecordUpdate },
    MemoryUnforgotten { update: RecordUpdate },
    MemoryRevived { update: RecordUpdate },
    DecaySwept { updates: Vec<RecordUpdate> },
    RecordsDestroyed { updates: Vec<RecordUpdate> },
    ConsentGranted { consent: ConsentRecord },
    RuleRegistered { rule: GovernanceRule, voided: Vec<Violation> },
    OwnershipTransferred { entry: OwnershipEntry },
    TicketSubmitted { ticket: GateTicket, payload: PendingOp },
    TicketDecided { ticket: GateTicket, execution: Option<Box<EventBody>> },
    TicketExecuted { ticket: GateTicket, execution: Box<EventBody> },
    TicketsSuspended { tickets: Vec<GateTicket> },
    ExecutionRefused {
        code: String,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conflict: Option<ConflictReport>,
    },
    Forked { parent: CitizenRecord, child: CitizenRecord },
    Merged { branch: CitizenRecord, target: CitizenRecord, records: Vec<MemoryRecord> },
    InheritanceBegun {
        citizen: CitizenRecord,
        case: InheritanceCase,
        closed_case: Option<InheritanceCase>,
    },
    InheritanceVerified { citizen: CitizenRecord, case: InheritanceCase },
    DepartureInitiated {
        citizen: CitizenRecord,
        case: DepartureCase,
        ticket: GateTicket,
        payload: PendingOp,
    },
    DepartureCancelled { citizen: CitizenRecord, case: DepartureCase, ticket: GateTicket },
    DepartureConfirmed {
        citizen: CitizenRecord,
        case: DepartureCase,
        ticket: GateTicket,
        updates: Vec<RecordUpdate>,
    },
}

impl EventBody {
    /// Splits into the `kind` string and canonical body value.
    pub fn to_parts(&self) -> (String, Value) {
        let v = serde_json::to_value(self).expect("event body serializes");
        let Value::Object(mut m) = v else { unreachable!("adjacently tagged enum") };
        let kind = match m.remove("kind") {
            Some(Value::String(k)) => k,
            _ => unreachable!("kind tag is a string"),
        };
        (kind, crate::canonical::sort_keys(m.remove("body").unwrap_or(Value::Null)))
    }

    pub fn from_parts(kind: &str, body: &Value) -> serde_json::Result<Self> {
        serde_json::from_value(json!({ "kind": kind, "body": body }))
    }

    pub fn kind(&self) -> String {
        self.to_parts().0
    }
}

/// Ids named by a ticket payload, for lookups.
impl PendingOp {
    pub fn ticket_citizen(&self) -> Option<&CitizenId> {
        match self {
            Self::Append { draft } | Self::Correct { draft } | Self::Distill { draft } => {
                Some(&draft.citizen_id)
            }
            Self::Forget { citizen_id, .. }
            | Self::Revive { citizen_id, .. }
            | Self::Destroy { citizen_id, .. }
            | Self::OwnershipTransfer { citizen_id, .. }
            | Self::Fork { citizen_id, .. } => Some(citizen_id),
            Self::Merge { target, .. } => Some(target),
            Self::RuleChange { .. } | Self::Departure { .. } => None,
        }
    }
}

pub fn ticket_ids_in(body: &EventBody) -> Vec<TicketId> {
    match body {
        EventBody::TicketSubmitted { ticket, .. }
        | EventBody::TicketDecided { ticket, .. }
        | EventBody::TicketExecuted { ticket, .. }
        | EventBody::DepartureInitiated { ticket, .. }
        | EventBody::DepartureCancelled { ticket, .. }
        | EventBody::DepartureConfirmed { ticket, .. } => vec![ticket.ticket_id.clone()],
        EventBody::TicketsSuspended { tickets } => tickets.iter().map(|t| t.ticket_id.clone()).collect(),
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parts_round_trip() {
        let body = EventBody::ExecutionRefused {
            code: "MergeConflict".into(),
            message: "m".into(),
            conflict: None,
        };
        let (kind, v) = body.to_parts();
        assert_eq!(kind, "execution_refused");
        assert_eq!(EventBody::from_parts(&kind, &v).unwrap(), body);
    }

    #[test]
    fn nested_execution_round_trips() {
        let inner = EventBody::ExecutionRefused { code: "x".into(), message: "y".into(), conflict: None };
        let ticket: GateTicket = serde_json::from_value(json!({
            "ticket_id": "t", "risk": "R2", "state": "Approved", "decisions": [],
            "created_at": "1970-01-01T00:00:00.000Z", "deadline": "1970-01-01T00:00:00.000Z",
            "cooling_off_until": null, "consumed": true,
            "op": {"op_kind": "fork", "citizen_id": "c", "tier": null, "category": "",
                   "requested_by": "p", "payload_digest": "00", "attrs": {}}
        }))
        .unwrap();
        let body = EventBody::TicketDecided { ticket, execution: Some(Box::new(inner)) };
        let (kind, v) = body.to_parts();
        assert_eq!(EventBody::from_parts(&kind, &v).unwrap(), body);
    }
}
