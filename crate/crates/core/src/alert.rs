//! Alerts for the console feed, derived from committed events.

use serde::{Deserialize, Serialize};

use crate::audit::AuditEvent;
use crate::event::EventBody;
use crate::gate::TicketState;
use crate::governance::RiskTier;
use crate::ids::{CaseId, CitizenId, TicketId};
use crate::lifecycle::CaseVerdict;
use crate::time::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    TicketSubmitted,
    TicketDecided,
    TicketSuspended,
    InheritanceFailed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub seq: u64,
    pub at: Timestamp,
    pub kind: AlertKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citizen_id: Option<CitizenId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ticket_id: Option<TicketId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskTier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<TicketState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<CaseId>,
}

pub fn alerts_for(event: &AuditEvent, body: &EventBody) -> Vec<Alert> {
    let base = Alert {
        seq: event.seq,
        at: event.at,
        kind: AlertKind::TicketSubmitted,
        citizen_id: event.citizen_id.clone(),
        ticket_id: None,
        risk: None,
        state: None,
        case_id: None,
    };
    let ticket_alert = |kind, t: &crate::gate::GateTicket| Alert {
        kind,
        citizen_id: Some(t.op.citizen_id.clone()),
        ticket_id: Some(t.ticket_id.clone()),
        risk: Some(t.risk),
        state: Some(t.state),
        ..base.clone()
    };
    match body {
        EventBody::TicketSubmitted { ticket, .. } | EventBody::DepartureInitiated { ticket, .. } => {
            vec![ticket_alert(AlertKind::TicketSubmitted, ticket)]
        }
        EventBody::TicketDecided { ticket, .. }
        | EventBody::TicketExecuted { ticket, .. }
        | EventBody::DepartureCancelled { ticket, .. }
        | EventBody::DepartureConfirmed { ticket, .. } => {
            vec![ticket_alert(AlertKind::TicketDecided, ticket)]
        }
        EventBody::TicketsSuspended { tickets } => tickets
            .iter()
            .map(|t| ticket_alert(AlertKind::TicketSuspended, t))
            .collect(),
        EventBody::InheritanceVerified { case, .. } if case.verdict == CaseVerdict::Failed => {
            vec![Alert {
                kind: AlertKind::InheritanceFailed,
                case_id: Some(case.case_id.clone()),
                citizen_id: Some(case.citizen_id.clone()),
                ..base
            }]
        }
        _ => Vec::new(),
    }
}
