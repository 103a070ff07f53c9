//! Approval gates.
//!
//! A ticket holds one high-risk operation until enough authorized humans
//! approve it. Tickets change state only through [`GateTicket::decide`],
//! [`GateTicket::withdraw`] and, for the clock, [`GateTicket::suspend_if_due`],
//! which can move Pending to Suspended and nothing else.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::governance::{OperationDescriptor, RiskTier};
use crate::ids::{CitizenId, PrincipalId, TicketId};
use crate::time::Timestamp;

pub const WITHDRAWN: &str = "withdrawn";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TicketState {
    Pending,
    Approved,
    Rejected,
    Suspended,
}

impl TicketState {
    pub fn is_open(self) -> bool {
        matches!(self, Self::Pending | Self::Suspended)
    }
}

impl std::str::FromStr for TicketState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pending" => Ok(Self::Pending),
            "approved" => Ok(Self::Approved),
            "rejected" => Ok(Self::Rejected),
            "suspended" => Ok(Self::Suspended),
            _ => Err(format!("unknown ticket state {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Approve,
    Reject,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub approver: PrincipalId,
    pub verdict: Verdict,
    pub rationale: String,
    pub at: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateTicket {
    pub ticket_id: TicketId,
    pub op: OperationDescriptor,
    pub risk: RiskTier,
    pub state: TicketState,
    pub decisions: Vec<Decision>,
    pub created_at: Timestamp,
    pub deadline: Timestamp,
    pub cooling_off_until: Option<Timestamp>,
    /// Set in the same event that executes the bound operation.
    pub consumed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GateError {
    #[error("risk {0} does not require a gate")]
    NotGated(RiskTier),
    #[error("approver {approver} is not authorized for {risk} tickets")]
    NotAuthorizedForTier { approver: PrincipalId, risk: RiskTier },
    #[error("{0} has already decided this ticket")]
    DuplicateApprover(PrincipalId),
    #[error("ticket {0} is closed")]
    TicketClosed(TicketId),
    #[error("a decision needs a rationale")]
    EmptyRationale,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateTiming {
    pub pending_window: Duration,
    pub cooling_off: Duration,
}

impl Default for GateTiming {
    fn default() -> Self {
        Self {
            pending_window: Duration::from_secs(72 * 3600),
            cooling_off: Duration::from_secs(7 * 86_400),
        }
    }
}

impl GateTicket {
    pub fn open(
        ticket_id: TicketId,
        op: OperationDescriptor,
        risk: RiskTier,
        now: Timestamp,
        timing: GateTiming,
    ) -> Result<Self, GateError> {
        if !risk.requires_gate() {
            return Err(GateError::NotGated(risk));
        }
        Ok(Self {
            ticket_id,
            op,
            risk,
            state: TicketState::Pending,
            decisions: Vec::new(),
            created_at: now,
            deadline: now.plus(timing.pending_window),
            cooling_off_until: (risk == RiskTier::R4).then(|| now.plus(timing.cooling_off)),
            consumed: false,
        })
    }

    /// Distinct principals whose latest verdict is Approve.
    pub fn approvals(&self) -> usize {
        self.decisions
            .iter()
            .filter(|d| d.verdict == Verdict::Approve)
            .map(|d| &d.approver)
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn quorum_met(&self) -> bool {
        self.approvals() >= self.risk.quorum()
            && !self.decisions.iter().any(|d| d.verdict == Verdict::Reject)
    }

    pub fn cooled_off(&self, now: Timestamp) -> bool {
        self.cooling_off_until.is_none_or(|t| now >= t)
    }

    /// Approved, cooled off and not yet executed.
    pub fn is_executable(&self, now: Timestamp) -> bool {
        self.state == TicketState::Approved && !self.consumed && self.cooled_off(now)
    }

    /// Records one human decision. `ceiling` is the approver's registered
    /// tier ceiling, `None` when the principal is not an approver.
    pub fn decide(
        &self,
        verdict: Verdict,
        approver: &PrincipalId,
        ceiling: Option<RiskTier>,
        rationale: &str,
        now: Timestamp,
    ) -> Result<GateTicket, GateError> {
        if !self.state.is_open() {
            return Err(GateError::TicketClosed(self.ticket_id.clone()));
        }
        if rationale.trim().is_empty() {
            return Err(GateError::EmptyRationale);
        }
        if ceiling.is_none_or(|c| c < self.risk) {
            return Err(GateError::NotAuthorizedForTier {
                approver: approver.clone(),
                risk: self.risk,
            });
        }
        if self.decisions.iter().any(|d| &d.approver == approver) {
            return Err(GateError::DuplicateApprover(approver.clone()));
        }
        Ok(self.with_decision(verdict, approver, rationale, now))
    }

    /// The requesting citizen takes its own operation back. Recorded as a
    /// Reject so the ticket can never execute.
    pub fn withdraw(&self, by: &PrincipalId, now: Timestamp) -> Result<GateTicket, GateError> {
        if !self.state.is_open() {
            return Err(GateError::TicketClosed(self.ticket_id.clone()));
        }
        Ok(self.with_decision(Verdict::Reject, by, WITHDRAWN, now))
    }

    fn with_decision(
        &self,
        verdict: Verdict,
        approver: &PrincipalId,
        rationale: &str,
        now: Timestamp,
    ) -> GateTicket {
        let mut next = self.clone();
        next.decisions.push(Decision {
            approver: approver.clone(),
            verdict,
            rationale: rationale.to_string(),
            at: now,
        });
        next.state = match verdict {
            Verdict::Reject => TicketState::Rejected,
            Verdict::Approve if next.quorum_met() => TicketState::Approved,
            Verdict::Approve => self.state,
        };
        next
    }

    /// Pending and strictly past the deadline: the only clock-driven move.
    pub fn suspend_if_due(&self, now: Timestamp) -> Option<GateTicket> {
        (self.state == TicketState::Pending && now > self.deadline).then(|| {
            let mut next = self.clone();
            next.state = TicketState::Suspended;
            next
        })
    }
}

/// Principals allowed to decide tickets and the highest tier each may
/// decide.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproverRegistry {
    ceilings: BTreeMap<PrincipalId, RiskTier>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproverEntry {
    pub principal: PrincipalId,
    pub tier_ceiling: RiskTier,
}

impl ApproverRegistry {
    pub fn new(entries: impl IntoIterator<Item = ApproverEntry>) -> Self {
        Self {
            ceilings: entries.into_iter().map(|e| (e.principal, e.tier_ceiling)).collect(),
        }
    }

    pub fn ceiling(&self, p: &PrincipalId) -> Option<RiskTier> {
        self.ceilings.get(p).copied()
    }

    pub fn contains(&self, p: &PrincipalId) -> bool {
        self.ceilings.contains_key(p)
    }

    pub fn entries(&self) -> impl Iterator<Item = ApproverEntry> + '_ {
        self.ceilings.iter().map(|(p, t)| ApproverEntry {
            principal: p.clone(),
            tier_ceiling: *t,
        })
    }

    pub fn with_ceiling(&self, tier: RiskTier) -> impl Iterator<Item = &PrincipalId> {
        self.ceilings.iter().filter(move |(_, t)| **t >= tier).map(|(p, _)| p)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citizen: Option<CitizenId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskTier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<TicketState>,
}

impl TicketFilter {
    pub fn matches(&self, t: &GateTicket) -> bool {
        self.citizen.as_ref().is_none_or(|c| &t.op.citizen_id == c)
            && self.risk.is_none_or(|r| t.risk == r)
            && self.state.is_none_or(|s| t.state == s)
    }
}

/// Filtered tickets ordered by (created_at, ticket_id).
pub fn pending<'a>(
    tickets: impl IntoIterator<Item = &'a GateTicket>,
    filter: &TicketFilter,
) -> Vec<GateTicket> {
    let mut out: Vec<GateTicket> = tickets.into_iter().filter(|t| filter.matches(t)).cloned().collect();
    out.sort_by(|a, b| (a.created_at, &a.ticket_id).cmp(&(b.created_at, &b.ticket_id)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governance::OpKind;

    fn ticket(risk: RiskTier) -> GateTicket {
        let op = OperationDescriptor::new(OpKind::Distill, "c".into(), None, "narrative", "i".into(), &1);
        GateTicket::open("t".into(), op, risk, Timestamp::EPOCH, GateTiming::default()).unwrap()
    }

    fn p(s: &str) -> PrincipalId {
        PrincipalId::new(s)
    }

    #[test]
    fn r0_and_r1_are_not_gated() {
        let op = OperationDescriptor::new(OpKind::Append, "c".into(), None, "x", "i".into(), &1);
        for r in [RiskTier::R0, RiskTier::R1] {
            assert_eq!(
                GateTicket::open("t".into(), op.clone(), r, Timestamp::EPOCH, GateTiming::default()),
                Err(GateError::NotGated(r))
            );
        }
    }

    #[test]
    fn default_window_and_cooling_off() {
        let t = ticket(RiskTier::R2);
        assert_eq!(t.deadline.unix_millis(), 72 * 3600 * 1000);
        assert_eq!(t.cooling_off_until, None);
        let t = ticket(RiskTier::R4);
        assert_eq!(t.cooling_off_until.unwrap().unix_millis(), 7 * 86_400 * 1000);
    }

    #[test]
    fn r3_needs_two_distinct() {
        let t = ticket(RiskTier::R3);
        let now = Timestamp::EPOCH;
        let t = t.decide(Verdict::Approve, &p("a"), Some(RiskTier::R3), "ok", now).unwrap();
        assert_eq!(t.state, TicketState::Pending);
        assert_eq!(
            t.decide(Verdict::Approve, &p("a"), Some(RiskTier::R3), "ok", now),
            Err(GateError::DuplicateApprover(p("a")))
        );
        let t = t.decide(Verdict::Approve, &p("b"), Some(RiskTier::R4), "ok", now).unwrap();
        assert_eq!(t.state, TicketState::Approved);
    }

    #[test]
    fn single_reject_vetoes() {
        let t = ticket(RiskTier::R2)
            .decide(Verdict::Reject, &p("a"), Some(RiskTier::R2), "no", Timestamp::EPOCH)
            .unwrap();
        assert_eq!(t.state, TicketState::Rejected);
        assert!(matches!(
            t.decide(Verdict::Approve, &p("b"), Some(RiskTier::R2), "ok", Timestamp::EPOCH),
            Err(GateError::TicketClosed(_))
        ));
    }

    #[test]
    fn ceiling_and_rationale_are_checked() {
        let t = ticket(RiskTier::R4);
        assert!(matches!(
            t.decide(Verdict::Approve, &p("a"), Some(RiskTier::R3), "ok", Timestamp::EPOCH),
            Err(GateError::NotAuthorizedForTier { .. })
        ));
        assert!(matches!(
            t.decide(Verdict::Approve, &p("a"), None, "ok", Timestamp::EPOCH),
            Err(GateError::NotAuthorizedForTier { .. })
        ));
        assert_eq!(
            t.decide(Verdict::Approve, &p("a"), Some(RiskTier::R4), "  ", Timestamp::EPOCH),
            Err(GateError::EmptyRationale)
        );
    }

    #[test]
    fn suspension_boundary_and_idempotence() {
        let t = ticket(RiskTier::R2);
        assert!(t.suspend_if_due(t.deadline.minus(Duration::from_millis(1))).is_none());
        assert!(t.suspend_if_due(t.deadline).is_none());
        let s = t.suspend_if_due(t.deadline.plus(Duration::from_secs(1))).unwrap();
        assert_eq!(s.state, TicketState::Suspended);
        assert!(s.suspend_if_due(t.deadline.plus(Duration::from_secs(1))).is_none());
        let s = s
            .decide(Verdict::Approve, &p("a"), Some(RiskTier::R2), "late", t.deadline)
            .unwrap();
        assert_eq!(s.state, TicketState::Approved);
    }

    #[test]
    fn r4_executes_only_after_cooling_off() {
        let t = ticket(RiskTier::R4);
        let now = Timestamp::EPOCH;
        let t = t.decide(Verdict::Approve, &p("a"), Some(RiskTier::R4), "ok", now).unwrap();
        let t = t.decide(Verdict::Approve, &p("b"), Some(RiskTier::R4), "ok", now).unwrap();
        assert_eq!(t.state, TicketState::Approved);
        let until = t.cooling_off_until.unwrap();
        assert!(!t.is_executable(until.minus(Duration::from_millis(1))));
        assert!(t.is_executable(until));
    }

    #[test]
    fn withdraw_rejects_without_authority() {
        let t = ticket(RiskTier::R4).withdraw(&p("citizen"), Timestamp::EPOCH).unwrap();
        assert_eq!(t.state, TicketState::Rejected);
        assert_eq!(t.decisions[0].rationale, WITHDRAWN);
    }

    #[test]
    fn pending_orders_by_created_then_id() {
        let mut a = ticket(RiskTier::R2);
        a.ticket_id = "b".into();
        let mut b = ticket(RiskTier::R4);
        b.ticket_id = "a".into();
        let mut c = ticket(RiskTier::R3);
        c.ticket_id = "0".into();
        c.created_at = Timestamp::from_unix_millis(5);
        let all = pending([&c, &a, &b], &TicketFilter::default());
        let ids: Vec<&str> = all.iter().map(|t| t.ticket_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "0"]);
        let r4 = pending([&c, &a, &b], &TicketFilter { risk: Some(RiskTier::R4), ..Default::default() });
        assert_eq!(r4.len(), 1);
    }
}
