//! Ticket submission, decisions and execution of approved payloads.

use super::{DecisionRequest, Engine};
use crate::error::{Error, Result};
use crate::event::{EventBody, PendingOp, RecordDraft, RecordUpdate};
use crate::gate::{GateTicket, TicketState};
use crate::governance::{GovernanceLayer, GovernanceRule, OpKind, OperationDescriptor, RiskTier};
use crate::ids::{IdMinter, PrincipalId, RecordId, TicketId};
use crate::ledger::{MemoryRecord, OwnershipEntry, RecordStatus, StorageTier};
use crate::lifecycle::{CitizenRecord, DepartureState, EndReason, Instance, Lineage, Stage};
use crate::time::Timestamp;
use crate::SYSTEM_PRINCIPAL;

fn is_live(t: &GateTicket) -> bool {
    t.state.is_open() || (t.state == TicketState::Approved && !t.consumed)
}

fn refused(e: Error) -> EventBody {
    let conflict = match &e {
        Error::MergeConflict(r) => Some(r.clone()),
        _ => None,
    };
    EventBody::ExecutionRefused { code: e.code().to_string(), message: e.to_string(), conflict }
}

impl Engine {
    /// Opens a ticket for `op` and commits it.
    pub(super) fn submit(
        &mut self,
        at: Timestamp,
        minter: &mut IdMinter,
        op: OperationDescriptor,
        risk: RiskTier,
        payload: PendingOp,
    ) -> Result<GateTicket> {
        if let Some(dup) =
            self.state.tickets.values().find(|t| is_live(t) && t.op.payload_digest == op.payload_digest)
        {
            return Err(Error::DuplicateTicket(dup.ticket_id.clone()));
        }
        let ticket = GateTicket::open(minter.ticket(), op, risk, at, self.config.timing())?;
        let actor = ticket.op.requested_by.clone();
        let citizen = payload.ticket_citizen().cloned();
        self.commit(at, &actor, citizen.as_ref(), EventBody::TicketSubmitted { ticket: ticket.clone(), payload })?;
        Ok(ticket)
    }

    /// Runs the ungated path or opens a ticket, depending on risk.
    pub(super) fn run_or_submit(
        &mut self,
        op: OperationDescriptor,
        risk: RiskTier,
        payload: PendingOp,
    ) -> Result<std::result::Result<EventBody, GateTicket>> {
        let at = self.next_at();
        let seq = self.next_seq();
        let mut minter = IdMinter::new(at, seq);
        if risk.requires_gate() {
            return Ok(Err(self.submit(at, &mut minter, op, risk, payload)?));
        }
        let body = self.execute_op(&payload, &op.requested_by, at, seq, &mut minter)?;
        let citizen = payload.ticket_citizen().cloned();
        self.commit(at, &op.requested_by, citizen.as_ref(), body.clone())?;
        Ok(Ok(body))
    }

    pub fn decide(
        &mut self,
        ticket_id: &TicketId,
        req: &DecisionRequest,
        principal: &PrincipalId,
    ) -> Result<GateTicket> {
        self.role(principal)?;
        let ticket = self.ticket(ticket_id)?.clone();
        if ticket.op.op_kind == OpKind::RuleChange
            && ticket.op.attrs.rule_layer == Some(GovernanceLayer::Constitution)
            && !self.is_constitution_authority(principal)
        {
            return Err(Error::NotAuthorized(format!(
                "{principal} is not a constitution authority"
            )));
        }
        let at = self.next_at();
        let seq = self.next_seq();
        let mut next =
            ticket.decide(req.verdict, principal, self.approvers.ceiling(principal), &req.rationale, at)?;
        let payload = self.state.payloads.get(ticket_id).cloned();
        let mut execution = None;
        match (next.state, &payload) {
            (TicketState::Approved, Some(p)) if next.cooling_off_until.is_none() => {
                next.consumed = true;
                let mut minter = IdMinter::new(at, seq);
                let requester = next.op.requested_by.clone();
                execution = Some(Box::new(
                    self.execute_op(p, &requester, at, seq, &mut minter).unwrap_or_else(refused),
                ));
            }
            (TicketState::Rejected, Some(PendingOp::Departure { case_id })) => {
                if let Some(body) = self.cancel_departure_body(case_id, &next, at) {
                    execution = Some(Box::new(body));
                }
            }
            _ => {}
        }
        let citizen = payload.as_ref().and_then(|p| p.ticket_citizen().cloned());
        self.commit(at, principal, citizen.as_ref(), EventBody::TicketDecided { ticket: next.clone(), execution })?;
        Ok(next)
    }

    /// Executes an approved R4 ticket once cooling-off has elapsed.
    /// Destruction and departure have their own entry points, which this
    /// forwards to or refuses.
    pub fn execute_ticket(&mut self, ticket_id: &TicketId, principal: &PrincipalId) -> Result<GateTicket> {
        self.role(principal)?;
        let ticket = self.ticket(ticket_id)?.clone();
        let payload = self.state.payloads.get(ticket_id).cloned().ok_or_else(|| Error::UnknownTicket(ticket_id.clone()))?;
        match &payload {
            PendingOp::Destroy { record_id, .. } => {
                let req = super::DestroyRequest { ticket_id: Some(ticket_id.clone()), consent_id: None };
                self.destroy(record_id, &req, principal)?;
                return Ok(self.ticket(ticket_id)?.clone());
            }
            PendingOp::Departure { .. } => {
                return Err(Error::Invalid("departures execute through confirmation".into()));
            }
            _ => {}
        }
        let at = self.next_at();
        self.check_executable(&ticket, at)?;
        let seq = self.next_seq();
        let mut minter = IdMinter::new(at, seq);
        let execution = self.execute_op(&payload, &ticket.op.requested_by, at, seq, &mut minter)?;
        let mut next = ticket;
        next.consumed = true;
        let citizen = payload.ticket_citizen().cloned();
        self.commit(
            at,
            principal,
            citizen.as_ref(),
            EventBody::TicketExecuted { ticket: next.clone(), execution: Box::new(execution) },
        )?;
        self.result_of_last_rule()?;
        Ok(next)
    }

    /// A rule that executes void still reports the conflict.
    fn result_of_last_rule(&self) -> Result<()> {
        if let Some(ev) = self.events.last() {
            if let Some(rule) = void_rule_in(&ev.kind, &ev.body) {
                return Err(rule);
            }
        }
        Ok(())
    }

    pub(super) fn check_executable(&self, ticket: &GateTicket, now: Timestamp) -> Result<()> {
        if ticket.state != TicketState::Approved {
            return Err(Error::TicketNotApproved(ticket.ticket_id.clone()));
        }
        if ticket.consumed {
            return Err(Error::TicketClosed(ticket.ticket_id.clone()));
        }
        if !ticket.cooled_off(now) {
            return Err(Error::CoolingOffNotElapsed);
        }
        Ok(())
    }

    /// Moves every overdue Pending ticket to Suspended. Never approves or
    /// rejects anything.
    pub fn sweep_timeouts(&mut self) -> Result<Vec<GateTicket>> {
        let at = self.next_at();
        let due: Vec<GateTicket> = self.state.tickets.values().filter_map(|t| t.suspend_if_due(at)).collect();
        if !due.is_empty() {
            let system = PrincipalId::new(SYSTEM_PRINCIPAL);
            self.commit(at, &system, None, EventBody::TicketsSuspended { tickets: due.clone() })?;
        }
        Ok(due)
    }

    /// Validates a payload against current state and builds the event that
    /// carries it out. Nothing is committed here.
    pub(super) fn execute_op(
        &self,
        payload: &PendingOp,
        requested_by: &PrincipalId,
        at: Timestamp,
        seq: u64,
        minter: &mut IdMinter,
    ) -> Result<EventBody> {
        match payload {
            PendingOp::Append { draft } => {
                let (record, claim) = self.materialize(draft, at, seq, minter)?;
                Ok(EventBody::MemoryAppended { record, claim })
            }
            PendingOp::Correct { draft } => {
                let target = draft.supersedes.as_ref().ok_or_else(|| Error::Invalid("correction without target".into()))?;
                self.require_live_record(&draft.citizen_id, target)?;
                let (record, claim) = self.materialize(draft, at, seq, minter)?;
                Ok(EventBody::MemoryCorrected { record, claim })
            }
            PendingOp::Distill { draft } => {
                for s in &draft.derived_from {
                    self.check_distill_source(&draft.citizen_id, s)?;
                }
                let (record, claim) = self.materialize(draft, at, seq, minter)?;
                Ok(EventBody::MemoryDistilled { record, claim })
            }
            PendingOp::Forget { citizen_id, record_id } => {
                let r = self.require_live_record(citizen_id, record_id)?;
                Ok(EventBody::MemoryForgotten {
                    update: RecordUpdate {
                        citizen_id: citizen_id.clone(),
                        record_id: record_id.clone(),
                        status: RecordStatus::Forgotten,
                        recall_weight: 0.0,
                        restore_weight: Some(r.recall_weight),
                    },
                })
            }
            PendingOp::Revive { citizen_id, record_id } => {
                let r = self
                    .state
                    .record(citizen_id, record_id)
                    .ok_or_else(|| Error::TargetNotFound(record_id.clone()))?;
                if r.status != RecordStatus::Archived {
                    return Err(Error::RecordNotArchived(record_id.clone()));
                }
                Ok(EventBody::MemoryRevived {
                    update: RecordUpdate {
                        citizen_id: citizen_id.clone(),
                        record_id: record_id.clone(),
                        status: RecordStatus::Active,
                        recall_weight: 1.0,
                        restore_weight: None,
                    },
                })
            }
            PendingOp::Destroy { record_id, .. } => Ok(EventBody::RecordsDestroyed { updates: self.destroy_updates(record_id) }),
            PendingOp::RuleChange { draft, .. } => {
                let rule = GovernanceRule::from_draft(minter.rule(), draft.clone(), requested_by.clone(), at);
                self.state.rules.check_supersedes(&rule)?;
                let (rule, voided) = self.state.rules.resolve(rule);
                Ok(EventBody::RuleRegistered { rule, voided })
            }
            PendingOp::OwnershipTransfer { citizen_id, category, new_writer } => {
                self.active_citizen(citizen_id)?;
                let current = self
                    .state
                    .ledger(citizen_id)
                    .and_then(|l| l.owner(category))
                    .ok_or_else(|| Error::NoSuchCategory { citizen: citizen_id.clone(), category: category.clone() })?;
                if &current.primary_writer == new_writer {
                    return Err(Error::SelfTransferNoop { category: category.clone(), owner: new_writer.clone() });
                }
                Ok(EventBody::OwnershipTransferred {
                    entry: OwnershipEntry {
                        citizen_id: citizen_id.clone(),
                        category: category.clone(),
                        primary_writer: new_writer.clone(),
                        since: at,
                    },
                })
            }
            PendingOp::Fork { citizen_id, branch_name, instance_id, model_label } => {
                let mut parent = self.citizen(citizen_id)?.clone();
                if parent.stage != Stage::Active {
                    return Err(Error::ParentNotActive(citizen_id.clone()));
                }
                self.check_name_free(branch_name)?;
                let child_id = minter.citizen();
                let instance = match instance_id {
                    Some(i) => i.clone(),
                    None => PrincipalId::new(format!("inst-{}", minter.next_raw())),
                };
                self.check_new_principal(&instance)?;
                parent.lineage.fork_children.push(child_id.clone());
                let child = CitizenRecord {
                    citizen_id: child_id,
                    name: branch_name.trim().to_string(),
                    stage: Stage::Active,
                    current_instance: Some(instance.clone()),
                    instances: vec![Instance {
                        instance_id: instance,
                        model_label: model_label.clone(),
                        started_at: at,
                        ended_at: None,
                        end_reason: None,
                        provisional: false,
                    }],
                    lineage: Lineage { parent_citizen: Some(citizen_id.clone()), fork_seq: Some(seq), fork_children: Vec::new() },
                    born_at: at,
                    born_seq: seq,
                };
                Ok(EventBody::Forked { parent, child })
            }
            PendingOp::Merge { branch, target } => self.merge_body(branch, target, at, seq, minter),
            PendingOp::Departure { .. } => Err(Error::Invalid("departures execute through confirmation".into())),
        }
    }

    /// Turns a draft into a record, re-checking the writer.
    fn materialize(
        &self,
        draft: &RecordDraft,
        at: Timestamp,
        seq: u64,
        minter: &mut IdMinter,
    ) -> Result<(MemoryRecord, Option<OwnershipEntry>)> {
        self.active_citizen(&draft.citizen_id)?;
        let claim = self.check_writer(&draft.citizen_id, &draft.category, draft.tier, &draft.requested_by, at)?;
        let record = MemoryRecord {
            record_id: minter.record(),
            citizen_id: draft.citizen_id.clone(),
            tier: draft.tier,
            category: draft.category.clone(),
            content: draft.content.clone(),
            tags: draft.tags.clone(),
            trust: draft.trust.clone(),
            recall_weight: 1.0,
            supersedes: draft.supersedes.clone(),
            derived_from: draft.derived_from.clone(),
            status: RecordStatus::Active,
            created_by: draft.requested_by.clone(),
            created_at: at,
            created_seq: seq,
            content_hash: draft.content_hash.clone(),
            restore_weight: None,
        };
        Ok((record, claim))
    }

    /// Single-writer check. Returns the ownership claim to record when the
    /// category has no writer yet.
    pub(super) fn check_writer(
        &self,
        citizen: &crate::ids::CitizenId,
        category: &str,
        tier: StorageTier,
        principal: &PrincipalId,
        at: Timestamp,
    ) -> Result<Option<OwnershipEntry>> {
        if tier == StorageTier::T3 && principal.as_str() == SYSTEM_PRINCIPAL {
            return Ok(None);
        }
        let not_writer = || Error::NotPrimaryWriter { principal: principal.clone(), category: category.to_string() };
        match self.state.ledger(citizen).and_then(|l| l.owner(category)) {
            Some(e) if &e.primary_writer == principal => Ok(None),
            Some(_) => Err(not_writer()),
            None if self.citizen(citizen)?.is_current(principal) => Ok(Some(OwnershipEntry {
                citizen_id: citizen.clone(),
                category: category.to_string(),
                primary_writer: principal.clone(),
                since: at,
            })),
            None => Err(not_writer()),
        }
    }

    pub(super) fn require_live_record(
        &self,
        citizen: &crate::ids::CitizenId,
        id: &RecordId,
    ) -> Result<&MemoryRecord> {
        let r = self.state.record(citizen, id).ok_or_else(|| Error::TargetNotFound(id.clone()))?;
        match r.status {
            RecordStatus::Active => Ok(r),
            RecordStatus::Destroyed => Err(Error::TargetDestroyed(id.clone())),
            _ => Err(Error::RecordNotActive(id.clone())),
        }
    }

    pub(super) fn check_distill_source(&self, citizen: &crate::ids::CitizenId, id: &RecordId) -> Result<()> {
        let r = self
            .state
            .record(citizen, id)
            .ok_or_else(|| Error::MixedCitizens(format!("{id} is not in citizen {citizen}'s ledger")))?;
        if !r.is_active() || r.tier != StorageTier::T2 {
            return Err(Error::SourceNotActive(id.clone()));
        }
        Ok(())
    }

    /// Tombstones for every held copy of a record that is not yet destroyed.
    pub(super) fn destroy_updates(&self, record_id: &RecordId) -> Vec<RecordUpdate> {
        self.state
            .holders(record_id)
            .into_iter()
            .filter(|c| self.state.record(c, record_id).is_some_and(|r| r.status != RecordStatus::Destroyed))
            .map(|c| RecordUpdate {
                citizen_id: c,
                record_id: record_id.clone(),
                status: RecordStatus::Destroyed,
                recall_weight: 0.0,
                restore_weight: None,
            })
            .collect()
    }

    pub(super) fn cancel_departure_body(
        &self,
        case_id: &crate::ids::CaseId,
        ticket: &GateTicket,
        _at: Timestamp,
    ) -> Option<EventBody> {
        let case = self.state.departures.get(case_id)?;
        if case.state != DepartureState::Open {
            return None;
        }
        let mut citizen = self.state.citizens.get(&case.citizen_id)?.clone();
        citizen.stage = Stage::Active;
        let mut case = case.clone();
        case.state = DepartureState::Cancelled;
        Some(EventBody::DepartureCancelled { citizen, case, ticket: ticket.clone() })
    }

    pub(super) fn check_name_free(&self, name: &str) -> Result<()> {
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::Invalid("name must not be empty".into()));
        }
        if self.state.citizens.values().any(|c| c.name == name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub(super) fn close_for_merge(citizen: &mut CitizenRecord, at: Timestamp) {
        citizen.close_open_instance(at, EndReason::Merged);
        citizen.current_instance = None;
        citizen.stage = Stage::Departed;
    }
}

/// The void-rule error carried by a `RuleRegistered` event, if any.
fn void_rule_in(kind: &str, body: &serde_json::Value) -> Option<Error> {
    let ev = EventBody::from_parts(kind, body).ok()?;
    let inner = match ev {
        EventBody::TicketExecuted { execution, .. } => *execution,
        other => other,
    };
    match inner {
        EventBody::RuleRegistered { rule, .. } if !rule.is_active() => Some(Error::VoidOnRegistration {
            upper_rule_id: rule.voided_by.clone().unwrap_or_else(|| rule.rule_id.clone()),
            rule_id: rule.rule_id,
        }),
        _ => None,
    }
}
