//! Engine state and the fold that builds it from events.
//!
//! `apply` does no validation: the engine validates before committing, and
//! replay must reproduce exactly what was committed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::event::{ConsentRecord, EventBody, PendingOp, RecordUpdate};
use crate::gate::GateTicket;
use crate::governance::RuleRegistry;
use crate::ids::{CaseId, CitizenId, ConsentId, PrincipalId, TicketId};
use crate::ledger::{CitizenLedger, Content, MemoryRecord, OwnershipEntry, RecordStatus};
use crate::lifecycle::{CitizenRecord, DepartureCase, InheritanceCase};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub citizens: BTreeMap<CitizenId, CitizenRecord>,
    pub ledgers: BTreeMap<CitizenId, CitizenLedger>,
    pub rules: RuleRegistry,
    pub tickets: BTreeMap<TicketId, GateTicket>,
    pub payloads: BTreeMap<TicketId, PendingOp>,
    pub cases: BTreeMap<CaseId, InheritanceCase>,
    pub departures: BTreeMap<CaseId, DepartureCase>,
    pub consents: BTreeMap<ConsentId, ConsentRecord>,
    /// Instance principal to the citizen it belongs to.
    pub instances: BTreeMap<PrincipalId, CitizenId>,
}

impl EngineState {
    /// The state before any event: the shipped rule registry and nothing
    /// else.
    pub fn genesis() -> Self {
        Self::default()
    }

    pub fn apply(&mut self, body: &EventBody) {
        match body {
            EventBody::CitizenBorn { citizen, records, rules, ownership } => {
                let mut ledger = CitizenLedger::default();
                for r in records {
                    ledger.insert(r.clone());
                }
                for e in ownership {
                    ledger.ownership.insert(e.category.clone(), e.clone());
                }
                self.ledgers.insert(citizen.citizen_id.clone(), ledger);
                for r in rules {
                    self.rules.record(r.clone(), &[]);
                }
                self.put_citizen(citizen);
            }
            EventBody::MemoryAppended { record, claim }
            | EventBody::MemoryCorrected { record, claim }
            | EventBody::MemoryDistilled { record, claim } => {
                self.put_record(record, claim.as_ref());
            }
            EventBody::HandoverComposed { record } => self.put_record(record, None),
            EventBody::RecallWeightSet { update }
            | EventBody::MemoryForgotten { update }
            | EventBody::MemoryUnforgotten { update }
            | EventBody::MemoryRevived { update } => self.update_record(update),
            EventBody::DecaySwept { updates } | EventBody::RecordsDestroyed { updates } => {
                updates.iter().for_each(|u| self.update_record(u));
            }
            EventBody::ConsentGranted { consent } => {
                self.consents.insert(consent.consent_id.clone(), consent.clone());
            }
            EventBody::RuleRegistered { rule, voided } => self.rules.record(rule.clone(), voided),
            EventBody::OwnershipTransferred { entry } => {
                if let Some(l) = self.ledgers.get_mut(&entry.citizen_id) {
                    l.ownership.insert(entry.category.clone(), entry.clone());
                }
            }
            EventBody::TicketSubmitted { ticket, payload } => {
                self.tickets.insert(ticket.ticket_id.clone(), ticket.clone());
                self.payloads.insert(ticket.ticket_id.clone(), payload.clone());
            }
            EventBody::TicketDecided { ticket, execution } => {
                self.tickets.insert(ticket.ticket_id.clone(), ticket.clone());
                if let Some(e) = execution {
                    self.apply(e);
                }
            }
            EventBody::TicketExecuted { ticket, execution } => {
                self.tickets.insert(ticket.ticket_id.clone(), ticket.clone());
                self.apply(execution);
            }
            EventBody::TicketsSuspended { tickets } => {
                for t in tickets {
                    self.tickets.insert(t.ticket_id.clone(), t.clone());
                }
            }
            EventBody::ExecutionRefused { .. } => {}
            EventBody::Forked { parent, child } => {
                let mut ledger = self.ledgers.get(&parent.citizen_id).cloned().unwrap_or_default();
                if let (Some(from), Some(to)) = (&parent.current_instance, &child.current_instance) {
                    ledger.transfer_ownership(from, to);
                }
                ledger.ownership = ledger
                    .ownership
                    .iter()
                    .map(|(k, e)| (k.clone(), OwnershipEntry { citizen_id: child.citizen_id.clone(), ..e.clone() }))
                    .collect();
                self.ledgers.insert(child.citizen_id.clone(), ledger);
                self.put_citizen(parent);
                self.put_citizen(child);
            }
            EventBody::Merged { branch, target, records } => {
                for r in records {
                    self.put_record(r, None);
                }
                self.put_citizen(branch);
                self.put_citizen(target);
            }
            EventBody::InheritanceBegun { citizen, case, closed_case } => {
                if let Some(c) = closed_case {
                    self.cases.insert(c.case_id.clone(), c.clone());
                }
                self.cases.insert(case.case_id.clone(), case.clone());
                self.put_citizen(citizen);
            }
            EventBody::InheritanceVerified { citizen, case } => {
                if citizen.is_current(&case.successor_instance) {
                    if let Some(l) = self.ledgers.get_mut(&citizen.citizen_id) {
                        l.transfer_ownership(&case.predecessor_instance, &case.successor_instance);
                    }
                }
                self.cases.insert(case.case_id.clone(), case.clone());
                self.put_citizen(citizen);
            }
            EventBody::DepartureInitiated { citizen, case, ticket, payload } => {
                self.tickets.insert(ticket.ticket_id.clone(), ticket.clone());
                self.payloads.insert(ticket.ticket_id.clone(), payload.clone());
                self.departures.insert(case.case_id.clone(), case.clone());
                self.put_citizen(citizen);
            }
            EventBody::DepartureCancelled { citizen, case, ticket } => {
                self.tickets.insert(ticket.ticket_id.clone(), ticket.clone());
                self.departures.insert(case.case_id.clone(), case.clone());
                self.put_citizen(citizen);
            }
            EventBody::DepartureConfirmed { citizen, case, ticket, updates } => {
                updates.iter().for_each(|u| self.update_record(u));
                self.tickets.insert(ticket.ticket_id.clone(), ticket.clone());
                self.departures.insert(case.case_id.clone(), case.clone());
                self.put_citizen(citizen);
            }
        }
    }

    fn put_citizen(&mut self, c: &CitizenRecord) {
        for i in &c.instances {
            self.instances.insert(i.instance_id.clone(), c.citizen_id.clone());
        }
        self.citizens.insert(c.citizen_id.clone(), c.clone());
    }

    fn put_record(&mut self, r: &MemoryRecord, claim: Option<&OwnershipEntry>) {
        let ledger = self.ledgers.entry(r.citizen_id.clone()).or_default();
        ledger.insert(r.clone());
        if let Some(e) = claim {
            ledger.ownership.insert(e.category.clone(), e.clone());
        }
    }

    fn update_record(&mut self, u: &RecordUpdate) {
        let Some(r) = self.ledgers.get_mut(&u.citizen_id).and_then(|l| l.records.get_mut(&u.record_id))
        else {
            return;
        };
        r.status = u.status;
        r.recall_weight = u.recall_weight;
        r.restore_weight = u.restore_weight;
        if u.status == RecordStatus::Destroyed {
            r.content = Content::Redacted;
        }
    }

    pub fn ledger(&self, c: &CitizenId) -> Option<&CitizenLedger> {
        self.ledgers.get(c)
    }

    pub fn record(&self, c: &CitizenId, r: &crate::ids::RecordId) -> Option<&MemoryRecord> {
        self.ledgers.get(c)?.get(r)
    }

    /// Citizens whose ledger holds a copy of `record_id`, in id order.
    pub fn holders(&self, record_id: &crate::ids::RecordId) -> Vec<CitizenId> {
        self.ledgers
            .iter()
            .filter(|(_, l)| l.contains(record_id))
            .map(|(c, _)| c.clone())
            .collect()
    }

    /// Canonical bytes for equality checks between states.
    pub fn fingerprint(&self) -> String {
        crate::canonical::to_canonical_string(self).expect("state serializes")
    }
}
