//! The governed memory engine.
//!
//! Every mutating call validates against current state, builds exactly one
//! [`EventBody`], persists it to the hash chain and only then applies it.
//! A failed call leaves no trace.

mod gate;
mod lifecycle;
mod memory;
mod requests;
mod rules;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use requests::*;

use crate::alert::{alerts_for, Alert};
use crate::audit::{self, Anchor, AuditEvent, ChainHead, ChainVerdict};
use crate::canonical::Digest;
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::event::EventBody;
use crate::gate::{ApproverRegistry, GateTicket, TicketFilter};
use crate::governance::{
    check_red_lines, classify_risk, evaluate_rules, GovernanceRule, OperationDescriptor,
    RedLineVerdict, RiskTier, RuleEffect,
};
use crate::ids::{CaseId, CitizenId, PrincipalId, RecordId, TicketId};
use crate::ledger::{recall, Content, MemoryRecord, RecallHit, RecallQuery};
use crate::lifecycle::{CitizenRecord, DepartureCase, InheritanceCase, Stage};
use crate::state::EngineState;
use crate::storage::Storage;
use crate::time::{Clock, Timestamp};
use crate::SYSTEM_PRINCIPAL;

pub type AlertSink = Box<dyn Fn(&Alert) + Send + Sync>;

/// What a principal is to the engine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Role {
    System,
    Approver(RiskTier),
    /// An instance principal; `current` is false for ended or provisional
    /// instances.
    Instance { citizen: CitizenId, current: bool },
    /// Configured but holds no decision rights.
    Known,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    this_hash: String,
    state: EngineState,
}

pub struct Engine {
    config: EngineConfig,
    approvers: ApproverRegistry,
    clock: Arc<dyn Clock>,
    storage: Box<dyn Storage>,
    state: EngineState,
    events: Vec<AuditEvent>,
    alert_sink: Option<AlertSink>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("events", &self.events.len())
            .field("citizens", &self.state.citizens.len())
            .finish()
    }
}

impl Engine {
    /// Opens an engine over existing storage. The whole chain is verified
    /// first; a snapshot is used only if it matches the chain.
    pub fn open(
        config: EngineConfig,
        clock: Arc<dyn Clock>,
        storage: Box<dyn Storage>,
    ) -> Result<Self> {
        config.validate().map_err(Error::Invalid)?;
        let bytes = storage.read_log().map_err(|e| Error::Persistence(e.to_string()))?;
        if let ChainVerdict::FirstBad { seq } = audit::verify_bytes(&bytes, &Anchor::genesis()) {
            return Err(Error::ChainCorrupt { seq });
        }
        let events: Vec<AuditEvent> = bytes
            .split(|&b| b == b'\n')
            .filter(|l| !l.is_empty())
            .map(|l| serde_json::from_slice(l).expect("verified line parses"))
            .collect();

        let snapshot = storage
            .read_snapshot()
            .ok()
            .flatten()
            .and_then(|b| serde_json::from_slice::<Snapshot>(&b).ok())
            .filter(|s| events.get(s.seq as usize).is_some_and(|e| e.this_hash == s.this_hash));
        let (mut state, start) = match snapshot {
            Some(s) => (s.state, s.seq as usize + 1),
            None => (EngineState::genesis(), 0),
        };
        for ev in &events[start..] {
            let body = EventBody::from_parts(&ev.kind, &ev.body)
                .map_err(|e| Error::Persistence(format!("event {}: {e}", ev.seq)))?;
            state.apply(&body);
        }
        let approvers = ApproverRegistry::new(config.approver_registry.clone());
        Ok(Self { config, approvers, clock, storage, state, events, alert_sink: None })
    }

    pub fn set_alert_sink(&mut self, sink: AlertSink) {
        self.alert_sink = Some(sink);
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn approvers(&self) -> &ApproverRegistry {
        &self.approvers
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn events(&self) -> &[AuditEvent] {
        &self.events
    }

    pub fn head(&self) -> Option<ChainHead> {
        self.events.last().map(AuditEvent::head)
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn storage(&self) -> &dyn Storage {
        self.storage.as_ref()
    }

    // ---- commit path ----

    /// Event time for the next commit. Never earlier than the previous
    /// event, so replay by timestamp always folds a prefix.
    fn next_at(&self) -> Timestamp {
        let now = self.clock.now();
        self.events.last().map_or(now, |e| e.at.max(now))
    }

    fn next_seq(&self) -> u64 {
        self.events.len() as u64
    }

    fn commit(
        &mut self,
        at: Timestamp,
        actor: &PrincipalId,
        citizen: Option<&CitizenId>,
        body: EventBody,
    ) -> Result<&AuditEvent> {
        let (kind, value) = body.to_parts();
        let head = self.head();
        let ev = AuditEvent::seal(head.as_ref(), at, &kind, actor.clone(), citizen.cloned(), value);
        self.storage
            .append(&ev.encode_line(), citizen)
            .map_err(|e| Error::Persistence(e.to_string()))?;
        self.state.apply(&body);
        let seq = ev.seq;
        if let Some(sink) = &self.alert_sink {
            for a in alerts_for(&ev, &body) {
                sink(&a);
            }
        }
        self.events.push(ev);
        if (seq + 1) % self.config.snapshot_interval == 0 {
            self.write_snapshot();
        }
        Ok(self.events.last().expect("just pushed"))
    }

    fn write_snapshot(&mut self) {
        let Some(last) = self.events.last() else { return };
        let snap = Snapshot { seq: last.seq, this_hash: last.this_hash.clone(), state: self.state.clone() };
        if let Ok(bytes) = serde_json::to_vec(&snap) {
            // A snapshot is a cache; losing one only costs replay time.
            let _ = self.storage.write_snapshot(&bytes);
        }
    }

    // ---- principals ----

    pub fn role(&self, p: &PrincipalId) -> Result<Role> {
        if p.as_str() == SYSTEM_PRINCIPAL {
            return Ok(Role::System);
        }
        if let Some(t) = self.approvers.ceiling(p) {
            return Ok(Role::Approver(t));
        }
        if let Some(c) = self.state.instances.get(p) {
            let current = self.state.citizens.get(c).is_some_and(|r| r.is_current(p));
            return Ok(Role::Instance { citizen: c.clone(), current });
        }
        if self.config.principals.contains(p) {
            return Ok(Role::Known);
        }
        Err(Error::UnknownPrincipal(p.clone()))
    }

    fn is_authority(&self, p: &PrincipalId) -> Result<bool> {
        Ok(matches!(self.role(p)?, Role::System | Role::Approver(_)))
    }

    pub fn is_constitution_authority(&self, p: &PrincipalId) -> bool {
        match &self.config.constitution_authorities {
            Some(list) => list.contains(p),
            None => self.approvers.ceiling(p) == Some(RiskTier::R4),
        }
    }

    /// Fails unless `id` is free for a new instance principal.
    fn check_new_principal(&self, id: &PrincipalId) -> Result<()> {
        if id.as_str().trim().is_empty() {
            return Err(Error::Invalid("instance id must not be empty".into()));
        }
        if self.role(id).is_ok() {
            return Err(Error::DuplicatePrincipal(id.clone()));
        }
        Ok(())
    }

    // ---- lookups ----

    pub fn citizen(&self, id: &CitizenId) -> Result<&CitizenRecord> {
        self.state.citizens.get(id).ok_or_else(|| Error::UnknownCitizen(id.clone()))
    }

    fn active_citizen(&self, id: &CitizenId) -> Result<&CitizenRecord> {
        let c = self.citizen(id)?;
        if c.stage != Stage::Active {
            return Err(Error::CitizenNotActive(id.clone()));
        }
        Ok(c)
    }

    pub fn citizens(&self) -> Vec<CitizenRecord> {
        self.state.citizens.values().cloned().collect()
    }

    /// Picks which held copy of a record an operation refers to: the one in
    /// the principal's own citizen, else the originating citizen, else the
    /// first holder.
    pub fn locate(&self, record_id: &RecordId, principal: &PrincipalId) -> Result<CitizenId> {
        let holders = self.state.holders(record_id);
        if holders.is_empty() {
            return Err(Error::TargetNotFound(record_id.clone()));
        }
        if let Some(own) = self.state.instances.get(principal) {
            if holders.contains(own) {
                return Ok(own.clone());
            }
        }
        let origin = self
            .state
            .ledgers
            .get(&holders[0])
            .and_then(|l| l.get(record_id))
            .map(|r| r.citizen_id.clone());
        match origin {
            Some(o) if holders.contains(&o) => Ok(o),
            _ => Ok(holders[0].clone()),
        }
    }

    /// A record as seen from its principal-preferred holder, with content
    /// resolved.
    pub fn record(&self, record_id: &RecordId, principal: &PrincipalId) -> Result<MemoryRecord> {
        let holder = self.locate(record_id, principal)?;
        let mut r = self.state.record(&holder, record_id).cloned().ok_or_else(|| Error::TargetNotFound(record_id.clone()))?;
        if let Some(text) = self.resolve(&r) {
            r.content = Content::Inline(text);
        }
        Ok(r)
    }

    pub fn resolve(&self, r: &MemoryRecord) -> Option<String> {
        match &r.content {
            Content::Inline(s) => Some(s.clone()),
            Content::Blob(d) => self
                .storage
                .get_blob(d)
                .ok()
                .flatten()
                .and_then(|b| String::from_utf8(b).ok()),
            Content::Redacted => None,
        }
    }

    /// Validates size and decides inline or blob storage. The blob bytes, if
    /// any, are written by [`Engine::store_blob`] once the call commits.
    fn prepare_content(&self, text: &str) -> Result<(Content, Digest)> {
        if text.len() > self.config.max_content {
            return Err(Error::ContentTooLarge { size: text.len(), max: self.config.max_content });
        }
        let digest = Digest::of_str(text);
        let content = if text.len() > self.config.inline_threshold {
            Content::Blob(digest.clone())
        } else {
            Content::Inline(text.to_string())
        };
        Ok((content, digest))
    }

    fn store_blob(&mut self, content: &Content, text: &str) -> Result<()> {
        if let Content::Blob(d) = content {
            self.storage.put_blob(d, text.as_bytes()).map_err(|e| Error::Persistence(e.to_string()))?;
        }
        Ok(())
    }

    /// Deletes blobs no surviving record or open ticket still references.
    fn collect_blobs(&mut self, candidates: &[Digest]) {
        for d in candidates {
            let in_use = self.state.ledgers.values().any(|l| {
                l.records.values().any(|r| matches!(&r.content, Content::Blob(x) if x == d))
            });
            if !in_use {
                let _ = self.storage.delete_blob(d);
            }
        }
    }

    // ---- governance screen ----

    /// Red lines first, then explicit Deny rules, then risk.
    fn screen(&self, op: &OperationDescriptor) -> Result<RiskTier> {
        if let RedLineVerdict::Deny(r) = check_red_lines(op) {
            return Err(Error::RedLineDenied(r));
        }
        if let Some(rule) = evaluate_rules(op, self.state.rules.active()) {
            if rule.effect == RuleEffect::Deny {
                return Err(Error::NotAuthorized(format!("denied by rule {}", rule.rule_id)));
            }
        }
        Ok(classify_risk(op, self.state.rules.active()))
    }

    // ---- reads ----

    pub fn recall(&self, citizen: &CitizenId, query: &RecallQuery) -> Result<Vec<RecallHit>> {
        self.citizen(citizen)?;
        let ledger = self.state.ledger(citizen).cloned().unwrap_or_default();
        let reference = query.as_of.unwrap_or_else(|| self.clock.now());
        Ok(recall(&ledger, query, reference, self.config.recall_half_life, |r| self.resolve(r)))
    }

    pub fn rules(&self) -> Vec<GovernanceRule> {
        self.state.rules.all().cloned().collect()
    }

    pub fn tickets(&self, filter: &TicketFilter) -> Vec<GateTicket> {
        crate::gate::pending(self.state.tickets.values(), filter)
    }

    pub fn ticket(&self, id: &TicketId) -> Result<&GateTicket> {
        self.state.tickets.get(id).ok_or_else(|| Error::UnknownTicket(id.clone()))
    }

    pub fn inheritance_case(&self, id: &CaseId) -> Result<&InheritanceCase> {
        self.state.cases.get(id).ok_or_else(|| Error::UnknownCase(id.clone()))
    }

    pub fn departure_case(&self, id: &CaseId) -> Result<&DepartureCase> {
        self.state.departures.get(id).ok_or_else(|| Error::UnknownCase(id.clone()))
    }

    // ---- audit ----

    pub fn read_log(&self) -> Result<Vec<u8>> {
        self.storage.read_log().map_err(|e| Error::Persistence(e.to_string()))
    }

    /// Verifies persisted events `from..=to` (`to = None`: through the end).
    pub fn verify_chain(&self, from: u64, to: Option<u64>) -> Result<ChainVerdict> {
        let bytes = self.read_log()?;
        let spans = audit::line_spans(&bytes);
        let len = spans.len() as u64;
        let to_incl = to.unwrap_or(len.saturating_sub(1));
        if len == 0 && from == 0 && to.is_none() {
            return Ok(ChainVerdict::Ok { events: 0 });
        }
        if from >= len || to_incl >= len || to_incl < from {
            return Err(Error::RangeOutOfBounds(format!("{from}..={to_incl} of {len} events")));
        }
        let prev_hash = if from == 0 {
            Anchor::genesis().prev_hash
        } else {
            match serde_json::from_slice::<AuditEvent>(&bytes[spans[from as usize - 1].clone()]) {
                Ok(e) => e.this_hash,
                Err(_) => return Ok(ChainVerdict::FirstBad { seq: from - 1 }),
            }
        };
        let seg = &bytes[spans[from as usize].start..spans[to_incl as usize].end];
        Ok(audit::verify_bytes(seg, &Anchor { from_seq: from, prev_hash }))
    }

    pub fn export_chain(&self, from: u64, to: Option<u64>, anchored: bool) -> Result<Vec<u8>> {
        let bytes = self.read_log()?;
        audit::export_range(&bytes, from, to, anchored).map_err(|e| Error::RangeOutOfBounds(e.to_string()))
    }

    /// Folds every event with `at <= t` into a fresh state.
    pub fn replay_at(&self, t: Timestamp) -> Result<EngineState> {
        replay(self.events.iter().take_while(|e| e.at <= t))
    }
}

/// Folds events from genesis.
pub fn replay<'a>(events: impl IntoIterator<Item = &'a AuditEvent>) -> Result<EngineState> {
    let mut state = EngineState::genesis();
    for ev in events {
        let body = EventBody::from_parts(&ev.kind, &ev.body)
            .map_err(|e| Error::Persistence(format!("event {}: {e}", ev.seq)))?;
        state.apply(&body);
    }
    Ok(state)
}
