//! Memory ledger operations.

use super::{AppendRequest, CorrectRequest, DestroyRequest, DistillRequest, Engine, Outcome, TransferRequest};
use crate::error::{Error, Result};
use crate::event::{ConsentRecord, EventBody, PendingOp, RecordDraft, RecordUpdate};
use crate::governance::{check_red_lines, OpAttributes, OpKind, OperationDescriptor, RedLineVerdict, RiskTier};
use crate::ids::{CitizenId, ConsentId, IdMinter, PrincipalId, RecordId, TicketId};
use crate::ledger::{Content, MemoryRecord, RecordStatus, StorageTier};
use crate::SYSTEM_PRINCIPAL;

impl Engine {
    pub fn append(
        &mut self,
        citizen: &CitizenId,
        req: &AppendRequest,
        principal: &PrincipalId,
    ) -> Result<Outcome<MemoryRecord>> {
        self.role(principal)?;
        self.citizen(citizen)?;
        check_category(&req.category)?;
        let (content, content_hash) = self.prepare_content(&req.content)?;
        let payload = PendingOp::Append {
            draft: RecordDraft {
                citizen_id: citizen.clone(),
                tier: req.tier,
                category: req.category.clone(),
                content: content.clone(),
                content_hash,
                tags: req.tags.clone(),
                trust: req.trust.clone(),
                supersedes: None,
                derived_from: Vec::new(),
                requested_by: principal.clone(),
            },
        };
        let op = OperationDescriptor::new(OpKind::Append, citizen.clone(), Some(req.tier), &req.category, principal.clone(), &payload)
            .with_attrs(OpAttributes::with_trust(&req.trust));
        let risk = self.screen(&op)?;
        self.active_citizen(citizen)?;
        self.check_writer(citizen, &req.category, req.tier, principal, self.next_at())?;
        self.store_blob(&content, &req.content)?;
        self.finish_record(op, risk, payload)
    }

    /// Appends a correction that supersedes `record_id`. The original stays.
    pub fn correct(
        &mut self,
        record_id: &RecordId,
        req: &CorrectRequest,
        principal: &PrincipalId,
    ) -> Result<Outcome<MemoryRecord>> {
        self.role(principal)?;
        let holder = self.locate(record_id, principal)?;
        let target = self.require_live_record(&holder, record_id)?.clone();
        let trust = req.trust.clone().unwrap_or_else(|| target.trust.clone());
        let (content, content_hash) = self.prepare_content(&req.content)?;
        let payload = PendingOp::Correct {
            draft: RecordDraft {
                citizen_id: holder.clone(),
                tier: target.tier,
                category: target.category.clone(),
                content: content.clone(),
                content_hash,
                tags: req.tags.clone().unwrap_or_else(|| target.tags.clone()),
                trust: trust.clone(),
                supersedes: Some(record_id.clone()),
                derived_from: Vec::new(),
                requested_by: principal.clone(),
            },
        };
        let op = OperationDescriptor::new(OpKind::Correct, holder.clone(), Some(target.tier), &target.category, principal.clone(), &payload)
            .with_attrs(OpAttributes::with_trust(&trust));
        let risk = self.screen(&op)?;
        self.active_citizen(&holder)?;
        self.check_writer(&holder, &target.category, target.tier, principal, self.next_at())?;
        self.store_blob(&content, &req.content)?;
        self.finish_record(op, risk, payload)
    }

    /// Proposes a T1 record distilled from T2 sources. Always gated.
    pub fn distill(
        &mut self,
        citizen: &CitizenId,
        req: &DistillRequest,
        principal: &PrincipalId,
    ) -> Result<Outcome<MemoryRecord>> {
        self.role(principal)?;
        self.citizen(citizen)?;
        check_category(&req.category)?;
        if req.source_ids.is_empty() {
            return Err(Error::MixedCitizens("at least one source is required".into()));
        }
        for s in &req.source_ids {
            self.check_distill_source(citizen, s)?;
        }
        let (content, content_hash) = self.prepare_content(&req.content)?;
        let payload = PendingOp::Distill {
            draft: RecordDraft {
                citizen_id: citizen.clone(),
                tier: StorageTier::T1,
                category: req.category.clone(),
                content: content.clone(),
                content_hash,
                tags: req.tags.clone(),
                trust: req.trust.clone(),
                supersedes: None,
                derived_from: req.source_ids.clone(),
                requested_by: principal.clone(),
            },
        };
        let op = OperationDescriptor::new(OpKind::Distill, citizen.clone(), Some(StorageTier::T1), &req.category, principal.clone(), &payload)
            .with_attrs(OpAttributes::with_trust(&req.trust));
        let risk = self.screen(&op)?;
        self.active_citizen(citizen)?;
        self.check_writer(citizen, &req.category, StorageTier::T1, principal, self.next_at())?;
        self.store_blob(&content, &req.content)?;
        self.finish_record(op, risk, payload)
    }

    fn finish_record(
        &mut self,
        op: OperationDescriptor,
        risk: RiskTier,
        payload: PendingOp,
    ) -> Result<Outcome<MemoryRecord>> {
        match self.run_or_submit(op, risk, payload)? {
            Ok(EventBody::MemoryAppended { record, .. })
            | Ok(EventBody::MemoryCorrected { record, .. })
            | Ok(EventBody::MemoryDistilled { record, .. }) => Ok(Outcome::Done(self.resolved(record))),
            Ok(other) => Err(Error::Invalid(format!("unexpected event {}", other.kind()))),
            Err(ticket) => Ok(Outcome::Gated(ticket)),
        }
    }

    fn resolved(&self, mut r: MemoryRecord) -> MemoryRecord {
        if let Some(text) = self.resolve(&r) {
            r.content = Content::Inline(text);
        }
        r
    }

    fn current_record(&self, holder: &CitizenId, id: &RecordId) -> Result<MemoryRecord> {
        let r = self.state.record(holder, id).cloned().ok_or_else(|| Error::TargetNotFound(id.clone()))?;
        Ok(self.resolved(r))
    }

    /// Resolves the holder and requires `principal` to be its current
    /// instance.
    fn own_record(&self, record_id: &RecordId, principal: &PrincipalId) -> Result<(CitizenId, MemoryRecord)> {
        self.role(principal)?;
        let holder = self.locate(record_id, principal)?;
        if !self.citizen(&holder)?.is_current(principal) {
            return Err(Error::NotSelf);
        }
        let r = self.state.record(&holder, record_id).cloned().ok_or_else(|| Error::TargetNotFound(record_id.clone()))?;
        Ok((holder, r))
    }

    pub fn set_recall_weight(
        &mut self,
        record_id: &RecordId,
        weight: f64,
        principal: &PrincipalId,
    ) -> Result<MemoryRecord> {
        self.role(principal)?;
        let holder = self.locate(record_id, principal)?;
        let r = self.require_live_record(&holder, record_id)?.clone();
        if !(weight.is_finite() && weight > 0.0 && weight <= 1.0) {
            return Err(Error::OutOfRange(format!("recall weight {weight} is outside (0, 1]")));
        }
        let owner = self.state.ledger(&holder).and_then(|l| l.owner(&r.category)).map(|e| &e.primary_writer);
        if !self.citizen(&holder)?.is_current(principal) && owner != Some(principal) {
            return Err(Error::NotAuthorized(format!("{principal} may not reweight {record_id}")));
        }
        let update = RecordUpdate {
            citizen_id: holder.clone(),
            record_id: record_id.clone(),
            status: RecordStatus::Active,
            recall_weight: weight,
            restore_weight: r.restore_weight,
        };
        let at = self.next_at();
        self.commit(at, principal, Some(&holder), EventBody::RecallWeightSet { update })?;
        self.current_record(&holder, record_id)
    }

    /// Sets a record aside. T2 and T3 go through at once; T1 and T0 open a
    /// ticket.
    pub fn forget(&mut self, record_id: &RecordId, principal: &PrincipalId) -> Result<Outcome<MemoryRecord>> {
        let (holder, r) = self.own_record(record_id, principal)?;
        self.require_live_record(&holder, record_id)?;
        let payload = PendingOp::Forget { citizen_id: holder.clone(), record_id: record_id.clone() };
        let op = OperationDescriptor::new(OpKind::Forget, holder.clone(), Some(r.tier), &r.category, principal.clone(), &payload);
        let risk = self.screen(&op)?;
        self.active_citizen(&holder)?;
        match self.run_or_submit(op, risk, payload)? {
            Ok(_) => Ok(Outcome::Done(self.current_record(&holder, record_id)?)),
            Err(t) => Ok(Outcome::Gated(t)),
        }
    }

    pub fn unforget(&mut self, record_id: &RecordId, principal: &PrincipalId) -> Result<MemoryRecord> {
        let (holder, r) = self.own_record(record_id, principal)?;
        if r.status != RecordStatus::Forgotten {
            return Err(Error::RecordNotForgotten(record_id.clone()));
        }
        self.active_citizen(&holder)?;
        let update = RecordUpdate {
            citizen_id: holder.clone(),
            record_id: record_id.clone(),
            status: RecordStatus::Active,
            recall_weight: r.restore_weight.unwrap_or(1.0),
            restore_weight: None,
        };
        let at = self.next_at();
        self.commit(at, principal, Some(&holder), EventBody::MemoryUnforgotten { update })?;
        self.current_record(&holder, record_id)
    }

    /// Asks for an archived record back. Revival is gated.
    pub fn revive(&mut self, record_id: &RecordId, principal: &PrincipalId) -> Result<Outcome<MemoryRecord>> {
        let (holder, r) = self.own_record(record_id, principal)?;
        if r.status != RecordStatus::Archived {
            return Err(Error::RecordNotArchived(record_id.clone()));
        }
        let payload = PendingOp::Revive { citizen_id: holder.clone(), record_id: record_id.clone() };
        let op = OperationDescriptor::new(OpKind::Revive, holder.clone(), Some(r.tier), &r.category, principal.clone(), &payload);
        let risk = self.screen(&op)?;
        self.active_citizen(&holder)?;
        match self.run_or_submit(op, risk, payload)? {
            Ok(_) => Ok(Outcome::Done(self.current_record(&holder, record_id)?)),
            Err(t) => Ok(Outcome::Gated(t)),
        }
    }

    /// Archives stale low-weight T2 records. Returns what moved.
    pub fn decay_sweep(&mut self) -> Result<Vec<RecordUpdate>> {
        let at = self.next_at();
        let horizon = self.config.retention_horizon.as_millis() as u64;
        let floor = self.config.decay_floor;
        let updates: Vec<RecordUpdate> = self
            .state
            .ledgers
            .iter()
            .flat_map(|(c, l)| l.records.values().map(move |r| (c, r)))
            .filter(|(_, r)| {
                r.tier == StorageTier::T2
                    && r.is_active()
                    && at.millis_since(r.created_at) > horizon
                    && r.recall_weight < floor
            })
            .map(|(c, r)| RecordUpdate {
                citizen_id: c.clone(),
                record_id: r.record_id.clone(),
                status: RecordStatus::Archived,
                recall_weight: 0.0,
                restore_weight: Some(r.recall_weight),
            })
            .collect();
        if !updates.is_empty() {
            let system = PrincipalId::new(SYSTEM_PRINCIPAL);
            self.commit(at, &system, None, EventBody::DecaySwept { updates: updates.clone() })?;
        }
        Ok(updates)
    }

    /// The citizen's own consent to destroy one of its records.
    pub fn grant_consent(&mut self, record_id: &RecordId, principal: &PrincipalId) -> Result<ConsentRecord> {
        let (holder, r) = self.own_record(record_id, principal)?;
        if r.status == RecordStatus::Destroyed {
            return Err(Error::TargetDestroyed(record_id.clone()));
        }
        let at = self.next_at();
        let mut minter = IdMinter::new(at, self.next_seq());
        let consent = ConsentRecord {
            consent_id: minter.consent(),
            citizen_id: holder.clone(),
            record_id: record_id.clone(),
            granted_by: principal.clone(),
            granted_at: at,
        };
        self.commit(at, principal, Some(&holder), EventBody::ConsentGranted { consent: consent.clone() })?;
        Ok(consent)
    }

    fn find_consent(
        &self,
        holder: &CitizenId,
        record_id: &RecordId,
        consent_id: Option<&ConsentId>,
    ) -> Result<Option<ConsentRecord>> {
        match consent_id {
            Some(id) => {
                let c = self
                    .state
                    .consents
                    .get(id)
                    .ok_or_else(|| Error::Invalid(format!("unknown consent {id}")))?;
                if &c.citizen_id != holder || &c.record_id != record_id {
                    return Err(Error::Invalid(format!("consent {id} does not cover {record_id}")));
                }
                Ok(Some(c.clone()))
            }
            None => Ok(self
                .state
                .consents
                .values()
                .find(|c| &c.citizen_id == holder && &c.record_id == record_id)
                .cloned()),
        }
    }

    /// Destruction screening shared by request and execution.
    fn destroy_descriptor(
        &self,
        holder: &CitizenId,
        r: &MemoryRecord,
        requested_by: &PrincipalId,
        consent: bool,
    ) -> Result<(OperationDescriptor, PendingOp)> {
        let payload = PendingOp::Destroy { citizen_id: holder.clone(), record_id: r.record_id.clone() };
        let op = OperationDescriptor::new(OpKind::Destroy, holder.clone(), Some(r.tier), &r.category, requested_by.clone(), &payload)
            .with_attrs(OpAttributes { citizen_consent: consent, ..OpAttributes::default() });
        if let RedLineVerdict::Deny(line) = check_red_lines(&op) {
            return Err(Error::RedLineDenied(line));
        }
        if r.tier == StorageTier::T1 && !consent {
            return Err(Error::ConsentRequired);
        }
        Ok((op, payload))
    }

    /// Without a ticket id, opens the R4 destruction ticket. With one,
    /// executes it.
    pub fn destroy(
        &mut self,
        record_id: &RecordId,
        req: &DestroyRequest,
        principal: &PrincipalId,
    ) -> Result<Outcome<MemoryRecord>> {
        match &req.ticket_id {
            None => self.request_destruction(record_id, req.consent_id.as_ref(), principal).map(Outcome::Gated),
            Some(t) => self.execute_destruction(record_id, t, req.consent_id.as_ref(), principal).map(Outcome::Done),
        }
    }

    pub fn request_destruction(
        &mut self,
        record_id: &RecordId,
        consent_id: Option<&ConsentId>,
        principal: &PrincipalId,
    ) -> Result<crate::gate::GateTicket> {
        self.role(principal)?;
        let holder = self.locate(record_id, principal)?;
        let r = self.state.record(&holder, record_id).cloned().ok_or_else(|| Error::TargetNotFound(record_id.clone()))?;
        if r.status == RecordStatus::Destroyed {
            return Err(Error::TargetDestroyed(record_id.clone()));
        }
        let consent = self.find_consent(&holder, record_id, consent_id)?;
        let (op, payload) = self.destroy_descriptor(&holder, &r, principal, consent.is_some())?;
        let risk = self.screen(&op)?;
        let at = self.next_at();
        let mut minter = IdMinter::new(at, self.next_seq());
        self.submit(at, &mut minter, op, risk, payload)
    }

    fn execute_destruction(
        &mut self,
        record_id: &RecordId,
        ticket_id: &TicketId,
        consent_id: Option<&ConsentId>,
        principal: &PrincipalId,
    ) -> Result<MemoryRecord> {
        self.role(principal)?;
        let ticket = self.ticket(ticket_id)?.clone();
        let holder = match self.state.payloads.get(ticket_id) {
            Some(PendingOp::Destroy { citizen_id, record_id: r }) if r == record_id => citizen_id.clone(),
            _ => return Err(Error::DigestMismatch),
        };
        let r = self.state.record(&holder, record_id).cloned().ok_or_else(|| Error::TargetNotFound(record_id.clone()))?;
        if r.status == RecordStatus::Destroyed {
            return Err(Error::TargetDestroyed(record_id.clone()));
        }
        let consent = self.find_consent(&holder, record_id, consent_id)?;
        let (op, _) = self.destroy_descriptor(&holder, &r, &ticket.op.requested_by, consent.is_some())?;
        if op.payload_digest != ticket.op.payload_digest {
            return Err(Error::DigestMismatch);
        }
        let at = self.next_at();
        self.check_executable(&ticket, at)?;
        let blobs: Vec<_> = self
            .state
            .holders(record_id)
            .iter()
            .filter_map(|c| match &self.state.record(c, record_id)?.content {
                Content::Blob(d) => Some(d.clone()),
                _ => None,
            })
            .collect();
        let mut next = ticket;
        next.consumed = true;
        let execution = EventBody::RecordsDestroyed { updates: self.destroy_updates(record_id) };
        self.commit(at, principal, Some(&holder), EventBody::TicketExecuted { ticket: next, execution: Box::new(execution) })?;
        self.collect_blobs(&blobs);
        self.current_record(&holder, record_id)
    }

    /// Proposes a new primary writer for one category. Gated.
    pub fn transfer_ownership(
        &mut self,
        citizen: &CitizenId,
        req: &TransferRequest,
        principal: &PrincipalId,
    ) -> Result<Outcome<crate::ledger::OwnershipEntry>> {
        self.role(principal)?;
        self.citizen(citizen)?;
        let current = self
            .state
            .ledger(citizen)
            .and_then(|l| l.owner(&req.category))
            .cloned()
            .ok_or_else(|| Error::NoSuchCategory { citizen: citizen.clone(), category: req.category.clone() })?;
        if current.primary_writer == req.new_writer {
            return Err(Error::SelfTransferNoop { category: req.category.clone(), owner: req.new_writer.clone() });
        }
        if &current.primary_writer != principal && !self.is_authority(principal)? {
            return Err(Error::NotAuthorized(format!("{principal} does not hold {:?}", req.category)));
        }
        if self.role(&req.new_writer).is_err() {
            return Err(Error::Invalid(format!("unknown principal {}", req.new_writer)));
        }
        let payload = PendingOp::OwnershipTransfer {
            citizen_id: citizen.clone(),
            category: req.category.clone(),
            new_writer: req.new_writer.clone(),
        };
        let op = OperationDescriptor::new(OpKind::OwnershipTransfer, citizen.clone(), None, &req.category, principal.clone(), &payload);
        let risk = self.screen(&op)?;
        self.active_citizen(citizen)?;
        match self.run_or_submit(op, risk, payload)? {
            Ok(EventBody::OwnershipTransferred { entry }) => Ok(Outcome::Done(entry)),
            Ok(other) => Err(Error::Invalid(format!("unexpected event {}", other.kind()))),
            Err(t) => Ok(Outcome::Gated(t)),
        }
    }
}

fn check_category(c: &str) -> Result<()> {
    if c.trim().is_empty() || c != c.trim() {
        return Err(Error::Invalid("category must be a non-empty trimmed string".into()));
    }
    Ok(())
}
