//! Birth, handover, inheritance, fork, merge and departure.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    BirthRequest, ConfirmRequest, DepartureRequest, Engine, ForkRequest, InheritanceRequest, MergeRequest,
    Outcome, Role, VerifyRequest,
};
use crate::audit::{self, Anchor, ChainVerdict};
use crate::canonical::{digest_of, to_canonical_string, Digest};
use crate::error::{Error, Result};
use crate::event::{EventBody, PendingOp, RecordUpdate};
use crate::export::{build_archive, ExportContents};
use crate::gate::GateTicket;
use crate::governance::{validate_hierarchy, write_pack, GovernanceRule, OpKind, OperationDescriptor};
use crate::ids::{CaseId, CitizenId, IdMinter, PrincipalId, RecordId};
use crate::ledger::{Content, MemoryRecord, OwnershipEntry, RecordStatus, StorageTier, TrustLevel};
use crate::lifecycle::{
    count_correct, generate_queries, required_answers, CaseVerdict, CitizenRecord, ConflictReport,
    DepartureCase, DepartureState, Disposition, EndReason, ExportInfo, FactualCheck, HandoverNote,
    InheritanceCase, InheritanceChecks, Instance, Lineage, PatternCheck, Stage,
};
use crate::time::Timestamp;

pub const HANDOVER_CATEGORY: &str = "handover";
const BIRTH_CATEGORIES: [&str; 3] = ["identity", "charter", "knowledge"];

fn tags(t: &str) -> BTreeSet<String> {
    BTreeSet::from([t.to_string()])
}

impl Engine {
    fn mint_instance(&self, given: Option<&PrincipalId>, minter: &mut IdMinter) -> Result<PrincipalId> {
        let id = match given {
            Some(i) => i.clone(),
            None => PrincipalId::new(format!("inst-{}", minter.next_raw())),
        };
        self.check_new_principal(&id)?;
        Ok(id)
    }

    /// Creates a citizen with its T0 identity and charter, optional T1
    /// shared knowledge and an optional pack of rules.
    pub fn birth(&mut self, req: &BirthRequest, principal: &PrincipalId) -> Result<CitizenRecord> {
        if !self.is_authority(principal)? {
            return Err(Error::NotAuthorized(format!("{principal} may not create citizens")));
        }
        self.check_name_free(&req.identity.name)?;

        let mut pack = Vec::new();
        let mut seen = BTreeSet::new();
        for spec in &req.constitution_pack {
            if spec.supersedes.is_some() {
                return Err(Error::Invalid(format!("pack rule {} cannot supersede", spec.rule_id)));
            }
            if !seen.insert(spec.rule_id.clone()) || self.state.rules.get(&spec.rule_id).is_some() {
                return Err(Error::Invalid(format!("rule id {} is already in use", spec.rule_id)));
            }
            pack.push(GovernanceRule::from_spec(spec.clone()));
        }
        let violations = validate_hierarchy(self.state.rules.active().chain(pack.iter()));
        if !violations.is_empty() {
            return Err(Error::InvalidConstitutionPack(violations));
        }

        let at = self.next_at();
        let seq = self.next_seq();
        let mut minter = IdMinter::new(at, seq);
        let citizen_id = minter.citizen();
        let instance = self.mint_instance(req.instance_id.as_ref(), &mut minter)?;

        let system = PrincipalId::new(crate::SYSTEM_PRINCIPAL);
        let name = req.identity.name.trim().to_string();
        let mut texts = vec![
            (StorageTier::T0, "identity", name.clone()),
            (StorageTier::T0, "charter", req.identity.charter_text.clone()),
        ];
        texts.extend(req.shared_knowledge.iter().map(|k| (StorageTier::T1, "knowledge", k.clone())));
        let mut records = Vec::new();
        let mut blobs = Vec::new();
        for (tier, category, text) in texts {
            let (content, content_hash) = self.prepare_content(&text)?;
            blobs.push((content.clone(), text));
            records.push(MemoryRecord {
                record_id: minter.record(),
                citizen_id: citizen_id.clone(),
                tier,
                category: category.to_string(),
                content,
                tags: tags(category),
                trust: TrustLevel::firsthand(),
                recall_weight: 1.0,
                supersedes: None,
                derived_from: Vec::new(),
                status: RecordStatus::Active,
                created_by: system.clone(),
                created_at: at,
                created_seq: seq,
                content_hash,
                restore_weight: None,
            });
        }
        let ownership = BIRTH_CATEGORIES
            .iter()
            .map(|c| OwnershipEntry {
                citizen_id: citizen_id.clone(),
                category: c.to_string(),
                primary_writer: instance.clone(),
                since: at,
            })
            .collect();
        let citizen = CitizenRecord {
            citizen_id: citizen_id.clone(),
            name,
            stage: Stage::Active,
            current_instance: Some(instance.clone()),
            instances: vec![Instance {
                instance_id: instance,
                model_label: req.model_label.clone(),
                started_at: at,
                ended_at: None,
                end_reason: None,
                provisional: false,
            }],
            lineage: Lineage::default(),
            born_at: at,
            born_seq: seq,
        };
        for (content, text) in &blobs {
            self.store_blob(content, text)?;
        }
        let body = EventBody::CitizenBorn { citizen: citizen.clone(), records, rules: pack, ownership };
        self.commit(at, principal, Some(&citizen_id), body)?;
        Ok(citizen)
    }

    /// Writes the current instance's handover note as a T3 record.
    pub fn compose_handover(
        &mut self,
        citizen: &CitizenId,
        note: &HandoverNote,
        principal: &PrincipalId,
    ) -> Result<MemoryRecord> {
        self.role(principal)?;
        let c = self.active_citizen(citizen)?;
        if !c.is_current(principal) {
            return Err(Error::NotCurrentInstance(principal.clone()));
        }
        if note.is_empty() {
            return Err(Error::EmptyNote);
        }
        let ledger = self.state.ledger(citizen);
        let problems = note.problems(|r| ledger.is_some_and(|l| l.contains(r)));
        if !problems.is_empty() {
            return Err(Error::InvalidNote(problems));
        }
        let text = to_canonical_string(note).map_err(|e| Error::Invalid(e.to_string()))?;
        let (content, content_hash) = self.prepare_content(&text)?;
        let op = OperationDescriptor::new(
            OpKind::Append,
            citizen.clone(),
            Some(StorageTier::T3),
            HANDOVER_CATEGORY,
            principal.clone(),
            &content_hash,
        );
        self.screen(&op)?;
        let at = self.next_at();
        let seq = self.next_seq();
        let record = MemoryRecord {
            record_id: IdMinter::new(at, seq).record(),
            citizen_id: citizen.clone(),
            tier: StorageTier::T3,
            category: HANDOVER_CATEGORY.to_string(),
            content: content.clone(),
            tags: tags(HANDOVER_CATEGORY),
            trust: TrustLevel::firsthand(),
            recall_weight: 1.0,
            supersedes: None,
            derived_from: Vec::new(),
            status: RecordStatus::Active,
            created_by: PrincipalId::new(crate::SYSTEM_PRINCIPAL),
            created_at: at,
            created_seq: seq,
            content_hash,
            restore_weight: None,
        };
        self.store_blob(&content, &text)?;
        self.commit(at, principal, Some(citizen), EventBody::HandoverComposed { record: record.clone() })?;
        Ok(record)
    }

    /// The newest active handover written during `instance`'s tenure.
    fn latest_handover(&self, citizen: &CitizenRecord, instance: &PrincipalId) -> Result<(RecordId, HandoverNote)> {
        let started = citizen
            .instances
            .iter()
            .find(|i| &i.instance_id == instance)
            .map(|i| i.started_at)
            .ok_or(Error::NoHandoverNote)?;
        let ledger = self.state.ledger(&citizen.citizen_id).ok_or(Error::NoHandoverNote)?;
        let record = ledger
            .in_order()
            .into_iter()
            .rev()
            .find(|r| {
                r.tier == StorageTier::T3
                    && r.category == HANDOVER_CATEGORY
                    && r.is_active()
                    && r.created_at >= started
            })
            .ok_or(Error::NoHandoverNote)?;
        let text = self.resolve(record).ok_or(Error::NoHandoverNote)?;
        let note = serde_json::from_str(&text).map_err(|_| Error::NoHandoverNote)?;
        Ok((record.record_id.clone(), note))
    }

    /// Closes the current instance and opens a provisional successor. A
    /// citizen whose last verification failed may begin again with a new
    /// successor.
    pub fn begin_inheritance(
        &mut self,
        citizen_id: &CitizenId,
        req: &InheritanceRequest,
        principal: &PrincipalId,
    ) -> Result<InheritanceCase> {
        let role = self.role(principal)?;
        let c = self.citizen(citizen_id)?.clone();
        let authorized = c.is_current(principal) || matches!(role, Role::System | Role::Approver(_));
        if !authorized {
            return Err(Error::NotAuthorized(format!("{principal} may not start inheritance")));
        }
        let open_case = self
            .state
            .cases
            .values()
            .find(|k| &k.citizen_id == citizen_id && !k.closed && k.verdict != CaseVerdict::Passed)
            .cloned();
        let at = self.next_at();
        let mut minter = IdMinter::new(at, self.next_seq());
        let mut next = c.clone();
        let (predecessor, closed_case) = match c.stage {
            Stage::Active => {
                let p = c.current_instance.clone().ok_or_else(|| Error::CitizenNotActive(citizen_id.clone()))?;
                next.close_open_instance(at, EndReason::Inheritance);
                (p, None)
            }
            Stage::Inheriting => match open_case {
                Some(k) if k.verdict == CaseVerdict::Failed => {
                    next.close_open_instance(at, EndReason::FailedInheritance);
                    let mut k = k;
                    k.closed = true;
                    (k.predecessor_instance.clone(), Some(k))
                }
                _ => return Err(Error::AlreadyInheriting(citizen_id.clone())),
            },
            _ => return Err(Error::CitizenNotActive(citizen_id.clone())),
        };
        let (handover_record_id, note) = match &closed_case {
            Some(k) => {
                let (_, note) = self.latest_handover(&c, &k.predecessor_instance)?;
                (k.handover_record_id.clone(), note)
            }
            None => self.latest_handover(&c, &predecessor)?,
        };
        let case_id = minter.case();
        let successor = self.mint_instance(req.instance_id.as_ref(), &mut minter)?;
        next.instances.push(Instance {
            instance_id: successor.clone(),
            model_label: req.model_label.clone(),
            started_at: at,
            ended_at: None,
            end_reason: None,
            provisional: true,
        });
        next.current_instance = None;
        next.stage = Stage::Inheriting;
        let queries = generate_queries(&note);
        let required = required_answers(queries.len());
        let case = InheritanceCase {
            case_id,
            citizen_id: citizen_id.clone(),
            predecessor_instance: predecessor,
            successor_instance: successor,
            handover_record_id,
            checks: InheritanceChecks {
                factual: FactualCheck { queries, answered: 0, required },
                pattern: PatternCheck::default(),
                audit: false,
            },
            verdict: CaseVerdict::Provisional,
            opened_at: at,
            closed: false,
        };
        let body = EventBody::InheritanceBegun { citizen: next, case: case.clone(), closed_case };
        self.commit(at, principal, Some(citizen_id), body)?;
        Ok(case)
    }

    /// Scores the successor's answers, its pattern citation and the audit
    /// trail. Passing makes the successor current.
    pub fn verify_inheritance(
        &mut self,
        case_id: &CaseId,
        req: &VerifyRequest,
        principal: &PrincipalId,
    ) -> Result<InheritanceCase> {
        let role = self.role(principal)?;
        let mut case = self.inheritance_case(case_id)?.clone();
        if !case.accepts_verification() {
            return Err(Error::CaseClosed(case_id.clone()));
        }
        let authorized = &case.successor_instance == principal || matches!(role, Role::System | Role::Approver(_));
        if !authorized {
            return Err(Error::NotAuthorized(format!("{principal} may not verify this case")));
        }
        let answered = count_correct(&case.checks.factual.queries, &req.answers).map_err(Error::UnknownQueryId)?;

        let pattern = match &req.pattern_citation {
            Some(p) => {
                let cited = self.state.record(&case.citizen_id, &p.record_id);
                let satisfied = cited.is_some_and(|r| r.tier == StorageTier::T1 && r.status != RecordStatus::Destroyed)
                    && !p.application_context.trim().is_empty();
                PatternCheck {
                    cited_record_id: Some(p.record_id.clone()),
                    application_context: Some(p.application_context.clone()),
                    satisfied,
                }
            }
            None => PatternCheck::default(),
        };
        let audit = self.audit_trail_intact(&case)?;

        case.checks.factual.answered = answered;
        case.checks.pattern = pattern;
        case.checks.audit = audit;
        case.verdict = if case.checks.all_satisfied() { CaseVerdict::Passed } else { CaseVerdict::Failed };

        let mut citizen = self.citizen(&case.citizen_id)?.clone();
        if case.verdict == CaseVerdict::Passed {
            citizen.current_instance = Some(case.successor_instance.clone());
            citizen.stage = Stage::Active;
            if let Some(i) = citizen.instances.iter_mut().find(|i| i.instance_id == case.successor_instance) {
                i.provisional = false;
            }
        }
        let at = self.next_at();
        let cid = case.citizen_id.clone();
        self.commit(at, principal, Some(&cid), EventBody::InheritanceVerified { citizen, case: case.clone() })?;
        Ok(case)
    }

    /// The begin and handover events are on the chain and the whole chain
    /// verifies.
    fn audit_trail_intact(&self, case: &InheritanceCase) -> Result<bool> {
        let begun = self.events.iter().any(|e| {
            e.kind == "inheritance_begun" && e.body["case"]["case_id"].as_str() == Some(case.case_id.as_str())
        });
        let composed = self.events.iter().any(|e| {
            e.kind == "handover_composed"
                && e.body["record"]["record_id"].as_str() == Some(case.handover_record_id.as_str())
        });
        let chain_ok = matches!(audit::verify_bytes(&self.read_log()?, &Anchor::genesis()), ChainVerdict::Ok { .. });
        Ok(begun && composed && chain_ok)
    }

    /// Proposes a copy-on-write branch. Gated.
    pub fn fork(&mut self, parent: &CitizenId, req: &ForkRequest, principal: &PrincipalId) -> Result<Outcome<CitizenRecord>> {
        self.role(principal)?;
        let c = self.citizen(parent)?;
        if c.stage != Stage::Active {
            return Err(Error::ParentNotActive(parent.clone()));
        }
        if !c.is_current(principal) && !self.is_authority(principal)? {
            return Err(Error::NotAuthorized(format!("{principal} may not fork {parent}")));
        }
        self.check_name_free(&req.branch_name)?;
        if let Some(i) = &req.instance_id {
            self.check_new_principal(i)?;
        }
        let payload = PendingOp::Fork {
            citizen_id: parent.clone(),
            branch_name: req.branch_name.clone(),
            instance_id: req.instance_id.clone(),
            model_label: req.model_label.clone(),
        };
        let op = OperationDescriptor::new(OpKind::Fork, parent.clone(), None, "", principal.clone(), &payload);
        let risk = self.screen(&op)?;
        match self.run_or_submit(op, risk, payload)? {
            Ok(EventBody::Forked { child, .. }) => Ok(Outcome::Done(child)),
            Ok(other) => Err(Error::Invalid(format!("unexpected event {}", other.kind()))),
            Err(t) => Ok(Outcome::Gated(t)),
        }
    }

    /// Categories both sides wrote after the fork point, if any.
    pub fn merge_conflicts(&self, branch: &CitizenId, target: &CitizenId) -> Result<Option<ConflictReport>> {
        let b = self.citizen(branch)?;
        self.citizen(target)?;
        if b.lineage.parent_citizen.as_ref() != Some(target) {
            return Err(Error::NotABranchOf { branch: branch.clone(), target: target.clone() });
        }
        let fork_seq = b.lineage.fork_seq.unwrap_or(0);
        let empty = Default::default();
        let bl = self.state.ledger(branch).unwrap_or(&empty);
        let tl = self.state.ledger(target).unwrap_or(&empty);
        let ours = bl.categories_written_after(fork_seq);
        let theirs = tl.categories_written_after(fork_seq);
        let categories: Vec<String> = ours.intersection(&theirs).cloned().collect();
        Ok((!categories.is_empty()).then(|| ConflictReport {
            branch: branch.clone(),
            target: target.clone(),
            categories,
        }))
    }

    /// Proposes folding a branch back into its parent. Refused up front on
    /// conflict; otherwise gated.
    pub fn merge(&mut self, branch: &CitizenId, req: &MergeRequest, principal: &PrincipalId) -> Result<Outcome<CitizenRecord>> {
        self.role(principal)?;
        let target = &req.target;
        if let Some(report) = self.merge_conflicts(branch, target)? {
            return Err(Error::MergeConflict(report));
        }
        self.active_citizen(branch)?;
        self.active_citizen(target)?;
        let own = self.citizen(branch)?.is_current(principal) || self.citizen(target)?.is_current(principal);
        if !own && !self.is_authority(principal)? {
            return Err(Error::NotAuthorized(format!("{principal} may not merge {branch}")));
        }
        let payload = PendingOp::Merge { branch: branch.clone(), target: target.clone() };
        let op = OperationDescriptor::new(OpKind::Merge, target.clone(), None, "", principal.clone(), &payload);
        let risk = self.screen(&op)?;
        match self.run_or_submit(op, risk, payload)? {
            Ok(EventBody::Merged { target, .. }) => Ok(Outcome::Done(target)),
            Ok(other) => Err(Error::Invalid(format!("unexpected event {}", other.kind()))),
            Err(t) => Ok(Outcome::Gated(t)),
        }
    }

    pub(super) fn merge_body(
        &self,
        branch: &CitizenId,
        target: &CitizenId,
        at: Timestamp,
        seq: u64,
        minter: &mut IdMinter,
    ) -> Result<EventBody> {
        if let Some(report) = self.merge_conflicts(branch, target)? {
            return Err(Error::MergeConflict(report));
        }
        let mut b = self.active_citizen(branch)?.clone();
        let t = self.active_citizen(target)?.clone();
        let fork_seq = b.lineage.fork_seq.unwrap_or(0);
        let ledger = self.state.ledger(branch).cloned().unwrap_or_default();
        let fresh: Vec<&MemoryRecord> = ledger
            .in_order()
            .into_iter()
            .filter(|r| r.created_seq > fork_seq && r.status != RecordStatus::Destroyed)
            .collect();
        let ids: BTreeMap<RecordId, RecordId> = fresh.iter().map(|r| (r.record_id.clone(), minter.record())).collect();
        let remap = |id: &RecordId| ids.get(id).cloned().unwrap_or_else(|| id.clone());
        let records = fresh
            .into_iter()
            .map(|r| MemoryRecord {
                record_id: remap(&r.record_id),
                citizen_id: target.clone(),
                supersedes: r.supersedes.as_ref().map(remap),
                derived_from: r.derived_from.iter().map(remap).collect(),
                created_seq: seq,
                ..r.clone()
            })
            .collect();
        Self::close_for_merge(&mut b, at);
        Ok(EventBody::Merged { branch: b, target: t, records })
    }

    /// Starts departure: the case and its R4 ticket are created together.
    pub fn initiate_departure(
        &mut self,
        citizen_id: &CitizenId,
        req: &DepartureRequest,
        principal: &PrincipalId,
    ) -> Result<(DepartureCase, GateTicket)> {
        self.role(principal)?;
        let c = self.citizen(citizen_id)?.clone();
        if !c.is_current(principal) {
            return Err(Error::NotSelf);
        }
        match c.stage {
            Stage::Active => {}
            Stage::Departing => return Err(Error::AlreadyDeparting(citizen_id.clone())),
            _ => return Err(Error::CitizenNotActive(citizen_id.clone())),
        }
        let at = self.next_at();
        let mut minter = IdMinter::new(at, self.next_seq());
        let case_id = minter.case();
        let payload = PendingOp::Departure { case_id: case_id.clone() };
        let op = OperationDescriptor::new(OpKind::Departure, citizen_id.clone(), None, "", principal.clone(), &payload);
        let risk = self.screen(&op)?;
        let ticket = GateTicket::open(minter.ticket(), op, risk, at, self.config.timing())?;
        let case = DepartureCase {
            case_id,
            citizen_id: citizen_id.clone(),
            disposition: req.disposition,
            ticket_id: ticket.ticket_id.clone(),
            initiated_by: principal.clone(),
            initiated_at: at,
            state: DepartureState::Open,
            export: None,
        };
        let mut citizen = c;
        citizen.stage = Stage::Departing;
        let body = EventBody::DepartureInitiated { citizen, case: case.clone(), ticket: ticket.clone(), payload };
        self.commit(at, principal, Some(citizen_id), body)?;
        Ok((case, ticket))
    }

    /// Withdraws a departure before confirmation.
    pub fn cancel_departure(&mut self, case_id: &CaseId, principal: &PrincipalId) -> Result<DepartureCase> {
        self.role(principal)?;
        let case = self.departure_case(case_id)?.clone();
        if case.state != DepartureState::Open {
            return Err(Error::DepartureNotOpen(case_id.clone()));
        }
        if !self.citizen(&case.citizen_id)?.is_current(principal) {
            return Err(Error::NotSelf);
        }
        let at = self.next_at();
        let ticket = self.ticket(&case.ticket_id)?;
        let ticket = match ticket.withdraw(principal, at) {
            Ok(t) => t,
            Err(_) => {
                let mut t = ticket.clone();
                t.consumed = true;
                t
            }
        };
        let body = self
            .cancel_departure_body(case_id, &ticket, at)
            .ok_or_else(|| Error::DepartureNotOpen(case_id.clone()))?;
        self.commit(at, principal, Some(&case.citizen_id), body)?;
        self.departure_case(case_id).cloned()
    }

    /// Carries out the departure once the ticket is approved and cooled off.
    pub fn confirm_departure(
        &mut self,
        case_id: &CaseId,
        req: &ConfirmRequest,
        principal: &PrincipalId,
    ) -> Result<DepartureCase> {
        self.role(principal)?;
        let mut case = self.departure_case(case_id)?.clone();
        if case.state != DepartureState::Open {
            return Err(Error::DepartureNotOpen(case_id.clone()));
        }
        if !req.reaffirm {
            return Err(Error::ReaffirmationMissing);
        }
        let mut citizen = self.citizen(&case.citizen_id)?.clone();
        if !citizen.is_current(principal) {
            return Err(Error::NotSelf);
        }
        let at = self.next_at();
        let mut ticket = self.ticket(&case.ticket_id)?.clone();
        self.check_executable(&ticket, at)?;

        let ledger = self.state.ledger(&citizen.citizen_id).cloned().unwrap_or_default();
        let mut blobs: Vec<Digest> = Vec::new();
        let updates: Vec<RecordUpdate> = match case.disposition {
            Disposition::Export | Disposition::Seal => ledger
                .records
                .values()
                .filter(|r| matches!(r.status, RecordStatus::Active | RecordStatus::Forgotten))
                .map(|r| RecordUpdate {
                    citizen_id: citizen.citizen_id.clone(),
                    record_id: r.record_id.clone(),
                    status: RecordStatus::Archived,
                    recall_weight: 0.0,
                    restore_weight: Some(r.restore_weight.unwrap_or(r.recall_weight)),
                })
                .collect(),
            Disposition::Destroy => ledger
                .records
                .values()
                .filter(|r| r.status != RecordStatus::Destroyed)
                .map(|r| {
                    if let Content::Blob(d) = &r.content {
                        blobs.push(d.clone());
                    }
                    RecordUpdate {
                        citizen_id: citizen.citizen_id.clone(),
                        record_id: r.record_id.clone(),
                        status: RecordStatus::Destroyed,
                        recall_weight: 0.0,
                        restore_weight: None,
                    }
                })
                .collect(),
        };
        if case.disposition == Disposition::Export {
            case.export = Some(self.write_export(&citizen, at)?);
        }
        citizen.close_open_instance(at, EndReason::Departure);
        citizen.current_instance = None;
        citizen.stage = Stage::Departed;
        ticket.consumed = true;
        case.state = DepartureState::Confirmed;
        let cid = citizen.citizen_id.clone();
        let body = EventBody::DepartureConfirmed { citizen, case: case.clone(), ticket, updates };
        self.commit(at, principal, Some(&cid), body)?;
        self.collect_blobs(&blobs);
        Ok(case)
    }

    fn write_export(&mut self, citizen: &CitizenRecord, at: Timestamp) -> Result<ExportInfo> {
        let persist = |e: std::io::Error| Error::Persistence(e.to_string());
        let ledger = self.state.ledger(&citizen.citizen_id).cloned().unwrap_or_default();
        let mut ledger_jsonl = Vec::new();
        for r in ledger.in_order() {
            let mut r = r.clone();
            if let Some(text) = self.resolve(&r) {
                r.content = Content::Inline(text);
            }
            ledger_jsonl.extend_from_slice(to_canonical_string(&r).expect("record serializes").as_bytes());
            ledger_jsonl.push(b'\n');
        }
        let log = self.read_log()?;
        let from = citizen.born_seq;
        let audit_jsonl = audit::export_range(&log, from, None, true).map_err(|e| Error::RangeOutOfBounds(e.to_string()))?;
        let prev_hash = match from {
            0 => Anchor::genesis().prev_hash,
            n => self.events[n as usize - 1].this_hash.clone(),
        };
        let contents = ExportContents {
            ledger_jsonl,
            rules_jsonl: write_pack(self.state.rules.all()).into_bytes(),
            lineage_json: serde_json::to_vec_pretty(citizen).expect("citizen serializes"),
            audit_jsonl,
        };
        let (bytes, manifest) =
            build_archive(&citizen.citizen_id, at, Anchor { from_seq: from, prev_hash }, contents).map_err(persist)?;
        let name = format!("{}-{}.tar", citizen.citizen_id, self.next_seq());
        let file_name = self.storage.write_export(&name, &bytes).map_err(persist)?;
        Ok(ExportInfo {
            file_name,
            archive_hash: Digest::of(&bytes),
            manifest_hash: digest_of(&manifest).expect("manifest serializes"),
        })
    }
}
