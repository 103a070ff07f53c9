//! A random operation driver over the whole engine surface. Errors are
//! expected and ignored; the point is to reach odd states.

use std::collections::BTreeMap;
use std::time::Duration;

use cma_core::governance::{OpKind, OperationPredicate, RuleEffect};
use cma_core::lifecycle::{Answer, Fact, PatternCitation, UnfinishedTask};
use cma_core::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::{p, system, HOUR, WEEK};

const CATEGORIES: [&str; 5] = ["daily", "errands", "medical", "narrative", "knowledge"];
const APPROVERS: [&str; 5] = ["root", "alice", "bob", "carol", "operator"];
const CEILINGS: [(&str, RiskTier); 4] =
    [("root", RiskTier::R4), ("alice", RiskTier::R4), ("bob", RiskTier::R3), ("carol", RiskTier::R2)];

pub struct Fuzzer {
    pub rng: StdRng,
    pub clock: ManualClock,
    births: u32,
}

impl Fuzzer {
    pub fn new(seed: u64, clock: ManualClock) -> Self {
        Self { rng: StdRng::seed_from_u64(seed), clock, births: 0 }
    }

    fn live(&self, e: &Engine) -> Vec<CitizenRecord> {
        e.citizens().into_iter().filter(|c| c.current_instance.is_some()).collect()
    }

    fn any_citizen(&mut self, e: &Engine) -> Option<CitizenRecord> {
        e.citizens().choose(&mut self.rng).cloned()
    }

    fn actor(&mut self, c: Option<&CitizenRecord>) -> PrincipalId {
        match self.rng.gen_range(0..10) {
            0..=5 => c.and_then(|c| c.current_instance.clone()).unwrap_or_else(system),
            6 => system(),
            7 => c.and_then(|c| c.instances.choose(&mut self.rng).map(|i| i.instance_id.clone())).unwrap_or_else(system),
            _ => p(APPROVERS.choose(&mut self.rng).unwrap()),
        }
    }

    fn records(&self, e: &Engine) -> Vec<(CitizenId, MemoryRecord)> {
        e.state()
            .ledgers
            .iter()
            .flat_map(|(c, l)| l.records.values().map(move |r| (c.clone(), r.clone())))
            .collect()
    }

    fn pick_record(&mut self, e: &Engine) -> Option<(CitizenRecord, MemoryRecord)> {
        let (c, r) = self.records(e).choose(&mut self.rng).cloned()?;
        Some((e.citizen(&c).ok()?.clone(), r))
    }

    fn text(&mut self) -> String {
        if self.rng.gen_ratio(1, 25) {
            "blob ".repeat(self.rng.gen_range(900..1200))
        } else {
            format!("note {}", self.rng.gen_range(0..1_000_000))
        }
    }

    fn trust(&mut self) -> TrustLevel {
        match self.rng.gen_range(0..6) {
            0 => TrustLevel::reported(),
            1 => TrustLevel::inferred("a guess"),
            2 => TrustLevel { level: ledger::TrustKind::Inferred, uncertainty_tag: None },
            _ => TrustLevel::firsthand(),
        }
    }

    fn tier(&mut self) -> StorageTier {
        *[StorageTier::T2, StorageTier::T2, StorageTier::T2, StorageTier::T3, StorageTier::T1, StorageTier::T0]
            .choose(&mut self.rng)
            .unwrap()
    }

    fn open_ticket(&mut self, e: &Engine) -> Option<GateTicket> {
        e.tickets(&TicketFilter::default())
            .into_iter()
            .filter(|t| t.state.is_open())
            .collect::<Vec<_>>()
            .choose(&mut self.rng)
            .cloned()
    }

    fn approved_ticket(&mut self, e: &Engine) -> Option<GateTicket> {
        e.tickets(&TicketFilter::default())
            .into_iter()
            .filter(|t| t.state == TicketState::Approved && !t.consumed)
            .collect::<Vec<_>>()
            .choose(&mut self.rng)
            .cloned()
    }

    /// Runs one random operation and names it.
    pub fn step(&mut self, e: &mut Engine) -> &'static str {
        let roll = self.rng.gen_range(0..100);
        let live = self.live(e);
        if live.is_empty() || (roll < 3 && self.births < 6) {
            self.births += 1;
            let name = format!("c{}", self.births);
            let mut req = BirthRequest::named(&name, "keeps things");
            req.shared_knowledge = vec!["the door sticks".into()];
            let _ = e.birth(&req, &system());
            return "birth";
        }
        let c = live.choose(&mut self.rng).unwrap().clone();
        match roll {
            3..=27 => {
                let tier = self.tier();
                let category = match tier {
                    StorageTier::T0 => "identity",
                    _ => CATEGORIES.choose(&mut self.rng).unwrap(),
                };
                let req = AppendRequest {
                    tier,
                    category: category.into(),
                    content: self.text(),
                    tags: Default::default(),
                    trust: self.trust(),
                };
                let who = self.actor(Some(&c));
                let _ = e.append(&c.citizen_id, &req, &who);
                "append"
            }
            28..=33 => {
                if let Some((owner, r)) = self.pick_record(e) {
                    let req = CorrectRequest { content: self.text(), tags: None, trust: Some(self.trust()) };
                    let who = self.actor(Some(&owner));
                    let _ = e.correct(&r.record_id, &req, &who);
                }
                "correct"
            }
            34..=36 => {
                let pool: Vec<RecordId> = e
                    .state()
                    .ledger(&c.citizen_id)
                    .map(|l| l.records.values().filter(|r| r.tier == StorageTier::T2).map(|r| r.record_id.clone()).collect())
                    .unwrap_or_default();
                let n = self.rng.gen_range(1..=pool.len().clamp(1, 3));
                let source_ids: Vec<RecordId> = pool.choose_multiple(&mut self.rng, n).cloned().collect();
                let req = DistillRequest {
                    source_ids,
                    category: "narrative".into(),
                    content: self.text(),
                    tags: Default::default(),
                    trust: self.trust(),
                };
                let who = self.actor(Some(&c));
                let _ = e.distill(&c.citizen_id, &req, &who);
                "distill"
            }
            37..=41 => {
                let action = self.rng.gen_range(0..4);
                let wanted = match action {
                    0 => Some(RecordStatus::Forgotten),
                    1 => Some(RecordStatus::Archived),
                    _ => None,
                };
                let pool: Vec<(CitizenId, MemoryRecord)> = self
                    .records(e)
                    .into_iter()
                    .filter(|(_, r)| match wanted {
                        Some(w) => r.status == w,
                        None if action == 2 => r.tier == StorageTier::T2 && r.status == RecordStatus::Active,
                        None => true,
                    })
                    .collect();
                if let Some((owner, r)) = pool.choose(&mut self.rng).cloned() {
                    let owner = e.citizen(&owner).ok().cloned();
                    let who = self.actor(owner.as_ref());
                    let _ = match action {
                        0 => e.unforget(&r.record_id, &who).map(|_| ()),
                        1 => e.revive(&r.record_id, &who).map(|_| ()),
                        2 => e.set_recall_weight(&r.record_id, *[0.05, 0.1, 0.5, 0.9, 1.0, 1.5].choose(&mut self.rng).unwrap(), &who).map(|_| ()),
                        _ => e.forget(&r.record_id, &who).map(|_| ()),
                    };
                }
                "forget"
            }
            42..=45 => {
                if let Some((owner, r)) = self.pick_record(e) {
                    let consent = if self.rng.gen_bool(0.5) {
                        let who = self.actor(Some(&owner));
                        e.grant_consent(&r.record_id, &who).ok().map(|k| k.consent_id)
                    } else {
                        None
                    };
                    let who = self.actor(Some(&owner));
                    let _ = e.request_destruction(&r.record_id, consent.as_ref(), &who);
                }
                "destroy"
            }
            46..=61 => {
                if let Some(t) = self.open_ticket(e) {
                    let verdict = if self.rng.gen_ratio(1, 6) { Verdict::Reject } else { Verdict::Approve };
                    let who = if self.rng.gen_ratio(4, 5) {
                        let able: Vec<&str> = CEILINGS.iter().filter(|(_, c)| *c >= t.risk).map(|(n, _)| *n).collect();
                        p(able.choose(&mut self.rng).unwrap())
                    } else {
                        p(APPROVERS.choose(&mut self.rng).unwrap())
                    };
                    let _ = e.decide(&t.ticket_id, &DecisionRequest { verdict, rationale: "fuzz".into() }, &who);
                }
                "decide"
            }
            62..=67 => {
                if let Some(t) = self.approved_ticket(e) {
                    if self.rng.gen_bool(0.7) {
                        self.clock.advance(WEEK);
                    }
                    let departure = e.state().departures.values().find(|d| d.ticket_id == t.ticket_id).cloned();
                    match departure {
                        Some(d) => {
                            let owner = e.citizen(&d.citizen_id).ok().cloned();
                            let who = self.actor(owner.as_ref());
                            let _ = e.confirm_departure(&d.case_id, &ConfirmRequest { reaffirm: self.rng.gen_ratio(9, 10) }, &who);
                        }
                        None => {
                            let who = p(APPROVERS.choose(&mut self.rng).unwrap());
                            let _ = e.execute_ticket(&t.ticket_id, &who);
                        }
                    }
                }
                "execute"
            }
            68..=71 => {
                let span = match self.rng.gen_range(0..4) {
                    0 => Duration::from_secs(100 * 86_400),
                    1 => Duration::from_secs(73 * 3600),
                    _ => HOUR * self.rng.gen_range(1..48),
                };
                self.clock.advance(span);
                if span > WEEK || self.rng.gen_bool(0.5) {
                    let _ = e.decay_sweep();
                } else {
                    let _ = e.sweep_timeouts();
                }
                "tick"
            }
            72..=74 => {
                let category = CATEGORIES.choose(&mut self.rng).unwrap().to_string();
                let new_writer = self.actor(Some(&c));
                let who = self.actor(Some(&c));
                let _ = e.transfer_ownership(&c.citizen_id, &TransferRequest { category, new_writer }, &who);
                "transfer"
            }
            75..=76 => {
                let layer = GovernanceLayer::ALL[self.rng.gen_range(0..4)];
                let mut scope = OperationPredicate::any();
                if self.rng.gen_bool(0.8) {
                    scope = scope.op(*[OpKind::Append, OpKind::Forget, OpKind::Destroy, OpKind::Fork].choose(&mut self.rng).unwrap());
                }
                if self.rng.gen_bool(0.5) {
                    scope = scope.category(CATEGORIES.choose(&mut self.rng).unwrap()).unwrap();
                }
                if self.rng.gen_bool(0.5) {
                    scope = scope.citizen(c.citizen_id.as_str()).unwrap();
                }
                let effect = match self.rng.gen_range(0..3) {
                    0 => RuleEffect::Permit,
                    1 => RuleEffect::Deny,
                    _ => RuleEffect::RequireTier(RiskTier::R3),
                };
                let who = self.actor(Some(&c));
                let _ = e.register_rule(&RuleDraft { layer, scope, effect, supersedes: None }, &who);
                "rule"
            }
            77..=81 => {
                let cites: Vec<RecordId> = e
                    .state()
                    .ledger(&c.citizen_id)
                    .map(|l| l.records.keys().cloned().collect())
                    .unwrap_or_default();
                if let Some(r) = cites.choose(&mut self.rng) {
                    let note = HandoverNote {
                        unfinished_tasks: vec![UnfinishedTask {
                            task_id: "t1".into(),
                            description: "tidy".into(),
                            status: format!("step {}", self.rng.gen_range(0..9)),
                        }],
                        facts: vec![Fact { statement: "the door sticks".into(), supporting_record_ids: vec![r.clone()] }],
                        ..HandoverNote::default()
                    };
                    let who = self.actor(Some(&c));
                    let _ = e.compose_handover(&c.citizen_id, &note, &who);
                }
                "handover"
            }
            82..=84 => {
                let target = self.any_citizen(e).unwrap_or(c);
                let who = self.actor(Some(&target));
                let req = InheritanceRequest { model_label: "next".into(), instance_id: None };
                let _ = e.begin_inheritance(&target.citizen_id, &req, &who);
                "inherit"
            }
            85..=88 => {
                let open: Vec<InheritanceCase> =
                    e.state().cases.values().filter(|k| k.accepts_verification()).cloned().collect();
                if let Some(k) = open.choose(&mut self.rng) {
                    let good = self.rng.gen_ratio(3, 4);
                    let answers = k
                        .checks
                        .factual
                        .queries
                        .iter()
                        .map(|q| Answer {
                            query_id: q.query_id.clone(),
                            answer: if good { q.expected.clone() } else { "no idea".into() },
                        })
                        .collect();
                    let pattern = e
                        .state()
                        .ledger(&k.citizen_id)
                        .and_then(|l| l.records.values().find(|r| r.tier == StorageTier::T1))
                        .map(|r| PatternCitation { record_id: r.record_id.clone(), application_context: "used it".into() });
                    let who = if self.rng.gen_ratio(4, 5) { k.successor_instance.clone() } else { self.actor(None) };
                    let _ = e.verify_inheritance(&k.case_id, &VerifyRequest { answers, pattern_citation: pattern }, &who);
                }
                "verify"
            }
            89..=91 => {
                let req = ForkRequest {
                    branch_name: format!("{}-b{}", c.name, self.rng.gen_range(0..1000)),
                    instance_id: None,
                    model_label: "branch".into(),
                };
                let who = self.actor(Some(&c));
                let _ = e.fork(&c.citizen_id, &req, &who);
                "fork"
            }
            92..=94 => {
                let branches: Vec<CitizenRecord> =
                    live.iter().filter(|b| b.lineage.parent_citizen.is_some()).cloned().collect();
                if let Some(b) = branches.choose(&mut self.rng) {
                    let target = b.lineage.parent_citizen.clone().unwrap();
                    let who = self.actor(Some(b));
                    let _ = e.merge(&b.citizen_id, &MergeRequest { target }, &who);
                }
                "merge"
            }
            95..=97 => {
                let disposition = *[Disposition::Seal, Disposition::Export, Disposition::Destroy].choose(&mut self.rng).unwrap();
                let who = self.actor(Some(&c));
                let _ = e.initiate_departure(&c.citizen_id, &DepartureRequest { disposition }, &who);
                "depart"
            }
            _ => {
                let open: Vec<DepartureCase> =
                    e.state().departures.values().filter(|d| d.state == DepartureState::Open).cloned().collect();
                if let Some(d) = open.choose(&mut self.rng) {
                    let owner = e.citizen(&d.citizen_id).ok().cloned();
                    let who = self.actor(owner.as_ref());
                    let _ = e.cancel_departure(&d.case_id, &who);
                }
                "cancel"
            }
        }
    }
}

fn same_identity(a: &MemoryRecord, b: &MemoryRecord) -> bool {
    a.record_id == b.record_id
        && a.citizen_id == b.citizen_id
        && a.tier == b.tier
        && a.category == b.category
        && a.supersedes == b.supersedes
        && a.derived_from == b.derived_from
        && a.created_at == b.created_at
        && a.created_by == b.created_by
}

/// Every (citizen, record) seen so far with the content it was born with.
#[derive(Default)]
pub struct AppendOnlyWatch {
    seen: BTreeMap<(CitizenId, RecordId), MemoryRecord>,
}

impl AppendOnlyWatch {
    /// Checks the current state against everything seen before, then
    /// remembers any new records. Returns the first violation.
    pub fn check(&mut self, state: &EngineState) -> Result<(), String> {
        for ((c, id), first) in &self.seen {
            let Some(now) = state.record(c, id) else {
                return Err(format!("{c}/{id} disappeared"));
            };
            if now.content_hash != first.content_hash {
                return Err(format!("{c}/{id} changed its content hash"));
            }
            let kept = if now.status == RecordStatus::Destroyed {
                now.content == ledger::Content::Redacted
            } else {
                now.content == first.content
            };
            if !kept {
                return Err(format!("{c}/{id} content changed while {:?}", now.status));
            }
            if !same_identity(now, first) {
                return Err(format!("{c}/{id} changed an immutable field"));
            }
            if first.status == RecordStatus::Destroyed && now.status != RecordStatus::Destroyed {
                return Err(format!("{c}/{id} came back from a tombstone"));
            }
        }
        for (c, l) in &state.ledgers {
            for r in l.records.values() {
                let key = (c.clone(), r.record_id.clone());
                match self.seen.get_mut(&key) {
                    Some(prev) if r.status == RecordStatus::Destroyed => prev.status = RecordStatus::Destroyed,
                    Some(_) => {}
                    None => {
                        self.seen.insert(key, r.clone());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }
}
