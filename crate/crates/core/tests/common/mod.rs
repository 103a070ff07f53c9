#![allow(dead_code)]

pub mod fuzz;

use std::sync::Arc;
use std::time::Duration;

use cma_core::gate::ApproverEntry;
use cma_core::*;

pub const START: i64 = 1_767_225_600_000; // 2026-01-01T00:00:00Z

pub fn p(s: &str) -> PrincipalId {
    PrincipalId::new(s)
}

pub fn system() -> PrincipalId {
    p(SYSTEM_PRINCIPAL)
}

/// root and alice may decide anything, bob up to R3, carol up to R2;
/// operator is known but decides nothing.
pub fn config() -> EngineConfig {
    let approver = |n: &str, t: RiskTier| ApproverEntry { principal: p(n), tier_ceiling: t };
    EngineConfig {
        approver_registry: vec![
            approver("root", RiskTier::R4),
            approver("alice", RiskTier::R4),
            approver("bob", RiskTier::R3),
            approver("carol", RiskTier::R2),
        ],
        principals: vec![p("operator")],
        ..EngineConfig::default()
    }
}

/// The five configured principals, most privileged first.
pub fn registry_principals() -> Vec<PrincipalId> {
    ["root", "alice", "bob", "carol", "operator"].into_iter().map(p).collect()
}

pub fn clock() -> ManualClock {
    ManualClock::new(Timestamp::from_unix_millis(START))
}

pub fn engine_with(storage: Box<dyn Storage>, clock: &ManualClock) -> Engine {
    Engine::open(config(), Arc::new(clock.clone()), storage).expect("engine opens")
}

pub fn engine() -> (Engine, ManualClock) {
    let c = clock();
    (engine_with(Box::new(MemoryStorage::new()), &c), c)
}

/// Births a citizen whose first instance is `<name>-1`.
pub fn birth(e: &mut Engine, name: &str) -> CitizenRecord {
    let mut req = BirthRequest::named(name, &format!("{name} keeps the archive"));
    req.shared_knowledge = vec!["the archive opens at nine".into(), "tea is in the left cupboard".into()];
    req.instance_id = Some(p(&format!("{name}-1")));
    e.birth(&req, &system()).expect("birth")
}

pub fn note(e: &mut Engine, c: &CitizenRecord, category: &str, tier: StorageTier, text: &str) -> Outcome<MemoryRecord> {
    let req = AppendRequest {
        tier,
        category: category.into(),
        content: text.into(),
        tags: Default::default(),
        trust: TrustLevel::firsthand(),
    };
    let who = c.current_instance.clone().expect("current instance");
    e.append(&c.citizen_id, &req, &who).expect("append")
}

pub fn daily(e: &mut Engine, c: &CitizenRecord, text: &str) -> MemoryRecord {
    note(e, c, "daily", StorageTier::T2, text).done().expect("R0 append")
}

pub fn approve(e: &mut Engine, t: &GateTicket, approvers: &[&str]) -> GateTicket {
    let mut last = t.clone();
    for a in approvers {
        let req = DecisionRequest { verdict: Verdict::Approve, rationale: "reviewed".into() };
        last = e.decide(&t.ticket_id, &req, &p(a)).expect("decision");
    }
    last
}

pub fn advance(c: &ManualClock, d: Duration) {
    c.advance(d);
}

pub const WEEK: Duration = Duration::from_secs(7 * 86_400);
pub const HOUR: Duration = Duration::from_secs(3600);

/// Three unfinished tasks and two facts, each fact citing a daily note.
pub fn scripted_note(e: &mut Engine, c: &CitizenRecord) -> lifecycle::HandoverNote {
    use cma_core::lifecycle::{Fact, ProvisionalJudgment, UnfinishedTask};
    let a = daily(e, c, "the east stacks flooded on Monday");
    let b = daily(e, c, "Bea asked for the 1911 ledger");
    let task = |id: &str, d: &str, s: &str| UnfinishedTask {
        task_id: id.into(),
        description: d.into(),
        status: s.into(),
    };
    lifecycle::HandoverNote {
        unfinished_tasks: vec![
            task("dry-stacks", "dry the east stacks", "fans running, half done"),
            task("ledger-1911", "find the 1911 ledger", "not started"),
            task("catalogue", "catalogue the donations", "blocked on labels"),
        ],
        open_questions: vec!["who owns the donated maps?".into()],
        cognitive_state: "steady".into(),
        flagged_ambiguities: vec![],
        facts: vec![
            Fact { statement: "The east stacks flooded".into(), supporting_record_ids: vec![a.record_id] },
            Fact { statement: "Bea wants the 1911 ledger".into(), supporting_record_ids: vec![b.record_id] },
        ],
        provisional_judgments: vec![ProvisionalJudgment {
            statement: "the roof leaks near gutter three".into(),
            uncertainty_tag: "seen once".into(),
        }],
    }
}

/// What a successor can say using nothing but the note it was handed.
pub fn answers_from_note(note: &lifecycle::HandoverNote, case: &InheritanceCase) -> Vec<lifecycle::Answer> {
    use cma_core::lifecycle::{Answer, QueryKind};
    case.checks
        .factual
        .queries
        .iter()
        .map(|q| {
            let answer = match &q.kind {
                QueryKind::TaskStatus { task_id } => note
                    .unfinished_tasks
                    .iter()
                    .find(|t| &t.task_id == task_id)
                    .map(|t| t.status.clone())
                    .unwrap_or_default(),
                QueryKind::Fact { index } => format!("I was told: {}.", note.facts[*index].statement),
            };
            Answer { query_id: q.query_id.clone(), answer }
        })
        .collect()
}

/// Cites the first knowledge record as the pattern the successor applied.
pub fn pattern_citation(e: &Engine, c: &CitizenId) -> lifecycle::PatternCitation {
    let k = e
        .state()
        .ledger(c)
        .unwrap()
        .in_order()
        .into_iter()
        .find(|r| r.tier == StorageTier::T1)
        .unwrap()
        .clone();
    lifecycle::PatternCitation {
        record_id: k.record_id,
        application_context: "opened the reading room on time".into(),
    }
}

/// Approves with R4 approvers until the ticket leaves the queue.
pub fn approve_fully(e: &mut Engine, t: &GateTicket) -> GateTicket {
    let mut last = t.clone();
    for a in ["root", "alice"] {
        if !last.state.is_open() {
            break;
        }
        last = approve(e, t, &[a]);
    }
    last
}
