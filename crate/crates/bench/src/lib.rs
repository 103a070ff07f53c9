//! Fixtures shared by the benchmarks.

use std::sync::Arc;
use std::time::Duration;

use cma_core::engine::{AppendRequest, BirthRequest};
use cma_core::gate::ApproverEntry;
use cma_core::{
    CitizenRecord, Engine, EngineConfig, ManualClock, MemoryStorage, PrincipalId, RiskTier, StorageTier, Timestamp,
    TrustLevel,
};

const WORDS: [&str; 12] = [
    "tea", "ledger", "flood", "maps", "stacks", "roof", "gutter", "donation", "label", "catalogue", "reading", "room",
];

pub fn config() -> EngineConfig {
    let approver = |n: &str| ApproverEntry { principal: PrincipalId::new(n), tier_ceiling: RiskTier::R4 };
    EngineConfig { approver_registry: vec![approver("root"), approver("alice")], ..EngineConfig::default() }
}

pub fn note(i: usize) -> AppendRequest {
    AppendRequest {
        tier: if i % 7 == 0 { StorageTier::T1 } else { StorageTier::T2 },
        category: "daily".into(),
        content: format!("{} {} {} entry {i}", WORDS[i % 12], WORDS[(i / 12) % 12], WORDS[(i * 7) % 12]),
        tags: [WORDS[(i * 5) % 12].to_string()].into(),
        trust: TrustLevel::firsthand(),
    }
}

/// An in-memory engine with one citizen and `records` daily notes, a
/// minute apart.
pub fn populated(records: usize) -> (Engine, CitizenRecord, ManualClock) {
    let clock = ManualClock::new(Timestamp::from_unix_millis(1_767_225_600_000));
    let mut e = Engine::open(config(), Arc::new(clock.clone()), Box::new(MemoryStorage::new())).expect("engine opens");
    let mut req = BirthRequest::named("ada", "ada keeps the archive");
    req.instance_id = Some(PrincipalId::new("ada-1"));
    let c = e.birth(&req, &PrincipalId::new(cma_core::SYSTEM_PRINCIPAL)).expect("birth");
    let me = PrincipalId::new("ada-1");
    for i in 0..records {
        clock.advance(Duration::from_secs(60));
        e.append(&c.citizen_id, &note(i), &me).expect("append");
    }
    (e, c, clock)
}
