use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::gate::{ApproverEntry, GateTiming};
use crate::governance::RiskTier;
use crate::ids::PrincipalId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(with = "humantime_serde")]
    pub pending_window: Duration,
    #[serde(with = "humantime_serde")]
    pub cooling_off: Duration,
    #[serde(with = "humantime_serde")]
    pub recall_half_life: Duration,
    /// T2 records older than this are candidates for decay.
    #[serde(with = "humantime_serde")]
    pub retention_horizon: Duration,
    /// Decay archives candidates whose weight is below this.
    pub decay_floor: f64,
    /// Bodies longer than this many bytes are stored as blobs.
    pub inline_threshold: usize,
    pub max_content: usize,
    pub snapshot_interval: u64,
    pub approver_registry: Vec<ApproverEntry>,
    /// Principals that may act but decide nothing, such as operators.
    pub principals: Vec<PrincipalId>,
    /// Who may decide Constitution rule changes. Defaults to every
    /// approver with an R4 ceiling.
    pub constitution_authorities: Option<Vec<PrincipalId>>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let timing = GateTiming::default();
        Self {
            pending_window: timing.pending_window,
            cooling_off: timing.cooling_off,
            recall_half_life: Duration::from_secs(30 * 86_400),
            retention_horizon: Duration::from_secs(90 * 86_400),
            decay_floor: 0.2,
            inline_threshold: 4096,
            max_content: 64 * 1024,
            snapshot_interval: 1000,
            approver_registry: Vec::new(),
            principals: Vec::new(),
            constitution_authorities: None,
        }
    }
}

impl EngineConfig {
    pub fn timing(&self) -> GateTiming {
        GateTiming { pending_window: self.pending_window, cooling_off: self.cooling_off }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.pending_window.is_zero() {
            return Err("pending_window must be positive".into());
        }
        if self.recall_half_life.is_zero() {
            return Err("recall_half_life must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.decay_floor) {
            return Err("decay_floor must be within [0, 1]".into());
        }
        if self.snapshot_interval == 0 {
            return Err("snapshot_interval must be positive".into());
        }
        let r4 = self.approver_registry.iter().filter(|a| a.tier_ceiling == RiskTier::R4).count();
        if r4 < 2 {
            return Err("approver_registry needs at least two principals with an R4 ceiling".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in self.approver_registry.iter().map(|a| &a.principal).chain(&self.principals) {
            if p.as_str() == crate::SYSTEM_PRINCIPAL || !seen.insert(p) {
                return Err(format!("principal {p} is listed twice or reserved"));
            }
        }
        Ok(())
    }
}
