//! Governed long-term memory for persistent agent citizens.
//!
//! [`Engine`] is the entry point. Every mutation it accepts becomes one
//! hash-chained audit event, and state is always the fold of those events.

pub mod alert;
pub mod audit;
pub mod canonical;
pub mod config;
pub mod engine;
pub mod error;
pub mod event;
pub mod export;
pub mod gate;
pub mod governance;
pub mod ids;
pub mod ledger;
pub mod lifecycle;
pub mod state;
pub mod storage;
pub mod time;

pub use alert::{Alert, AlertKind};
pub use audit::{AuditEvent, ChainVerdict};
pub use config::EngineConfig;
pub use engine::*;
pub use error::{Error, ErrorClass, Result};
pub use event::EventBody;
pub use gate::{ApproverEntry, GateTicket, TicketFilter, TicketState, Verdict};
pub use governance::{GovernanceLayer, GovernanceRule, RiskTier, RuleDraft};
pub use ids::{CaseId, CitizenId, ConsentId, PrincipalId, RecordId, RuleId, TicketId};
pub use ledger::{MemoryRecord, RecallHit, RecallQuery, RecordStatus, StorageTier, TrustLevel};
pub use lifecycle::{
    CaseVerdict, CitizenRecord, DepartureCase, DepartureState, Disposition, HandoverNote,
    InheritanceCase, Stage,
};
pub use state::EngineState;
pub use storage::{FileStorage, MemoryStorage, Storage};
pub use time::{Clock, ManualClock, SystemClock, Timestamp};

/// Principal used for engine-originated writes.
pub const SYSTEM_PRINCIPAL: &str = "system";
