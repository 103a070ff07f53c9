//! Per-citizen append-only memory ledgers.
//!
//! Records are never edited in place. Corrections append a new record that
//! supersedes the old one; forgetting, archiving and destruction change a
//! record's status (and, for destruction, redact its content) through an
//! audited event.

mod recall;
mod record;

use im::OrdMap;
use serde::{Deserialize, Serialize};

pub use recall::{
    recall, recency_decay, score, tier_weight, trust_weight, RecallHit, RecallQuery,
    SUPERSEDED_PENALTY,
};
pub use record::{
    Content, MemoryRecord, OwnershipEntry, RecordStatus, StorageTier, TrustKind, TrustLevel,
};

use crate::ids::{PrincipalId, RecordId};

/// One citizen's view of memory. Cloning is O(1) and shares structure, which
/// is what makes forks cheap.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CitizenLedger {
    pub records: OrdMap<RecordId, MemoryRecord>,
    /// Category name to its current primary writer.
    pub ownership: OrdMap<String, OwnershipEntry>,
}

impl CitizenLedger {
    pub fn get(&self, id: &RecordId) -> Option<&MemoryRecord> {
        self.records.get(id)
    }

    pub fn contains(&self, id: &RecordId) -> bool {
        self.records.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, record: MemoryRecord) {
        self.records.insert(record.record_id.clone(), record);
    }

    pub fn owner(&self, category: &str) -> Option<&OwnershipEntry> {
        self.ownership.get(category)
    }

    /// Moves every category held by `from` to `to`.
    pub fn transfer_ownership(&mut self, from: &PrincipalId, to: &PrincipalId) {
        let moved: Vec<String> = self
            .ownership
            .iter()
            .filter(|(_, e)| &e.primary_writer == from)
            .map(|(k, _)| k.clone())
            .collect();
        for cat in moved {
            if let Some(e) = self.ownership.get_mut(&cat) {
                e.primary_writer = to.clone();
            }
        }
    }

    /// Records in creation order.
    pub fn in_order(&self) -> Vec<&MemoryRecord> {
        let mut v: Vec<&MemoryRecord> = self.records.values().collect();
        v.sort_by(|a, b| (a.created_seq, &a.record_id).cmp(&(b.created_seq, &b.record_id)));
        v
    }

    /// Categories written by records created after `seq`.
    pub fn categories_written_after(&self, seq: u64) -> std::collections::BTreeSet<String> {
        self.records
            .values()
            .filter(|r| r.created_seq > seq)
            .map(|r| r.category.clone())
            .collect()
    }
}
