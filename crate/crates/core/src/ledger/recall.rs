//! Deterministic recall: filter, score, sort.
//!
//! `score = tier_weight × trust_weight × recall_weight × 2^(−age / half_life)`,
//! times 0.25 when a visible correction supersedes the record. Ties break on
//! record id so the order is total.

use std::collections::{BTreeSet, HashSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CitizenLedger, Content, MemoryRecord, StorageTier, TrustKind};
use crate::ids::RecordId;
use crate::time::Timestamp;

pub const SUPERSEDED_PENALTY: f64 = 0.25;

pub fn tier_weight(tier: StorageTier) -> f64 {
    match tier {
        StorageTier::T0 => 1.0,
        StorageTier::T1 => 0.8,
        StorageTier::T2 => 0.5,
        StorageTier::T3 => 0.6,
    }
}

pub fn trust_weight(kind: TrustKind) -> f64 {
    match kind {
        TrustKind::Firsthand => 1.0,
        TrustKind::Reported => 0.7,
        TrustKind::Inferred => 0.4,
    }
}

pub fn recency_decay(age: Duration, half_life: Duration) -> f64 {
    let hl = half_life.as_millis().max(1) as f64;
    (-(age.as_millis() as f64) / hl).exp2()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallQuery {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiers: Option<BTreeSet<StorageTier>>,
    /// Only records created at or before this instant; also the reference
    /// time for recency decay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub as_of: Option<Timestamp>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallHit {
    pub record: MemoryRecord,
    pub score: f64,
    pub superseded: bool,
}

pub fn score(record: &MemoryRecord, superseded: bool, reference: Timestamp, half_life: Duration) -> f64 {
    let age = Duration::from_millis(reference.millis_since(record.created_at));
    let base = tier_weight(record.tier)
        * trust_weight(record.trust.level)
        * record.recall_weight
        * recency_decay(age, half_life);
    if superseded {
        base * SUPERSEDED_PENALTY
    } else {
        base
    }
}

/// Runs a query over one citizen's ledger view.
///
/// `resolve` turns a record's stored content into text (blob lookups);
/// returned hits carry the resolved text inline.
pub fn recall<F>(
    ledger: &CitizenLedger,
    query: &RecallQuery,
    reference: Timestamp,
    half_life: Duration,
    resolve: F,
) -> Vec<RecallHit>
where
    F: Fn(&MemoryRecord) -> Option<String>,
{
    let visible = |r: &MemoryRecord| query.as_of.is_none_or(|t| r.created_at <= t);
    let superseded: HashSet<&RecordId> = ledger
        .records
        .values()
        .filter(|r| visible(r))
        .filter_map(|r| r.supersedes.as_ref())
        .collect();
    let terms: Vec<String> = query
        .terms
        .iter()
        .flatten()
        .map(|t| t.to_lowercase())
        .filter(|t| !t.is_empty())
        .collect();

    let mut hits: Vec<RecallHit> = ledger
        .records
        .values()
        .filter(|r| r.is_active() && visible(r))
        .filter(|r| query.tiers.as_ref().is_none_or(|ts| ts.contains(&r.tier)))
        .filter(|r| query.tags.as_ref().is_none_or(|ts| ts.is_subset(&r.tags)))
        .filter_map(|r| {
            let text = resolve(r)?;
            let folded = text.to_lowercase();
            if !terms.iter().all(|t| folded.contains(t.as_str())) {
                return None;
            }
            let is_superseded = superseded.contains(&r.record_id);
            let mut record = r.clone();
            record.content = Content::Inline(text);
            Some(RecallHit {
                score: score(r, is_superseded, reference, half_life),
                superseded: is_superseded,
                record,
            })
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.record.record_id.cmp(&b.record.record_id))
    });
    hits
}
