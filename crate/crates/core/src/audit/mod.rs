//! Hash-chained audit log.
//!
//! Each persisted line is one [`AuditEvent`] with fields in a fixed order.
//! `this_hash` is SHA-256 over
//!
//! ```text
//! prev_hash (32 raw bytes) ‖ seq (u64 BE) ‖ len‖at ‖ len‖kind ‖ len‖actor
//!   ‖ citizen tag (0 = none, 1 = some) [‖ len‖citizen_id] ‖ len‖body
//! ```
//!
//! where `len` is a u32 big-endian byte count and `body` is the canonical
//! (key-sorted, compact) JSON of the event body. Verification works on the
//! raw file bytes, so any edit that does not reproduce both the canonical
//! encoding and the hash is caught at the line where it happens.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest as _, Sha256};

use crate::canonical::canonical_value_string;
use crate::ids::{CitizenId, PrincipalId};
use crate::time::Timestamp;

pub const GENESIS_HASH: [u8; 32] = [0; 32];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditEvent {
    pub seq: u64,
    pub at: Timestamp,
    pub kind: String,
    pub actor: PrincipalId,
    pub citizen_id: Option<CitizenId>,
    pub body: Value,
    pub prev_hash: String,
    pub this_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainHead {
    pub seq: u64,
    pub at: Timestamp,
    pub hash: String,
}

pub fn compute_hash(
    prev: &[u8; 32],
    seq: u64,
    at: Timestamp,
    kind: &str,
    actor: &PrincipalId,
    citizen_id: Option<&CitizenId>,
    body: &Value,
) -> String {
    fn field(h: &mut Sha256, bytes: &[u8]) {
        h.update((bytes.len() as u32).to_be_bytes());
        h.update(bytes);
    }
    let mut h = Sha256::new();
    h.update(prev);
    h.update(seq.to_be_bytes());
    field(&mut h, at.to_rfc3339().as_bytes());
    field(&mut h, kind.as_bytes());
    field(&mut h, actor.as_str().as_bytes());
    match citizen_id {
        None => h.update([0u8]),
        Some(c) => {
            h.update([1u8]);
            field(&mut h, c.as_str().as_bytes());
        }
    }
    field(&mut h, canonical_value_string(body).as_bytes());
    hex::encode(h.finalize())
}

fn decode_hash(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 || s.bytes().any(|b| !matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return None;
    }
    let mut out = [0u8; 32];
    hex::decode_to_slice(s, &mut out).ok()?;
    Some(out)
}

impl AuditEvent {
    /// Seals a new event onto `prev`.
    pub fn seal(
        prev: Option<&ChainHead>,
        at: Timestamp,
        kind: &str,
        actor: PrincipalId,
        citizen_id: Option<CitizenId>,
        body: Value,
    ) -> Self {
        let (seq, prev_bytes) = match prev {
            None => (0, GENESIS_HASH),
            Some(h) => (h.seq + 1, decode_hash(&h.hash).expect("chain head hash is valid hex")),
        };
        let body = crate::canonical::sort_keys(body);
        let this_hash = compute_hash(&prev_bytes, seq, at, kind, &actor, citizen_id.as_ref(), &body);
        Self {
            seq,
            at,
            kind: kind.to_string(),
            actor,
            citizen_id,
            body,
            prev_hash: hex::encode(prev_bytes),
            this_hash,
        }
    }

    pub fn head(&self) -> ChainHead {
        ChainHead { seq: self.seq, at: self.at, hash: self.this_hash.clone() }
    }

    /// The persisted form, without the trailing newline.
    pub fn encode_line(&self) -> String {
        serde_json::to_string(self).expect("audit event serializes")
    }

    pub fn recompute_hash(&self) -> Option<String> {
        let prev = decode_hash(&self.prev_hash)?;
        Some(compute_hash(
            &prev,
            self.seq,
            self.at,
            &self.kind,
            &self.actor,
            self.citizen_id.as_ref(),
            &self.body,
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result")]
pub enum ChainVerdict {
    Ok { events: u64 },
    FirstBad { seq: u64 },
}

impl ChainVerdict {
    pub fn is_ok(self) -> bool {
        matches!(self, Self::Ok { .. })
    }
}

/// Where a verified segment attaches to the rest of the chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub from_seq: u64,
    pub prev_hash: String,
}

impl Anchor {
    pub fn genesis() -> Self {
        Self { from_seq: 0, prev_hash: hex::encode(GENESIS_HASH) }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorLine {
    anchor: Anchor,
}

/// Verifies persisted log bytes.
///
/// Line `i` must be the canonical encoding of the event with
/// `seq = anchor.from_seq + i`, chain onto the previous line (or the
/// anchor), and carry its own correct hash. The first line that fails any
/// of these is reported. A missing final newline marks the last line bad.
pub fn verify_bytes(bytes: &[u8], anchor: &Anchor) -> ChainVerdict {
    let mut expected_prev = anchor.prev_hash.clone();
    let mut seq = anchor.from_seq;
    let mut rest = bytes;
    while !rest.is_empty() {
        let (line, tail, terminated) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], &rest[i + 1..], true),
            None => (rest, &rest[rest.len()..], false),
        };
        if !terminated || !line_ok(line, seq, &expected_prev) {
            return ChainVerdict::FirstBad { seq };
        }
        let ev: AuditEvent = serde_json::from_slice(line).expect("checked above");
        expected_prev = ev.this_hash;
        seq += 1;
        rest = tail;
    }
    ChainVerdict::Ok { events: seq - anchor.from_seq }
}

fn line_ok(line: &[u8], seq: u64, expected_prev: &str) -> bool {
    let Ok(text) = std::str::from_utf8(line) else { return false };
    let Ok(ev) = serde_json::from_str::<AuditEvent>(text) else { return false };
    ev.seq == seq
        && ev.prev_hash == expected_prev
        && ev.encode_line() == text
        && serde_json::to_string(&ev.body).is_ok_and(|b| b == canonical_value_string(&ev.body))
        && ev.recompute_hash().is_some_and(|h| h == ev.this_hash)
}

/// Verifies an export stream. A leading `{"anchor":{..}}` line, when
/// present, pins where the segment attaches; otherwise the stream must
/// start at genesis.
pub fn verify_export(bytes: &[u8]) -> ChainVerdict {
    let first_end = bytes.iter().position(|&b| b == b'\n');
    if let Some(end) = first_end {
        if let Ok(a) = serde_json::from_slice::<AnchorLine>(&bytes[..end]) {
            return verify_bytes(&bytes[end + 1..], &a.anchor);
        }
    }
    verify_bytes(bytes, &Anchor::genesis())
}

pub fn anchor_line(anchor: &Anchor) -> String {
    serde_json::to_string(&AnchorLine { anchor: anchor.clone() }).expect("anchor serializes")
}

/// Byte offsets of each line start in a log, used for range export.
pub fn line_spans(bytes: &[u8]) -> Vec<std::ops::Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'\n' {
            spans.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < bytes.len() {
        spans.push(start..bytes.len());
    }
    spans
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("range {from}..={to} is outside the log (len {len})")]
pub struct RangeOutOfBounds {
    pub from: u64,
    pub to: u64,
    pub len: u64,
}

/// Lines `from..=to` exactly as persisted, optionally preceded by the anchor
/// line needed to verify them alone. `to = None` means through the end; an
/// empty log or `from == len` gives an empty stream.
pub fn export_range(
    bytes: &[u8],
    from: u64,
    to: Option<u64>,
    anchored: bool,
) -> Result<Vec<u8>, RangeOutOfBounds> {
    let spans = line_spans(bytes);
    let len = spans.len() as u64;
    let to_incl = to.unwrap_or(len.saturating_sub(1));
    if from > len || (to.is_some() && (to_incl >= len || to_incl < from)) {
        return Err(RangeOutOfBounds { from, to: to_incl, len });
    }
    let mut out = Vec::new();
    if from == len {
        return Ok(out);
    }
    if anchored {
        let prev_hash = if from == 0 {
            hex::encode(GENESIS_HASH)
        } else {
            let prev: AuditEvent = serde_json::from_slice(&bytes[spans[from as usize - 1].clone()])
                .map_err(|_| RangeOutOfBounds { from, to: to_incl, len })?;
            prev.this_hash
        };
        out.extend_from_slice(anchor_line(&Anchor { from_seq: from, prev_hash }).as_bytes());
        out.push(b'\n');
    }
    let start = spans[from as usize].start;
    let end = spans[to_incl as usize].end;
    out.extend_from_slice(&bytes[start..end]);
    Ok(out)
}
