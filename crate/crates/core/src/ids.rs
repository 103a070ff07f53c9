//! Identifier newtypes.
//!
//! Every minted identifier is a ULID whose 48-bit prefix is the millisecond
//! timestamp of the audit event that created it and whose 80-bit tail is
//! `(seq << 16) | index`. Identifiers are therefore lexicographically
//! time-sortable and fully determined by the audit log, which keeps replay
//! and restart byte-identical.

use std::fmt;

use serde::{Deserialize, Serialize};
use ulid::Ulid;

use crate::time::Timestamp;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                Self(value.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(value: String) -> Self {
                Self(value)
            }
        }
    };
}

string_id!(
    /// A digital citizen.
    CitizenId
);
string_id!(
    /// One memory record. 128-bit, millisecond-prefixed, sortable.
    RecordId
);
string_id!(RuleId);
string_id!(TicketId);
string_id!(
    /// An inheritance or departure case.
    CaseId
);
string_id!(
    /// A consent grant recorded by a citizen for one record.
    ConsentId
);
string_id!(
    /// Anyone who can act on the engine: a human approver, an operator,
    /// a citizen instance, or the engine's own system principal.
    PrincipalId
);

/// Mints an identifier bound to an audit position.
pub fn mint(at: Timestamp, seq: u64, index: u16) -> String {
    let ms = at.unix_millis().max(0) as u64;
    let tail = (u128::from(seq) << 16) | u128::from(index);
    Ulid::from_parts(ms, tail).to_string()
}

/// Hands out identifiers for a single audit event.
#[derive(Debug)]
pub struct IdMinter {
    at: Timestamp,
    seq: u64,
    next: u16,
}

impl IdMinter {
    pub fn new(at: Timestamp, seq: u64) -> Self {
        Self { at, seq, next: 0 }
    }

    pub fn next_raw(&mut self) -> String {
        let id = mint(self.at, self.seq, self.next);
        self.next = self.next.wrapping_add(1);
        id
    }

    pub fn record(&mut self) -> RecordId {
        RecordId(self.next_raw())
    }

    pub fn ticket(&mut self) -> TicketId {
        TicketId(self.next_raw())
    }

    pub fn rule(&mut self) -> RuleId {
        RuleId(self.next_raw())
    }

    pub fn case(&mut self) -> CaseId {
        CaseId(self.next_raw())
    }

    pub fn consent(&mut self) -> ConsentId {
        ConsentId(self.next_raw())
    }

    pub fn citizen(&mut self) -> CitizenId {
        CitizenId(self.next_raw())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minted_ids_sort_by_time_then_seq() {
        let t0 = Timestamp::from_unix_millis(1_000);
        let t1 = Timestamp::from_unix_millis(2_000);
        let a = mint(t0, 5, 0);
        let b = mint(t0, 6, 0);
        let c = mint(t1, 0, 0);
        assert!(a < b && b < c);
        assert_eq!(a.len(), 26);
    }

    #[test]
    fn minter_is_deterministic() {
        let t = Timestamp::from_unix_millis(42);
        let mut m1 = IdMinter::new(t, 9);
        let mut m2 = IdMinter::new(t, 9);
        assert_eq!(m1.record(), m2.record());
        assert_ne!(m1.record(), RecordId(mint(t, 9, 0)));
    }
}
