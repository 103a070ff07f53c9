//! Operation predicates: conjunctions over (op kind, tier, category glob,
//! citizen glob). No negation, so two predicates overlap exactly when every
//! dimension pairwise intersects.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::descriptor::{OpKind, OperationDescriptor};
use super::GovernanceError;
use crate::ledger::StorageTier;

/// `*`, a literal, or a literal prefix followed by a single trailing `*`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Glob {
    Any,
    Exact(String),
    Prefix(String),
}

impl Glob {
    pub fn parse(pattern: &str) -> Result<Self, GovernanceError> {
        if pattern == "*" {
            return Ok(Self::Any);
        }
        if pattern.is_empty() {
            return Err(GovernanceError::MalformedScope("empty pattern".into()));
        }
        match pattern.find('*') {
            None => Ok(Self::Exact(pattern.to_owned())),
            Some(i) if i == pattern.len() - 1 => Ok(Self::Prefix(pattern[..i].to_owned())),
            Some(_) => Err(GovernanceError::MalformedScope(format!(
                "'*' may only appear at the end of {pattern:?}"
            ))),
        }
    }

    pub fn matches(&self, s: &str) -> bool {
        match self {
            Self::Any => true,
            Self::Exact(e) => e == s,
            Self::Prefix(p) => s.starts_with(p.as_str()),
        }
    }

    pub fn intersects(&self, other: &Glob) -> bool {
        match (self, other) {
            (Self::Any, _) | (_, Self::Any) => true,
            (Self::Exact(a), Self::Exact(b)) => a == b,
            (Self::Exact(a), Self::Prefix(p)) | (Self::Prefix(p), Self::Exact(a)) => {
                a.starts_with(p.as_str())
            }
            (Self::Prefix(a), Self::Prefix(b)) => a.starts_with(b.as_str()) || b.starts_with(a.as_str()),
        }
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(self, Self::Any)
    }
}

impl fmt::Display for Glob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Any => f.write_str("*"),
            Self::Exact(e) => f.write_str(e),
            Self::Prefix(p) => write!(f, "{p}*"),
        }
    }
}

impl Serialize for Glob {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Glob {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Glob::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Default for Glob {
    fn default() -> Self {
        Self::Any
    }
}

/// Either `*` or one concrete value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Selector<T> {
    #[default]
    Any,
    Is(T),
}

impl<T: PartialEq + Copy> Selector<T> {
    pub fn matches(&self, v: Option<T>) -> bool {
        match self {
            Self::Any => true,
            Self::Is(x) => v == Some(*x),
        }
    }

    pub fn intersects(&self, other: &Selector<T>) -> bool {
        match (self, other) {
            (Self::Is(a), Self::Is(b)) => a == b,
            _ => true,
        }
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(self, Self::Any)
    }
}

impl<T: fmt::Display> Serialize for Selector<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Any => serializer.serialize_str("*"),
            Self::Is(v) => serializer.collect_str(v),
        }
    }
}

impl<'de, T> Deserialize<'de> for Selector<T>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == "*" {
            Ok(Self::Any)
        } else {
            s.parse().map(Self::Is).map_err(serde::de::Error::custom)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OperationPredicate {
    #[serde(default)]
    pub op_kind: Selector<OpKind>,
    #[serde(default)]
    pub tier: Selector<StorageTier>,
    #[serde(default)]
    pub category: Glob,
    #[serde(default)]
    pub citizen: Glob,
}

impl OperationPredicate {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn op(mut self, kind: OpKind) -> Self {
        self.op_kind = Selector::Is(kind);
        self
    }

    pub fn tier(mut self, tier: StorageTier) -> Self {
        self.tier = Selector::Is(tier);
        self
    }

    pub fn category(mut self, pattern: &str) -> Result<Self, GovernanceError> {
        self.category = Glob::parse(pattern)?;
        Ok(self)
    }

    pub fn citizen(mut self, pattern: &str) -> Result<Self, GovernanceError> {
        self.citizen = Glob::parse(pattern)?;
        Ok(self)
    }

    pub fn matches(&self, op: &OperationDescriptor) -> bool {
        self.op_kind.matches(Some(op.op_kind))
            && self.tier.matches(op.tier)
            && self.category.matches(&op.category)
            && self.citizen.matches(op.citizen_id.as_str())
    }

    pub fn overlaps(&self, other: &OperationPredicate) -> bool {
        self.op_kind.intersects(&other.op_kind)
            && self.tier.intersects(&other.tier)
            && self.category.intersects(&other.category)
            && self.citizen.intersects(&other.citizen)
    }

    pub fn wildcard_count(&self) -> u8 {
        [
            self.op_kind.is_wildcard(),
            self.tier.is_wildcard(),
            self.category.is_wildcard(),
            self.citizen.is_wildcard(),
        ]
        .into_iter()
        .filter(|w| *w)
        .count() as u8
    }
}
