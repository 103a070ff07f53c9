//! The governance kernel: a four-layer rule registry with void-on-conflict
//! semantics, precedence adjudication, risk classification and red lines.

mod descriptor;
mod red_line;
mod registry;
mod rule;
mod scope;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use descriptor::{baseline_risk, OpAttributes, OpKind, OperationDescriptor, RiskTier};
pub use red_line::{check_red_lines, constitution_pack, RedLine, RedLineVerdict};
pub use registry::{
    adjudicate, classify_risk, evaluate_rules, validate_hierarchy, Rationale, RuleRegistry,
    Violation, Winner,
};
pub use rule::{GovernanceRule, RuleDraft, RuleEffect, RuleSpec, RuleStatus};
pub use scope::{Glob, OperationPredicate, Selector};

use crate::ids::RuleId;

/// Lower ordinal means higher authority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GovernanceLayer {
    Constitution = 0,
    Contract = 1,
    Adaptation = 2,
    Implementation = 3,
}

impl GovernanceLayer {
    pub const ALL: [GovernanceLayer; 4] = [
        Self::Constitution,
        Self::Contract,
        Self::Adaptation,
        Self::Implementation,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for GovernanceLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for GovernanceLayer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown layer {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GovernanceError {
    #[error("malformed scope: {0}")]
    MalformedScope(String),
    #[error("rules {0} and {1} have disjoint scopes")]
    NotInConflict(RuleId, RuleId),
    #[error("unknown rule {0}")]
    UnknownRule(RuleId),
    #[error("rule {0} is not active")]
    RuleNotActive(RuleId),
    #[error("red line {0} cannot be superseded")]
    RedLineImmutable(RuleId),
    #[error("rule pack line {line}: {message}")]
    PackParse { line: usize, message: String },
}

/// Parses a JSON Lines rule pack. Blank lines are skipped.
pub fn parse_pack(text: &str) -> Result<Vec<RuleSpec>, GovernanceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<RuleSpec>(l).map_err(|e| GovernanceError::PackParse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_pack<'a>(rules: impl IntoIterator<Item = &'a GovernanceRule>) -> String {
    let mut out = String::new();
    for r in rules {
        out.push_str(&serde_json::to_string(&r.spec()).expect("rule spec serializes"));
        out.push('\n');
    }
    out
}
