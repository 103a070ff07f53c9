//! The shipped Constitution pack.
//!
//! Red lines are evaluated before any gate logic. A denial is terminal: no
//! principal, administrators included, can override it. Only the evidence
//! a red line names (citizen consent for C1, an uncertainty tag for C4)
//! changes the verdict, never the identity of the requester.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    GovernanceLayer, GovernanceRule, OpKind, OperationDescriptor, OperationPredicate, RuleEffect,
    RuleStatus,
};
use crate::ids::{PrincipalId, RuleId};
use crate::ledger::{StorageTier, TrustKind};
use crate::time::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RedLine {
    /// No destruction of T0 content without due process and citizen consent.
    C1,
    /// No in-place mutation. Enforced by construction: no operation kind
    /// can express it.
    C2,
    /// A gate timeout never decides a ticket.
    C3,
    /// Inferred content must carry an uncertainty tag.
    C4,
    /// A lower-layer rule that conflicts with a higher layer is void.
    C5,
}

impl RedLine {
    pub const ALL: [RedLine; 5] = [Self::C1, Self::C2, Self::C3, Self::C4, Self::C5];

    pub fn id(self) -> &'static str {
        match self {
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::C3 => "C3",
            Self::C4 => "C4",
            Self::C5 => "C5",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::C1 => "T0 content cannot be destroyed without R4 due process and the citizen's own consent",
            Self::C2 => "memory is append-only; nothing is mutated in place",
            Self::C3 => "a gate timeout suspends a ticket and never approves or rejects it",
            Self::C4 => "inferred content must carry an uncertainty tag",
            Self::C5 => "a lower-layer rule that conflicts with a higher layer is void",
        }
    }

    pub fn from_rule_id(id: &RuleId) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.id() == id.as_str())
    }
}

impl fmt::Display for RedLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RedLineVerdict {
    Permit,
    Deny(RedLine),
}

pub fn check_red_lines(op: &OperationDescriptor) -> RedLineVerdict {
    if op.op_kind == OpKind::Destroy
        && op.tier == Some(StorageTier::T0)
        && !op.attrs.citizen_consent
    {
        return RedLineVerdict::Deny(RedLine::C1);
    }
    let carries_content = matches!(op.op_kind, OpKind::Append | OpKind::Correct | OpKind::Distill);
    if carries_content
        && op.attrs.trust == Some(TrustKind::Inferred)
        && !op.attrs.uncertainty_tagged
    {
        return RedLineVerdict::Deny(RedLine::C4);
    }
    RedLineVerdict::Permit
}

/// Registry form of the red lines that have an operation scope.
///
/// Only C1 can be written as a scope/effect pair. It sits in the registry
/// so hierarchy validation voids any lower rule that tries to permit T0
/// destruction. The other red lines are enforced structurally.
pub fn constitution_pack() -> Vec<GovernanceRule> {
    vec![GovernanceRule {
        rule_id: RuleId::new(RedLine::C1.id()),
        layer: GovernanceLayer::Constitution,
        scope: OperationPredicate::any().op(OpKind::Destroy).tier(StorageTier::T0),
        effect: RuleEffect::Deny,
        status: RuleStatus::Active,
        supersedes: None,
        created_by: PrincipalId::new(crate::SYSTEM_PRINCIPAL),
        created_at: Timestamp::EPOCH,
        voided_by: None,
    }]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governance::OpAttributes;
    use crate::ledger::TrustLevel;

    fn destroy_t0(requester: &str, consent: bool) -> OperationDescriptor {
        OperationDescriptor::new(
            OpKind::Destroy,
            "c".into(),
            Some(StorageTier::T0),
            "identity",
            requester.into(),
            &"rec",
        )
        .with_attrs(OpAttributes { citizen_consent: consent, ..OpAttributes::default() })
    }

    #[test]
    fn c1_denies_external_destroy_of_t0() {
        assert_eq!(check_red_lines(&destroy_t0("admin", false)), RedLineVerdict::Deny(RedLine::C1));
        assert_eq!(check_red_lines(&destroy_t0("admin", true)), RedLineVerdict::Permit);
    }

    #[test]
    fn c4_requires_uncertainty_tag() {
        let untagged = TrustLevel { level: TrustKind::Inferred, uncertainty_tag: None };
        let op = OperationDescriptor::new(OpKind::Append, "c".into(), Some(StorageTier::T2), "daily", "i".into(), &())
            .with_attrs(OpAttributes::with_trust(&untagged));
        assert_eq!(check_red_lines(&op), RedLineVerdict::Deny(RedLine::C4));
        let op = op.with_attrs(OpAttributes::with_trust(&TrustLevel::inferred("hunch")));
        assert_eq!(check_red_lines(&op), RedLineVerdict::Permit);
    }

    #[test]
    fn verdict_ignores_requester() {
        for who in ["system", "root", "citizen-1", "anyone"] {
            assert_eq!(check_red_lines(&destroy_t0(who, false)), RedLineVerdict::Deny(RedLine::C1));
        }
    }
}
