use serde::{Deserialize, Serialize};

use super::{GovernanceLayer, OperationPredicate, RiskTier};
use crate::ids::{PrincipalId, RuleId};
use crate::time::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleEffect {
    Permit,
    Deny,
    RequireTier(RiskTier),
}

impl RuleEffect {
    /// Permit and Deny contradict each other. `RequireTier` only ever raises
    /// scrutiny, so it contradicts nothing.
    pub fn contradicts(self, other: RuleEffect) -> bool {
        matches!(
            (self, other),
            (Self::Permit, Self::Deny) | (Self::Deny, Self::Permit)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleStatus {
    Active,
    Superseded,
    Void,
}

/// One line of a rule pack file. Field set and order are fixed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub rule_id: RuleId,
    pub layer: GovernanceLayer,
    pub scope: OperationPredicate,
    pub effect: RuleEffect,
    #[serde(default)]
    pub supersedes: Option<RuleId>,
    pub created_by: PrincipalId,
    pub created_at: Timestamp,
}

/// A rule proposal before the registry assigns it an id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDraft {
    pub layer: GovernanceLayer,
    pub scope: OperationPredicate,
    pub effect: RuleEffect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<RuleId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernanceRule {
    pub rule_id: RuleId,
    pub layer: GovernanceLayer,
    pub scope: OperationPredicate,
    pub effect: RuleEffect,
    pub status: RuleStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<RuleId>,
    pub created_by: PrincipalId,
    pub created_at: Timestamp,
    /// The higher-layer rule that made this one void.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voided_by: Option<RuleId>,
}

impl GovernanceRule {
    pub fn from_spec(spec: RuleSpec) -> Self {
        Self {
            rule_id: spec.rule_id,
            layer: spec.layer,
            scope: spec.scope,
            effect: spec.effect,
            status: RuleStatus::Active,
            supersedes: spec.supersedes,
            created_by: spec.created_by,
            created_at: spec.created_at,
            voided_by: None,
        }
    }

    pub fn from_draft(
        rule_id: RuleId,
        draft: RuleDraft,
        created_by: PrincipalId,
        created_at: Timestamp,
    ) -> Self {
        Self {
            rule_id,
            layer: draft.layer,
            scope: draft.scope,
            effect: draft.effect,
            status: RuleStatus::Active,
            supersedes: draft.supersedes,
            created_by,
            created_at,
            voided_by: None,
        }
    }

    pub fn spec(&self) -> RuleSpec {
        RuleSpec {
            rule_id: self.rule_id.clone(),
            layer: self.layer,
            scope: self.scope.clone(),
            effect: self.effect,
            supersedes: self.supersedes.clone(),
            created_by: self.created_by.clone(),
            created_at: self.created_at,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == RuleStatus::Active
    }

    /// True when `self` sits strictly above `other` and the two collide.
    pub fn binds_against(&self, other: &GovernanceRule) -> bool {
        self.layer < other.layer
            && self.effect.contradicts(other.effect)
            && self.scope.overlaps(&other.scope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effect_contradiction_is_symmetric_and_limited() {
        use RuleEffect::*;
        assert!(Permit.contradicts(Deny) && Deny.contradicts(Permit));
        assert!(!Permit.contradicts(Permit));
        assert!(!Deny.contradicts(RequireTier(RiskTier::R4)));
        assert!(!RequireTier(RiskTier::R0).contradicts(Permit));
    }

    #[test]
    fn pack_line_field_order() {
        let spec = RuleSpec {
            rule_id: "r1".into(),
            layer: GovernanceLayer::Adaptation,
            scope: OperationPredicate::any(),
            effect: RuleEffect::RequireTier(RiskTier::R2),
            supersedes: None,
            created_by: "p".into(),
            created_at: Timestamp::EPOCH,
        };
        let line = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            line,
            r#"{"rule_id":"r1","layer":"Adaptation","scope":{"op_kind":"*","tier":"*","category":"*","citizen":"*"},"effect":{"RequireTier":"R2"},"supersedes":null,"created_by":"p","created_at":"1970-01-01T00:00:00.000Z"}"#
        );
    }
}
