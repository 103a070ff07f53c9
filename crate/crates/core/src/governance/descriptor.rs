use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GovernanceLayer;
use crate::canonical::{digest_of, Digest};
use crate::ids::{CitizenId, PrincipalId};
use crate::ledger::{StorageTier, TrustKind, TrustLevel};

/// Every kind of governed operation. There is no "update" or "mutate":
/// in-place modification cannot even be described.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Append,
    Correct,
    Forget,
    Decay,
    Distill,
    Destroy,
    RuleChange,
    OwnershipTransfer,
    Fork,
    Merge,
    Departure,
    Inheritance,
    Revive,
}

impl OpKind {
    pub const ALL: [OpKind; 13] = [
        Self::Append,
        Self::Correct,
        Self::Forget,
        Self::Decay,
        Self::Distill,
        Self::Destroy,
        Self::RuleChange,
        Self::OwnershipTransfer,
        Self::Fork,
        Self::Merge,
        Self::Departure,
        Self::Inheritance,
        Self::Revive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Append => "append",
            Self::Correct => "correct",
            Self::Forget => "forget",
            Self::Decay => "decay",
            Self::Distill => "distill",
            Self::Destroy => "destroy",
            Self::RuleChange => "rule_change",
            Self::OwnershipTransfer => "ownership_transfer",
            Self::Fork => "fork",
            Self::Merge => "merge",
            Self::Departure => "departure",
            Self::Inheritance => "inheritance",
            Self::Revive => "revive",
        }
    }

    /// Operations that put or move content in a tier.
    pub fn writes_content(self) -> bool {
        matches!(
            self,
            Self::Append | Self::Correct | Self::Forget | Self::Distill | Self::Revive
        )
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown operation kind {s:?}"))
    }
}

/// Scrutiny level, from automatic execution to full due process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskTier {
    /// Auto-approve.
    R0,
    /// Execute and log.
    R1,
    /// One approver.
    R2,
    /// Two distinct approvers.
    R3,
    /// Two distinct high-privilege approvers plus a cooling-off period.
    R4,
}

impl RiskTier {
    pub const ALL: [RiskTier; 5] = [Self::R0, Self::R1, Self::R2, Self::R3, Self::R4];

    /// Distinct approvals needed before a ticket is Approved.
    pub fn quorum(self) -> usize {
        match self {
            Self::R0 | Self::R1 => 0,
            Self::R2 => 1,
            Self::R3 | Self::R4 => 2,
        }
    }

    pub fn requires_gate(self) -> bool {
        self > Self::R1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::R0 => "R0",
            Self::R1 => "R1",
            Self::R2 => "R2",
            Self::R3 => "R3",
            Self::R4 => "R4",
        }
    }
}

impl fmt::Display for RiskTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown risk tier {s:?}"))
    }
}

/// Facts about the operation that red lines inspect.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpAttributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trust: Option<TrustKind>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub uncertainty_tagged: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub citizen_consent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_layer: Option<GovernanceLayer>,
}

impl OpAttributes {
    pub fn with_trust(trust: &TrustLevel) -> Self {
        Self {
            trust: Some(trust.level),
            uncertainty_tagged: trust.has_uncertainty_tag(),
            ..Self::default()
        }
    }
}

/// What is being asked for, by whom, bound to one exact payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationDescriptor {
    pub op_kind: OpKind,
    pub citizen_id: CitizenId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<StorageTier>,
    pub category: String,
    pub requested_by: PrincipalId,
    pub payload_digest: Digest,
    #[serde(default)]
    pub attrs: OpAttributes,
}

impl OperationDescriptor {
    /// Builds a descriptor whose digest is the hash of `payload`'s canonical
    /// serialization.
    pub fn new<P: Serialize>(
        op_kind: OpKind,
        citizen_id: CitizenId,
        tier: Option<StorageTier>,
        category: impl Into<String>,
        requested_by: PrincipalId,
        payload: &P,
    ) -> Self {
        Self {
            op_kind,
            citizen_id,
            tier,
            category: category.into(),
            requested_by,
            payload_digest: digest_of(payload).expect("payload serializes"),
            attrs: OpAttributes::default(),
        }
    }

    pub fn with_attrs(mut self, attrs: OpAttributes) -> Self {
        self.attrs = attrs;
        self
    }
}

/// The built-in risk matrix, before any `RequireTier` rule raises it.
pub fn baseline_risk(op: &OperationDescriptor) -> RiskTier {
    let base = match op.op_kind {
        OpKind::Append | OpKind::Correct | OpKind::Forget | OpKind::Decay => RiskTier::R0,
        OpKind::Distill | OpKind::Revive => RiskTier::R2,
        OpKind::Destroy | OpKind::Departure => RiskTier::R4,
        OpKind::RuleChange => match op.attrs.rule_layer {
            Some(GovernanceLayer::Constitution) => RiskTier::R4,
            Some(GovernanceLayer::Contract) => RiskTier::R2,
            _ => RiskTier::R1,
        },
        OpKind::OwnershipTransfer | OpKind::Fork => RiskTier::R2,
        OpKind::Merge => RiskTier::R3,
        OpKind::Inheritance => RiskTier::R1,
    };
    if !op.op_kind.writes_content() {
        return base;
    }
    match op.tier {
        Some(StorageTier::T0) => RiskTier::R4,
        Some(StorageTier::T1) => base.max(RiskTier::R2),
        _ => base,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(kind: OpKind, tier: Option<StorageTier>) -> OperationDescriptor {
        OperationDescriptor::new(kind, "c".into(), tier, "daily", "p".into(), &())
    }

    #[test]
    fn risk_matrix_rows() {
        use OpKind::*;
        use StorageTier::*;
        for t in [T2, T3] {
            for k in [Append, Correct, Forget] {
                assert_eq!(baseline_risk(&desc(k, Some(t))), RiskTier::R0, "{k} {t}");
            }
        }
        for k in [Append, Correct, Forget, Distill] {
            assert_eq!(baseline_risk(&desc(k, Some(T1))), RiskTier::R2);
            assert_eq!(baseline_risk(&desc(k, Some(T0))), RiskTier::R4);
        }
        assert_eq!(baseline_risk(&desc(Distill, Some(T1))), RiskTier::R2);
        assert_eq!(baseline_risk(&desc(Destroy, Some(T2))), RiskTier::R4);
        assert_eq!(baseline_risk(&desc(Departure, None)), RiskTier::R4);
        assert_eq!(baseline_risk(&desc(OwnershipTransfer, Some(T2))), RiskTier::R2);
        assert_eq!(baseline_risk(&desc(Fork, None)), RiskTier::R2);
        assert_eq!(baseline_risk(&desc(Merge, None)), RiskTier::R3);
        let mut rc = desc(RuleChange, None);
        for (layer, r) in [
            (GovernanceLayer::Constitution, RiskTier::R4),
            (GovernanceLayer::Contract, RiskTier::R2),
            (GovernanceLayer::Adaptation, RiskTier::R1),
            (GovernanceLayer::Implementation, RiskTier::R1),
        ] {
            rc.attrs.rule_layer = Some(layer);
            assert_eq!(baseline_risk(&rc), r);
        }
    }

    #[test]
    fn payload_digest_binds_payload() {
        let a = OperationDescriptor::new(OpKind::Destroy, "c".into(), None, "", "p".into(), &"r1");
        let b = OperationDescriptor::new(OpKind::Destroy, "c".into(), None, "", "p".into(), &"r2");
        assert_ne!(a.payload_digest, b.payload_digest);
    }

    #[test]
    fn quorum_by_tier() {
        assert_eq!(RiskTier::R2.quorum(), 1);
        assert_eq!(RiskTier::R3.quorum(), 2);
        assert_eq!(RiskTier::R4.quorum(), 2);
        assert!(!RiskTier::R1.requires_gate());
        assert!(RiskTier::R2.requires_gate());
    }
}
