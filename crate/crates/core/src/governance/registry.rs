use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::red_line::{constitution_pack, RedLine};
use super::{
    baseline_risk, GovernanceError, GovernanceLayer, GovernanceRule, OperationDescriptor,
    OperationPredicate, RiskTier, RuleEffect, RuleStatus,
};
use crate::ids::RuleId;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub lower_rule_id: RuleId,
    pub upper_rule_id: RuleId,
    pub reason: String,
}

fn violation(upper: &GovernanceRule, lower: &GovernanceRule) -> Violation {
    Violation {
        lower_rule_id: lower.rule_id.clone(),
        upper_rule_id: upper.rule_id.clone(),
        reason: format!(
            "{:?} rule {} ({:?}) contradicts {:?} rule {} ({:?}) on an overlapping scope",
            lower.layer, lower.rule_id, lower.effect, upper.layer, upper.rule_id, upper.effect
        ),
    }
}

fn sort_violations(out: &mut [(GovernanceLayer, Violation)]) {
    out.sort_by(|(la, a), (lb, b)| {
        la.cmp(lb)
            .then_with(|| a.lower_rule_id.cmp(&b.lower_rule_id))
            .then_with(|| a.upper_rule_id.cmp(&b.upper_rule_id))
    });
}

/// Every (upper, lower) pair of Active rules where the lower rule
/// contradicts the upper one on an overlapping scope.
///
/// Ordered by upper layer, then lower rule id.
pub fn validate_hierarchy<'a, I>(rules: I) -> Vec<Violation>
where
    I: IntoIterator<Item = &'a GovernanceRule>,
{
    let active: Vec<&GovernanceRule> = rules.into_iter().filter(|r| r.is_active()).collect();
    let mut out = Vec::new();
    for upper in &active {
        for lower in &active {
            if upper.binds_against(lower) {
                out.push((upper.layer, violation(upper, lower)));
            }
        }
    }
    sort_violations(&mut out);
    out.into_iter().map(|(_, v)| v).collect()
}

/// Which step of the precedence order decided a conflict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rationale {
    Layer,
    Specificity,
    Recency,
    RuleId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Winner {
    pub rule_id: RuleId,
    pub rationale_code: Rationale,
}

/// Total precedence order: higher layer, then more specific scope, then
/// newer, then smaller id. `Ordering::Greater` means `a` wins.
fn precedence(a: &GovernanceRule, b: &GovernanceRule) -> (Ordering, Rationale) {
    let layer = b.layer.cmp(&a.layer);
    if layer != Ordering::Equal {
        return (layer, Rationale::Layer);
    }
    let spec = b.scope.wildcard_count().cmp(&a.scope.wildcard_count());
    if spec != Ordering::Equal {
        return (spec, Rationale::Specificity);
    }
    let recency = a.created_at.cmp(&b.created_at);
    if recency != Ordering::Equal {
        return (recency, Rationale::Recency);
    }
    (b.rule_id.cmp(&a.rule_id), Rationale::RuleId)
}

/// Decides which of two overlapping rules takes precedence.
pub fn adjudicate(a: &GovernanceRule, b: &GovernanceRule) -> Result<Winner, GovernanceError> {
    if !a.scope.overlaps(&b.scope) {
        return Err(GovernanceError::NotInConflict(a.rule_id.clone(), b.rule_id.clone()));
    }
    let (ord, rationale_code) = precedence(a, b);
    let rule_id = if ord == Ordering::Less { b.rule_id.clone() } else { a.rule_id.clone() };
    Ok(Winner { rule_id, rationale_code })
}

/// Highest of the baseline matrix and every matching `RequireTier` rule.
pub fn classify_risk<'a, I>(op: &OperationDescriptor, rules: I) -> RiskTier
where
    I: IntoIterator<Item = &'a GovernanceRule>,
{
    rules
        .into_iter()
        .filter(|r| r.is_active() && r.scope.matches(op))
        .filter_map(|r| match r.effect {
            RuleEffect::RequireTier(t) => Some(t),
            _ => None,
        })
        .fold(baseline_risk(op), RiskTier::max)
}

/// The Deny rule that governs `op`, if the precedence winner among matching
/// Permit/Deny rules is a Deny.
///
/// Registry entries for red lines are skipped: red lines are enforced by
/// [`check_red_lines`](super::check_red_lines) with their evidence
/// exemptions.
pub fn evaluate_rules<'a, I>(op: &OperationDescriptor, rules: I) -> Option<&'a GovernanceRule>
where
    I: IntoIterator<Item = &'a GovernanceRule>,
{
    rules
        .into_iter()
        .filter(|r| r.is_active() && r.scope.matches(op))
        .filter(|r| matches!(r.effect, RuleEffect::Permit | RuleEffect::Deny))
        .filter(|r| RedLine::from_rule_id(&r.rule_id).is_none())
        .max_by(|a, b| precedence(a, b).0)
        .filter(|r| r.effect == RuleEffect::Deny)
}

/// The rule registry. Rules are never edited; changes append successors and
/// flip statuses through audited events.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleRegistry {
    rules: BTreeMap<RuleId, GovernanceRule>,
}

impl Default for RuleRegistry {
    fn default() -> Self {
        Self::shipped()
    }
}

impl RuleRegistry {
    pub fn empty() -> Self {
        Self { rules: BTreeMap::new() }
    }

    /// A registry preloaded with the Constitution red-line pack.
    pub fn shipped() -> Self {
        let mut reg = Self::empty();
        for r in constitution_pack() {
            reg.rules.insert(r.rule_id.clone(), r);
        }
        reg
    }

    pub fn get(&self, id: &RuleId) -> Option<&GovernanceRule> {
        self.rules.get(id)
    }

    pub fn all(&self) -> impl Iterator<Item = &GovernanceRule> {
        self.rules.values()
    }

    pub fn active(&self) -> impl Iterator<Item = &GovernanceRule> {
        self.rules.values().filter(|r| r.is_active())
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Active higher-layer rules that `candidate` would contradict, in
    /// citation order (highest authority first).
    pub fn upper_conflicts(&self, candidate: &GovernanceRule) -> Vec<Violation> {
        let mut out: Vec<(GovernanceLayer, Violation)> = self
            .active()
            .filter(|u| u.rule_id != candidate.rule_id && u.binds_against(candidate))
            .map(|u| (u.layer, violation(u, candidate)))
            .collect();
        sort_violations(&mut out);
        out.into_iter().map(|(_, v)| v).collect()
    }

    /// Active lower-layer rules that `candidate` would make void.
    pub fn lower_conflicts(&self, candidate: &GovernanceRule) -> Vec<Violation> {
        let mut out: Vec<Violation> = self
            .active()
            .filter(|l| l.rule_id != candidate.rule_id && candidate.binds_against(l))
            .map(|l| violation(candidate, l))
            .collect();
        out.sort();
        out
    }

    /// Checks a successor link before registration.
    pub fn check_supersedes(&self, candidate: &GovernanceRule) -> Result<(), GovernanceError> {
        let Some(target) = &candidate.supersedes else { return Ok(()) };
        match self.rules.get(target) {
            None => Err(GovernanceError::UnknownRule(target.clone())),
            Some(t) if t.layer != candidate.layer => Err(GovernanceError::MalformedScope(format!(
                "successor of {target} must stay in the {:?} layer",
                t.layer
            ))),
            Some(t) if !t.is_active() => Err(GovernanceError::RuleNotActive(target.clone())),
            Some(_) if RedLine::from_rule_id(target).is_some() => {
                Err(GovernanceError::RedLineImmutable(target.clone()))
            }
            Some(_) => Ok(()),
        }
    }

    /// Stores a rule outcome decided elsewhere: the rule itself (Active or
    /// Void), the lower rules it voids, and the rule it supersedes.
    pub fn record(&mut self, rule: GovernanceRule, voided: &[Violation]) {
        if rule.is_active() {
            if let Some(old) = rule.supersedes.as_ref().and_then(|id| self.rules.get_mut(id)) {
                old.status = RuleStatus::Superseded;
            }
        }
        for v in voided {
            if let Some(l) = self.rules.get_mut(&v.lower_rule_id) {
                l.status = RuleStatus::Void;
                l.voided_by = Some(v.upper_rule_id.clone());
            }
        }
        self.rules.insert(rule.rule_id.clone(), rule);
    }

    /// Decides the status of `candidate` against the current registry.
    /// Returns the rule as it should be stored plus the lower rules it
    /// voids.
    pub fn resolve(&self, mut candidate: GovernanceRule) -> (GovernanceRule, Vec<Violation>) {
        let uppers = self.upper_conflicts(&candidate);
        if let Some(first) = uppers.first() {
            candidate.status = RuleStatus::Void;
            candidate.voided_by = Some(first.upper_rule_id.clone());
            return (candidate, Vec::new());
        }
        candidate.status = RuleStatus::Active;
        candidate.voided_by = None;
        let lowers = self.lower_conflicts(&candidate);
        (candidate, lowers)
    }

    /// Scope used when checking whether `pattern` names exactly one citizen.
    pub fn is_self_scoped(scope: &OperationPredicate, citizen: &str) -> bool {
        matches!(&scope.citizen, super::Glob::Exact(c) if c == citizen)
    }
}
