//! Rule registration.

use super::{Engine, Outcome, Role};
use crate::error::{Error, Result};
use crate::event::{EventBody, PendingOp};
use crate::governance::{
    GovernanceLayer, GovernanceRule, Glob, OpAttributes, OpKind, OperationDescriptor, RuleDraft,
};
use crate::ids::{CitizenId, PrincipalId};

impl Engine {
    /// Registers a rule. Adaptation and Implementation rules take effect at
    /// once; Contract and Constitution rules open a ticket.
    ///
    /// A rule that contradicts an active higher-layer rule is stored as
    /// Void and the call returns [`Error::VoidOnRegistration`].
    pub fn register_rule(&mut self, draft: &RuleDraft, principal: &PrincipalId) -> Result<Outcome<GovernanceRule>> {
        let role = self.role(principal)?;
        let scope_citizen = match &draft.scope.citizen {
            Glob::Exact(c) => Some(CitizenId::new(c.clone())),
            _ => None,
        };
        if matches!(draft.layer, GovernanceLayer::Adaptation | GovernanceLayer::Implementation) {
            let allowed = match &role {
                Role::System | Role::Approver(_) => true,
                Role::Instance { citizen, current } => *current && scope_citizen.as_ref() == Some(citizen),
                Role::Known => false,
            };
            if !allowed {
                return Err(Error::NotAuthorized(format!(
                    "{principal} may only add rules scoped to its own citizen"
                )));
            }
        }
        let at = self.next_at();
        let probe = GovernanceRule::from_draft("probe".into(), draft.clone(), principal.clone(), at);
        self.state.rules.check_supersedes(&probe)?;

        let payload = PendingOp::RuleChange { draft: draft.clone(), layer: draft.layer };
        let citizen = scope_citizen.unwrap_or_else(|| CitizenId::new("*"));
        let op = OperationDescriptor::new(OpKind::RuleChange, citizen, None, "", principal.clone(), &payload)
            .with_attrs(OpAttributes { rule_layer: Some(draft.layer), ..OpAttributes::default() });
        let risk = self.screen(&op)?;
        match self.run_or_submit(op, risk, payload)? {
            Ok(EventBody::RuleRegistered { rule, .. }) if rule.is_active() => Ok(Outcome::Done(rule)),
            Ok(EventBody::RuleRegistered { rule, .. }) => Err(Error::VoidOnRegistration {
                upper_rule_id: rule.voided_by.clone().unwrap_or_else(|| rule.rule_id.clone()),
                rule_id: rule.rule_id,
            }),
            Ok(other) => Err(Error::Invalid(format!("unexpected event {}", other.kind()))),
            Err(t) => Ok(Outcome::Gated(t)),
        }
    }
}
