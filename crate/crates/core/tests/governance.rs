mod common;

use cma_core::governance::{OpKind, OperationPredicate, RuleEffect, RuleStatus};
use cma_core::*;
use common::*;
use proptest::prelude::*;

fn draft(layer: GovernanceLayer, scope: OperationPredicate, effect: RuleEffect) -> RuleDraft {
    RuleDraft { layer, scope, effect, supersedes: None }
}

#[test]
fn shipped_registry_holds_the_t0_red_line() {
    let (e, _) = engine();
    let rules = e.rules();
    assert_eq!(rules.len(), 1);
    assert_eq!(rules[0].rule_id.as_str(), "C1");
    assert_eq!(rules[0].layer, GovernanceLayer::Constitution);
}

#[test]
fn contract_rule_raises_risk() {
    let (mut e, _) = engine();
    let c = birth(&mut e, "ada");
    let scope = OperationPredicate::any().op(OpKind::Append).category("medical*").unwrap();
    let t = e
        .register_rule(&draft(GovernanceLayer::Contract, scope, RuleEffect::RequireTier(RiskTier::R3)), &p("root"))
        .unwrap()
        .ticket()
        .unwrap();
    assert_eq!(t.risk, RiskTier::R2);
    let done = approve(&mut e, &t, &["carol"]);
    assert_eq!(done.state, TicketState::Approved);
    assert_eq!(e.rules().len(), 2);
    let gated = note(&mut e, &c, "medical-notes", StorageTier::T2, "headache").ticket().unwrap();
    assert_eq!(gated.risk, RiskTier::R3);
    assert!(note(&mut e, &c, "daily", StorageTier::T2, "fine").done().is_some());
}

#[test]
fn self_scoped_adaptation_rule_applies_directly() {
    let (mut e, _) = engine();
    let c = birth(&mut e, "ada");
    let scope = OperationPredicate::any().op(OpKind::Forget).citizen(c.citizen_id.as_str()).unwrap();
    let rule = e
        .register_rule(&draft(GovernanceLayer::Adaptation, scope.clone(), RuleEffect::Deny), &p("ada-1"))
        .unwrap()
        .done()
        .unwrap();
    assert_eq!(rule.status, RuleStatus::Active);
    let r = daily(&mut e, &c, "keep me");
    assert_eq!(e.forget(&r.record_id, &p("ada-1")).unwrap_err().code(), "NotAuthorized");
    let wide = OperationPredicate::any().op(OpKind::Forget);
    assert_eq!(
        e.register_rule(&draft(GovernanceLayer::Adaptation, wide, RuleEffect::Deny), &p("ada-1")).unwrap_err().code(),
        "NotAuthorized"
    );
}

#[test]
fn rule_contradicting_a_higher_layer_is_void_on_arrival() {
    let (mut e, _) = engine();
    let scope = OperationPredicate::any().op(OpKind::Destroy).tier(StorageTier::T0);
    let n = e.events().len();
    let err = e
        .register_rule(&draft(GovernanceLayer::Adaptation, scope, RuleEffect::Permit), &p("root"))
        .unwrap_err();
    match err {
        Error::VoidOnRegistration { upper_rule_id, .. } => assert_eq!(upper_rule_id.as_str(), "C1"),
        other => panic!("{other:?}"),
    }
    assert_eq!(e.events().len(), n + 1);
    let void: Vec<_> = e.rules().into_iter().filter(|r| r.status == RuleStatus::Void).collect();
    assert_eq!(void.len(), 1);
    assert_eq!(void[0].voided_by.as_ref().map(|r| r.as_str()), Some("C1"));
}

#[test]
fn constitution_changes_need_r4_authorities() {
    let (mut e, clock) = engine();
    let scope = OperationPredicate::any().op(OpKind::Fork);
    let t = e
        .register_rule(&draft(GovernanceLayer::Constitution, scope, RuleEffect::Deny), &p("root"))
        .unwrap()
        .ticket()
        .unwrap();
    assert_eq!(t.risk, RiskTier::R4);
    let bob = DecisionRequest { verdict: Verdict::Approve, rationale: "yes".into() };
    assert!(e.decide(&t.ticket_id, &bob, &p("bob")).is_err());
    approve(&mut e, &t, &["root", "alice"]);
    advance(&clock, WEEK);
    e.execute_ticket(&t.ticket_id, &p("root")).unwrap();
    assert_eq!(e.rules().len(), 2);
}

#[test]
fn red_lines_cannot_be_superseded() {
    let (mut e, _) = engine();
    let d = RuleDraft {
        layer: GovernanceLayer::Constitution,
        scope: OperationPredicate::any().op(OpKind::Destroy).tier(StorageTier::T0),
        effect: RuleEffect::Permit,
        supersedes: Some(RuleId::new("C1")),
    };
    assert!(e.register_rule(&d, &p("root")).is_err());
}

#[test]
fn timeouts_suspend_and_never_decide() {
    let (mut e, clock) = engine();
    let c = birth(&mut e, "ada");
    let t = note(&mut e, &c, "identity", StorageTier::T0, "nickname").ticket().unwrap();
    advance(&clock, std::time::Duration::from_secs(72 * 3600));
    assert!(e.sweep_timeouts().unwrap().is_empty());
    advance(&clock, std::time::Duration::from_millis(1));
    let swept = e.sweep_timeouts().unwrap();
    assert_eq!(swept.len(), 1);
    assert_eq!(swept[0].state, TicketState::Suspended);
    assert!(swept[0].decisions.is_empty());
    assert!(e.sweep_timeouts().unwrap().is_empty());
    let suspensions: Vec<_> = e.events().iter().filter(|ev| ev.kind == "tickets_suspended").collect();
    assert_eq!(suspensions.len(), 1);
    // A suspended ticket still waits for humans.
    let done = approve(&mut e, &t, &["root", "alice"]);
    assert_eq!(done.state, TicketState::Approved);
}

#[test]
fn decisions_need_rationale_and_distinct_approvers() {
    let (mut e, _) = engine();
    let c = birth(&mut e, "ada");
    let t = note(&mut e, &c, "identity", StorageTier::T0, "nickname").ticket().unwrap();
    let blank = DecisionRequest { verdict: Verdict::Approve, rationale: " ".into() };
    assert_eq!(e.decide(&t.ticket_id, &blank, &p("root")).unwrap_err().code(), "EmptyRationale");
    approve(&mut e, &t, &["root"]);
    let again = DecisionRequest { verdict: Verdict::Approve, rationale: "twice".into() };
    assert_eq!(e.decide(&t.ticket_id, &again, &p("root")).unwrap_err().code(), "DuplicateApprover");
    assert_eq!(e.decide(&t.ticket_id, &again, &p("operator")).unwrap_err().code(), "NotAuthorizedForTier");
    let no = DecisionRequest { verdict: Verdict::Reject, rationale: "no".into() };
    assert_eq!(e.decide(&t.ticket_id, &no, &p("alice")).unwrap().state, TicketState::Rejected);
    assert_eq!(e.decide(&t.ticket_id, &again, &p("alice")).unwrap_err().code(), "TicketClosed");
}

#[test]
fn ticket_queue_filters() {
    let (mut e, _) = engine();
    let c = birth(&mut e, "ada");
    note(&mut e, &c, "identity", StorageTier::T0, "a").ticket().unwrap();
    let k = e.state().ledger(&c.citizen_id).unwrap().in_order().into_iter().find(|r| r.tier == StorageTier::T1).unwrap().record_id.clone();
    e.forget(&k, &p("ada-1")).unwrap().ticket().unwrap();
    let all = e.tickets(&TicketFilter::default());
    assert_eq!(all.len(), 2);
    let r4 = e.tickets(&TicketFilter { risk: Some(RiskTier::R4), ..TicketFilter::default() });
    assert_eq!(r4.len(), 1);
}

fn arb_scope() -> impl Strategy<Value = OperationPredicate> {
    let ops = prop::option::of(prop::sample::select(vec![OpKind::Append, OpKind::Destroy, OpKind::Forget]));
    let tiers = prop::option::of(prop::sample::select(vec![StorageTier::T0, StorageTier::T2]));
    let cats = prop::sample::select(vec!["*", "daily", "d*", "medical"]);
    (ops, tiers, cats).prop_map(|(o, t, c)| {
        let mut s = OperationPredicate::any().category(c).unwrap();
        if let Some(o) = o {
            s = s.op(o);
        }
        if let Some(t) = t {
            s = s.tier(t);
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn registered_rules_never_leave_active_contradictions(
        drafts in prop::collection::vec(
            (0u8..4, arb_scope(), prop::bool::ANY),
            1..8,
        )
    ) {
        let (mut e, clock) = engine();
        for (layer, scope, permit) in drafts {
            let layer = GovernanceLayer::ALL[layer as usize];
            let effect = if permit { RuleEffect::Permit } else { RuleEffect::Deny };
            match e.register_rule(&draft(layer, scope, effect), &p("root")) {
                Ok(Outcome::Gated(t)) => {
                    approve_fully(&mut e, &t);
                    if t.risk == RiskTier::R4 {
                        advance(&clock, WEEK);
                        let _ = e.execute_ticket(&t.ticket_id, &p("root"));
                    }
                }
                Ok(Outcome::Done(_)) | Err(Error::VoidOnRegistration { .. }) => {}
                // An earlier Deny rule may cover rule changes themselves.
                Err(Error::NotAuthorized(_)) => {}
                Err(other) => prop_assert!(false, "{other:?}"),
            }
        }
        let rules = e.rules();
        prop_assert!(governance::validate_hierarchy(&rules).is_empty());
        for r in rules.iter().filter(|r| r.status == RuleStatus::Void) {
            let upper = rules.iter().find(|u| Some(&u.rule_id) == r.voided_by.as_ref()).unwrap();
            prop_assert!(upper.layer < r.layer);
            prop_assert!(upper.effect.contradicts(r.effect));
        }
    }
}
