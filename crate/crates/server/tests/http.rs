mod common;

use std::io::{BufRead, BufReader};
use std::sync::Arc;

use cma_core::engine::{AppendRequest, BirthRequest, DecisionRequest, DestroyRequest};
use cma_core::ledger::TrustKind;
use cma_core::{PrincipalId, StorageTier, TrustLevel, Verdict};
use common::*;
use serde_json::{json, Value};

fn server() -> (TestServer, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let s = TestServer::start(config(dir.path()), Arc::new(clock())).unwrap();
    (s, dir)
}

fn birth_ada(s: &TestServer) -> Value {
    let mut req = BirthRequest::named("ada", "ada keeps the archive");
    req.instance_id = Some(PrincipalId::new("ada-1"));
    req.shared_knowledge = vec!["the archive opens at nine".into()];
    let r = s.client("system").post("/citizens", &req);
    assert_eq!(r.status, 201, "{}", r.text);
    r.json()
}

fn append(tier: StorageTier, category: &str, text: &str, trust: TrustLevel) -> AppendRequest {
    AppendRequest { tier, category: category.into(), content: text.into(), tags: Default::default(), trust }
}

#[test]
fn birth_returns_201_with_the_citizen() {
    let (s, _d) = server();
    let c = birth_ada(&s);
    assert_eq!(c["name"], "ada");
    assert_eq!(c["current_instance"], "ada-1");
    let id = c["citizen_id"].as_str().unwrap();
    let shown = s.client("operator").get(&format!("/citizens/{id}"));
    assert_eq!(shown.status, 200);
    assert_eq!(shown.json(), c);
    assert_eq!(s.client("operator").get("/citizens").json().as_array().unwrap().len(), 1);
}

#[test]
fn inferred_content_without_a_tag_is_423_c4() {
    let (s, _d) = server();
    let c = birth_ada(&s);
    let id = c["citizen_id"].as_str().unwrap();
    let untagged = TrustLevel { level: TrustKind::Inferred, uncertainty_tag: None };
    let r = s.client("ada-1").post(&format!("/citizens/{id}/memories"), &append(StorageTier::T2, "daily", "it may rain", untagged));
    assert_eq!(r.status, 423, "{}", r.text);
    assert_eq!(r.json()["red_line_id"], "C4");
    assert_eq!(r.code(), "RedLineDenied");

    let tagged = TrustLevel::inferred("guess from clouds");
    let r = s.client("ada-1").post(&format!("/citizens/{id}/memories"), &append(StorageTier::T2, "daily", "it may rain", tagged));
    assert_eq!(r.status, 201, "{}", r.text);
    assert!(r.json()["done"]["record_id"].is_string());
}

#[test]
fn decision_without_rationale_is_400_empty_rationale() {
    let (s, _d) = server();
    let c = birth_ada(&s);
    let id = c["citizen_id"].as_str().unwrap();
    let r = s.client("ada-1").post(
        &format!("/citizens/{id}/memories"),
        &append(StorageTier::T0, "identity", "I answer to Ada", TrustLevel::firsthand()),
    );
    assert_eq!(r.status, 202, "{}", r.text);
    let ticket = r.json()["gated"].clone();
    assert_eq!(ticket["risk"], "R4");
    let tid = ticket["ticket_id"].as_str().unwrap();

    let r = s.client("root").post(&format!("/gate/tickets/{tid}/decision"), &json!({"verdict": "Approve"}));
    assert_eq!(r.status, 400);
    assert_eq!(r.code(), "EmptyRationale");
    let r = s.client("root").post(&format!("/gate/tickets/{tid}/decision"), &json!({"verdict": "Approve", "rationale": " "}));
    assert_eq!(r.code(), "EmptyRationale");

    let pending = s.client("operator").get("/gate/tickets?risk=R4&state=Pending");
    assert_eq!(pending.json().as_array().unwrap().len(), 1);
    assert_eq!(s.client("operator").get("/gate/tickets?risk=R2").text, "[]");
}

#[test]
fn status_codes_follow_error_classes() {
    let (s, _d) = server();
    let c = birth_ada(&s);
    let id = c["citizen_id"].as_str().unwrap();
    let body = append(StorageTier::T2, "daily", "hello", TrustLevel::firsthand());

    let r = Client::new(&s.url, "nope").get("/citizens");
    assert_eq!((r.status, r.code().as_str()), (401, "UnknownPrincipal"));
    let r = s.client("operator").post(&format!("/citizens/{id}/memories"), &body);
    assert_eq!((r.status, r.code().as_str()), (403, "NotPrimaryWriter"));
    let r = s.client("ada-1").post("/citizens/nobody/memories", &body);
    assert_eq!((r.status, r.code().as_str()), (404, "UnknownCitizen"));
    let r = s.client("root").get("/gate/tickets/missing");
    assert_eq!(r.status, 404);
    let r = s.client("ada-1").post(&format!("/citizens/{id}/memories"), &json!({"tier": "T9"}));
    assert_eq!((r.status, r.code().as_str()), (400, "InvalidRequest"));

    let rec = s.client("ada-1").post(&format!("/citizens/{id}/memories"), &body).json()["done"].clone();
    let rid = rec["record_id"].as_str().unwrap();
    let r = s.client("ada-1").post_empty(&format!("/memories/{rid}/unforget"));
    assert_eq!((r.status, r.code().as_str()), (409, "RecordNotForgotten"));
}

#[test]
fn destroy_without_an_approved_ticket_is_refused() {
    let (s, _d) = server();
    let c = birth_ada(&s);
    let id = c["citizen_id"].as_str().unwrap();
    let rec = s
        .client("ada-1")
        .post(&format!("/citizens/{id}/memories"), &append(StorageTier::T2, "daily", "a", TrustLevel::firsthand()))
        .json()["done"]
        .clone();
    let rid = rec["record_id"].as_str().unwrap();

    let opened = s.client("ada-1").post(&format!("/memories/{rid}/destroy"), &DestroyRequest::default());
    assert_eq!(opened.status, 202, "{}", opened.text);
    let tid = opened.json()["gated"]["ticket_id"].as_str().unwrap().to_string();
    let early = DestroyRequest { ticket_id: Some(cma_core::TicketId::new(tid.clone())), consent_id: None };
    let r = s.client("ada-1").post(&format!("/memories/{rid}/destroy"), &early);
    assert_eq!((r.status, r.code().as_str()), (403, "TicketNotApproved"));

    let reject = DecisionRequest { verdict: Verdict::Reject, rationale: "keep it".into() };
    let t = s.client("root").post(&format!("/gate/tickets/{tid}/decision"), &reject);
    assert_eq!(t.json()["state"], "Rejected");
    let rec = s.client("ada-1").get(&format!("/memories/{rid}")).json();
    assert_eq!(rec["status"], "Active");
}

#[test]
fn rules_and_audit_endpoints() {
    let (s, _d) = server();
    birth_ada(&s);
    let rules = s.client("operator").get("/rules").json();
    assert!(rules.as_array().unwrap().iter().any(|r| r["rule_id"] == "C1"));

    let v = s.client("operator").get("/audit/verify");
    assert_eq!(v.json(), json!({"result": "Ok", "events": 1}));
    let export = s.client("operator").get("/audit/export?anchored=true");
    assert_eq!(export.status, 200);
    assert_eq!(cma_core::audit::verify_export(export.text.as_bytes()), cma_core::ChainVerdict::Ok { events: 1 });
    let r = s.client("operator").get("/audit/verify?from=5");
    assert_eq!((r.status, r.code().as_str()), (400, "RangeOutOfBounds"));

    let before = s.client("operator").get("/audit/replay?at=2025-12-31T00:00:00Z").json();
    assert!(before["citizens"].as_object().unwrap().is_empty());
    let after = s.client("operator").get("/audit/replay?at=2026-01-01T00:00:00.000Z").json();
    assert_eq!(after["citizens"].as_object().unwrap().len(), 1);
}

#[test]
fn events_stream_ticket_alerts() {
    let (s, _d) = server();
    let c = birth_ada(&s);
    let id = c["citizen_id"].as_str().unwrap().to_string();

    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let r = agent.get(format!("{}/events?token=t-operator", s.url)).call().unwrap();
    assert_eq!(r.status().as_u16(), 200);
    let mut lines = BufReader::new(r.into_body().into_reader()).lines();

    let gated = s.client("ada-1").post(
        &format!("/citizens/{id}/memories"),
        &append(StorageTier::T0, "identity", "I answer to Ada", TrustLevel::firsthand()),
    );
    assert_eq!(gated.status, 202);

    let mut event = None;
    let mut data = None;
    for line in lines.by_ref() {
        let line = line.unwrap();
        if let Some(e) = line.strip_prefix("event: ") {
            event = Some(e.to_string());
        } else if let Some(d) = line.strip_prefix("data: ") {
            data = Some(serde_json::from_str::<Value>(d).unwrap());
            break;
        }
    }
    assert_eq!(event.as_deref(), Some("ticket_submitted"));
    let data = data.unwrap();
    assert_eq!(data["risk"], "R4");
    assert_eq!(data["ticket_id"], gated.json()["gated"]["ticket_id"]);

    let r = agent.get(format!("{}/events", s.url)).call().unwrap();
    assert_eq!(r.status().as_u16(), 401);
}
