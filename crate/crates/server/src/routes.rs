use std::collections::HashMap;
use std::convert::Infallible;

use axum::extract::{FromRequest, FromRequestParts, Query, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cma_core::engine::{
    AppendRequest, BirthRequest, ConfirmRequest, CorrectRequest, DecisionRequest, DepartureRequest,
    DestroyRequest, DistillRequest, ForkRequest, HandoverRequest, InheritanceRequest, MergeRequest,
    Outcome, TransferRequest, VerifyRequest, WeightRequest,
};
use cma_core::{
    CaseId, CitizenId, PrincipalId, RecallQuery, RecordId, RuleDraft, TicketFilter, TicketId, Timestamp,
};
use serde::{Deserialize, Serialize};
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use crate::{ApiError, AppState};

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
struct Body<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
struct Params<T>(T);

#[derive(Deserialize, FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
struct Id(String);

/// The authenticated principal. Taken from `Authorization: Bearer`; the
/// alert feed also accepts `?token=` since browsers cannot set headers on
/// an EventSource.
struct Caller(PrincipalId);

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let header = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::to_owned);
        let token = header.or_else(|| {
            (parts.uri.path() == "/events")
                .then(|| Query::<HashMap<String, String>>::try_from_uri(&parts.uri).ok())
                .flatten()
                .and_then(|q| q.0.get("token").cloned())
        });
        let token = token.ok_or_else(|| ApiError::unauthenticated("missing bearer token"))?;
        state
            .principal_for(&token)
            .map(Caller)
            .ok_or_else(|| ApiError::unauthenticated("unknown token"))
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// 201 or 200 when the operation ran, 202 when it waits on a ticket.
fn outcome<T: Serialize>(o: Outcome<T>, created: bool) -> Response {
    let status = match (&o, created) {
        (Outcome::Gated(_), _) => StatusCode::ACCEPTED,
        (Outcome::Done(_), true) => StatusCode::CREATED,
        (Outcome::Done(_), false) => StatusCode::OK,
    };
    (status, Json(o)).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/citizens", get(list_citizens).post(birth))
        .route("/citizens/{id}", get(show_citizen))
        .route("/citizens/{id}/memories", post(append))
        .route("/citizens/{id}/recall", post(recall))
        .route("/citizens/{id}/distill", post(distill))
        .route("/citizens/{id}/ownership-transfer", post(transfer))
        .route("/citizens/{id}/handover", post(handover))
        .route("/citizens/{id}/inheritance", post(begin_inheritance))
        .route("/citizens/{id}/fork", post(fork))
        .route("/citizens/{id}/merge", post(merge))
        .route("/citizens/{id}/merge-conflicts", get(merge_conflicts))
        .route("/citizens/{id}/departure", post(initiate_departure))
        .route("/memories/{id}", get(show_memory))
        .route("/memories/{id}/corrections", post(correct))
        .route("/memories/{id}/forget", post(forget))
        .route("/memories/{id}/unforget", post(unforget))
        .route("/memories/{id}/revive", post(revive))
        .route("/memories/{id}/recall-weight", post(set_weight))
        .route("/memories/{id}/consent", post(consent))
        .route("/memories/{id}/destroy", post(destroy))
        .route("/gate/tickets", get(list_tickets))
        .route("/gate/tickets/{id}", get(show_ticket))
        .route("/gate/tickets/{id}/decision", post(decide))
        .route("/gate/tickets/{id}/execute", post(execute))
        .route("/inheritance/{case}", get(show_inheritance))
        .route("/inheritance/{case}/verify", post(verify_inheritance))
        .route("/departure/{case}", get(show_departure).delete(cancel_departure))
        .route("/departure/{case}/confirm", post(confirm_departure))
        .route("/exports/{name}", get(download_export))
        .route("/audit/verify", get(audit_verify))
        .route("/audit/replay", get(audit_replay))
        .route("/audit/export", get(audit_export))
        .route("/events", get(events))
        .route("/rules", get(list_rules).post(add_rule))
        .with_state(state)
}

async fn list_citizens(State(s): State<AppState>, _c: Caller) -> ApiResult<Vec<cma_core::CitizenRecord>> {
    s.with_engine(|e| Ok(e.citizens())).await.map(Json)
}

async fn birth(State(s): State<AppState>, Caller(p): Caller, Body(req): Body<BirthRequest>) -> Result<Response, ApiError> {
    let c = s.with_engine(move |e| e.birth(&req, &p)).await?;
    Ok((StatusCode::CREATED, Json(c)).into_response())
}

async fn show_citizen(State(s): State<AppState>, _c: Caller, Id(id): Id) -> ApiResult<cma_core::CitizenRecord> {
    s.with_engine(move |e| e.citizen(&CitizenId::new(id)).cloned()).await.map(Json)
}

async fn append(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<AppendRequest>,
) -> Result<Response, ApiError> {
    let o = s.with_engine(move |e| e.append(&CitizenId::new(id), &req, &p)).await?;
    Ok(outcome(o, true))
}

async fn recall(
    State(s): State<AppState>,
    _c: Caller,
    Id(id): Id,
    Body(q): Body<RecallQuery>,
) -> ApiResult<Vec<cma_core::RecallHit>> {
    s.with_engine(move |e| e.recall(&CitizenId::new(id), &q)).await.map(Json)
}

async fn distill(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<DistillRequest>,
) -> Result<Response, ApiError> {
    let o = s.with_engine(move |e| e.distill(&CitizenId::new(id), &req, &p)).await?;
    Ok(outcome(o, true))
}

async fn transfer(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<TransferRequest>,
) -> Result<Response, ApiError> {
    let o = s.with_engine(move |e| e.transfer_ownership(&CitizenId::new(id), &req, &p)).await?;
    Ok(outcome(o, false))
}

async fn handover(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<HandoverRequest>,
) -> Result<Response, ApiError> {
    let r = s.with_engine(move |e| e.compose_handover(&CitizenId::new(id), &req.note, &p)).await?;
    Ok((StatusCode::CREATED, Json(r)).into_response())
}

async fn begin_inheritance(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<InheritanceRequest>,
) -> Result<Response, ApiError> {
    let case = s.with_engine(move |e| e.begin_inheritance(&CitizenId::new(id), &req, &p)).await?;
    Ok((StatusCode::CREATED, Json(case)).into_response())
}

async fn fork(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<ForkRequest>,
) -> Result<Response, ApiError> {
    let o = s.with_engine(move |e| e.fork(&CitizenId::new(id), &req, &p)).await?;
    Ok(outcome(o, true))
}

async fn merge(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<MergeRequest>,
) -> Result<Response, ApiError> {
    let o = s.with_engine(move |e| e.merge(&CitizenId::new(id), &req, &p)).await?;
    Ok(outcome(o, false))
}

#[derive(Deserialize)]
struct ConflictParams {
    target: CitizenId,
}

async fn merge_conflicts(
    State(s): State<AppState>,
    _c: Caller,
    Id(id): Id,
    Params(q): Params<ConflictParams>,
) -> ApiResult<Option<cma_core::lifecycle::ConflictReport>> {
    s.with_engine(move |e| e.merge_conflicts(&CitizenId::new(id), &q.target)).await.map(Json)
}

#[derive(Serialize)]
struct DepartureOpened {
    case: cma_core::DepartureCase,
    ticket: cma_core::GateTicket,
}

async fn initiate_departure(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<DepartureRequest>,
) -> Result<Response, ApiError> {
    let (case, ticket) = s.with_engine(move |e| e.initiate_departure(&CitizenId::new(id), &req, &p)).await?;
    Ok((StatusCode::ACCEPTED, Json(DepartureOpened { case, ticket })).into_response())
}

async fn show_memory(State(s): State<AppState>, Caller(p): Caller, Id(id): Id) -> ApiResult<cma_core::MemoryRecord> {
    s.with_engine(move |e| e.record(&RecordId::new(id), &p)).await.map(Json)
}

async fn correct(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<CorrectRequest>,
) -> Result<Response, ApiError> {
    let o = s.with_engine(move |e| e.correct(&RecordId::new(id), &req, &p)).await?;
    Ok(outcome(o, true))
}

async fn forget(State(s): State<AppState>, Caller(p): Caller, Id(id): Id) -> Result<Response, ApiError> {
    let o = s.with_engine(move |e| e.forget(&RecordId::new(id), &p)).await?;
    Ok(outcome(o, false))
}

async fn unforget(State(s): State<AppState>, Caller(p): Caller, Id(id): Id) -> ApiResult<cma_core::MemoryRecord> {
    s.with_engine(move |e| e.unforget(&RecordId::new(id), &p)).await.map(Json)
}

async fn revive(State(s): State<AppState>, Caller(p): Caller, Id(id): Id) -> Result<Response, ApiError> {
    let o = s.with_engine(move |e| e.revive(&RecordId::new(id), &p)).await?;
    Ok(outcome(o, false))
}

async fn set_weight(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<WeightRequest>,
) -> ApiResult<cma_core::MemoryRecord> {
    s.with_engine(move |e| e.set_recall_weight(&RecordId::new(id), req.weight, &p)).await.map(Json)
}

async fn consent(State(s): State<AppState>, Caller(p): Caller, Id(id): Id) -> Result<Response, ApiError> {
    let c = s.with_engine(move |e| e.grant_consent(&RecordId::new(id), &p)).await?;
    Ok((StatusCode::CREATED, Json(c)).into_response())
}

async fn destroy(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<DestroyRequest>,
) -> Result<Response, ApiError> {
    let o = s.with_engine(move |e| e.destroy(&RecordId::new(id), &req, &p)).await?;
    Ok(outcome(o, false))
}

async fn list_tickets(
    State(s): State<AppState>,
    _c: Caller,
    Params(f): Params<TicketFilter>,
) -> ApiResult<Vec<cma_core::GateTicket>> {
    s.with_engine(move |e| Ok(e.tickets(&f))).await.map(Json)
}

async fn show_ticket(State(s): State<AppState>, _c: Caller, Id(id): Id) -> ApiResult<cma_core::GateTicket> {
    s.with_engine(move |e| e.ticket(&TicketId::new(id)).cloned()).await.map(Json)
}

async fn decide(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<DecisionRequest>,
) -> ApiResult<cma_core::GateTicket> {
    s.with_engine(move |e| e.decide(&TicketId::new(id), &req, &p)).await.map(Json)
}

async fn execute(State(s): State<AppState>, Caller(p): Caller, Id(id): Id) -> ApiResult<cma_core::GateTicket> {
    s.with_engine(move |e| e.execute_ticket(&TicketId::new(id), &p)).await.map(Json)
}

async fn show_inheritance(State(s): State<AppState>, _c: Caller, Id(id): Id) -> ApiResult<cma_core::InheritanceCase> {
    s.with_engine(move |e| e.inheritance_case(&CaseId::new(id)).cloned()).await.map(Json)
}

async fn verify_inheritance(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<VerifyRequest>,
) -> ApiResult<cma_core::InheritanceCase> {
    s.with_engine(move |e| e.verify_inheritance(&CaseId::new(id), &req, &p)).await.map(Json)
}

async fn show_departure(State(s): State<AppState>, _c: Caller, Id(id): Id) -> ApiResult<cma_core::DepartureCase> {
    s.with_engine(move |e| e.departure_case(&CaseId::new(id)).cloned()).await.map(Json)
}

async fn cancel_departure(State(s): State<AppState>, Caller(p): Caller, Id(id): Id) -> ApiResult<cma_core::DepartureCase> {
    s.with_engine(move |e| e.cancel_departure(&CaseId::new(id), &p)).await.map(Json)
}

async fn confirm_departure(
    State(s): State<AppState>,
    Caller(p): Caller,
    Id(id): Id,
    Body(req): Body<ConfirmRequest>,
) -> ApiResult<cma_core::DepartureCase> {
    s.with_engine(move |e| e.confirm_departure(&CaseId::new(id), &req, &p)).await.map(Json)
}

async fn download_export(State(s): State<AppState>, _c: Caller, Id(name): Id) -> Result<Response, ApiError> {
    let bytes = s
        .with_engine(move |e| e.storage().read_export(&name).map_err(|err| cma_core::Error::Invalid(err.to_string())))
        .await?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownExport", "no such export"))?;
    Ok(([(CONTENT_TYPE, "application/x-tar")], bytes).into_response())
}

#[derive(Deserialize)]
struct RangeParams {
    #[serde(default)]
    from: u64,
    to: Option<u64>,
    #[serde(default)]
    anchored: bool,
}

async fn audit_verify(
    State(s): State<AppState>,
    _c: Caller,
    Params(r): Params<RangeParams>,
) -> ApiResult<cma_core::ChainVerdict> {
    s.with_engine(move |e| e.verify_chain(r.from, r.to)).await.map(Json)
}

#[derive(Deserialize)]
struct ReplayParams {
    at: Timestamp,
}

async fn audit_replay(
    State(s): State<AppState>,
    _c: Caller,
    Params(q): Params<ReplayParams>,
) -> ApiResult<cma_core::EngineState> {
    s.with_engine(move |e| e.replay_at(q.at)).await.map(Json)
}

async fn audit_export(State(s): State<AppState>, _c: Caller, Params(r): Params<RangeParams>) -> Result<Response, ApiError> {
    let bytes = s.with_engine(move |e| e.export_chain(r.from, r.to, r.anchored)).await?;
    Ok(([(CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

/// Server-sent alerts. Each event is named after the alert kind and
/// carries the alert as JSON.
async fn events(State(s): State<AppState>, _c: Caller) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let stream = BroadcastStream::new(s.subscribe()).filter_map(|msg| {
        let alert = msg.ok()?;
        let kind = serde_json::to_value(alert.kind).ok()?;
        Some(Ok(Event::default().event(kind.as_str()?).id(alert.seq.to_string()).json_data(&alert).ok()?))
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

async fn list_rules(State(s): State<AppState>, _c: Caller) -> ApiResult<Vec<cma_core::GovernanceRule>> {
    s.with_engine(|e| Ok(e.rules())).await.map(Json)
}

async fn add_rule(State(s): State<AppState>, Caller(p): Caller, Body(d): Body<RuleDraft>) -> Result<Response, ApiError> {
    let o = s.with_engine(move |e| e.register_rule(&d, &p)).await?;
    Ok(outcome(o, true))
}
