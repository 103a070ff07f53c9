//! Engine errors. Every variant has a stable `code()` used on the wire and
//! a [`ErrorClass`] the gateway maps to a status code.

use crate::gate::GateError;
use crate::governance::{GovernanceError, RedLine, RiskTier, Violation};
use crate::ids::{CaseId, CitizenId, PrincipalId, RecordId, RuleId, TicketId};
use crate::lifecycle::ConflictReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Unauthenticated,
    Forbidden,
    NotFound,
    Conflict,
    RedLine,
    Internal,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown principal {0}")]
    UnknownPrincipal(PrincipalId),
    #[error("not authorized: {0}")]
    NotAuthorized(String),
    #[error("{principal} is not the primary writer of {category:?}")]
    NotPrimaryWriter { principal: PrincipalId, category: String },
    #[error("only the citizen's own current instance may do this")]
    NotSelf,
    #[error("{0} is not the citizen's current instance")]
    NotCurrentInstance(PrincipalId),
    #[error("{approver} is not authorized for {risk} tickets")]
    NotAuthorizedForTier { approver: PrincipalId, risk: RiskTier },
    #[error("denied by red line {}: {}", .0.id(), .0.description())]
    RedLineDenied(RedLine),
    #[error("ticket {0} is not approved and executable")]
    TicketNotApproved(TicketId),

    #[error("unknown citizen {0}")]
    UnknownCitizen(CitizenId),
    #[error("record {0} not found")]
    TargetNotFound(RecordId),
    #[error("unknown ticket {0}")]
    UnknownTicket(TicketId),
    #[error("unknown case {0}")]
    UnknownCase(CaseId),
    #[error("unknown rule {0}")]
    UnknownRule(RuleId),
    #[error("citizen {citizen} has no category {category:?}")]
    NoSuchCategory { citizen: CitizenId, category: String },

    #[error("citizen {0} is not active")]
    CitizenNotActive(CitizenId),
    #[error("record {0} is destroyed")]
    TargetDestroyed(RecordId),
    #[error("record {0} is not active")]
    RecordNotActive(RecordId),
    #[error("record {0} is not forgotten")]
    RecordNotForgotten(RecordId),
    #[error("record {0} is not archived")]
    RecordNotArchived(RecordId),
    #[error("ticket {0} is closed")]
    TicketClosed(TicketId),
    #[error("{0} has already decided this ticket")]
    DuplicateApprover(PrincipalId),
    #[error("an open ticket {0} already carries this payload")]
    DuplicateTicket(TicketId),
    #[error("ticket payload does not match this operation")]
    DigestMismatch,
    #[error("cooling-off period has not elapsed")]
    CoolingOffNotElapsed,
    #[error("consent evidence from the citizen is required")]
    ConsentRequired,
    #[error("citizen {0} is already inheriting")]
    AlreadyInheriting(CitizenId),
    #[error("citizen {0} is already departing")]
    AlreadyDeparting(CitizenId),
    #[error("case {0} is closed")]
    CaseClosed(CaseId),
    #[error("parent citizen {0} is not active")]
    ParentNotActive(CitizenId),
    #[error("{branch} is not a branch of {target}")]
    NotABranchOf { branch: CitizenId, target: CitizenId },
    #[error("merge conflicts in categories {:?}", .0.categories)]
    MergeConflict(ConflictReport),
    #[error("no handover note newer than the current instance")]
    NoHandoverNote,
    #[error("name {0:?} is taken")]
    DuplicateName(String),
    #[error("principal id {0} is already in use")]
    DuplicatePrincipal(PrincipalId),
    #[error("{category:?} already belongs to {owner}")]
    SelfTransferNoop { category: String, owner: PrincipalId },
    #[error("rule {rule_id} is void: it conflicts with {upper_rule_id}")]
    VoidOnRegistration { rule_id: RuleId, upper_rule_id: RuleId },
    #[error("departure case {0} is not open")]
    DepartureNotOpen(CaseId),

    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("a decision needs a rationale")]
    EmptyRationale,
    #[error("content is {size} bytes, the limit is {max}")]
    ContentTooLarge { size: usize, max: usize },
    #[error("distillation sources: {0}")]
    MixedCitizens(String),
    #[error("source record {0} is not an active T2 record")]
    SourceNotActive(RecordId),
    #[error("handover note has no tasks, facts or questions")]
    EmptyNote,
    #[error("invalid handover note: {}", .0.join("; "))]
    InvalidNote(Vec<String>),
    #[error("unknown query id {0}")]
    UnknownQueryId(String),
    #[error("reaffirmation missing")]
    ReaffirmationMissing,
    #[error("constitution pack is inconsistent: {} violation(s)", .0.len())]
    InvalidConstitutionPack(Vec<Violation>),
    #[error("operation risk {0} does not require a gate")]
    NotGated(RiskTier),
    #[error(transparent)]
    Governance(#[from] GovernanceError),
    #[error("invalid request: {0}")]
    Invalid(String),

    #[error("audit chain corrupt at seq {seq}")]
    ChainCorrupt { seq: u64 },
    #[error("range out of bounds: {0}")]
    RangeOutOfBounds(String),
    #[error("persistence failure: {0}")]
    Persistence(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            UnknownPrincipal(_) => "UnknownPrincipal",
            NotAuthorized(_) => "NotAuthorized",
            NotPrimaryWriter { .. } => "NotPrimaryWriter",
            NotSelf => "NotSelf",
            NotCurrentInstance(_) => "NotCurrentInstance",
            NotAuthorizedForTier { .. } => "NotAuthorizedForTier",
            RedLineDenied(_) => "RedLineDenied",
            TicketNotApproved(_) => "TicketNotApproved",
            UnknownCitizen(_) => "UnknownCitizen",
            TargetNotFound(_) => "TargetNotFound",
            UnknownTicket(_) => "UnknownTicket",
            UnknownCase(_) => "UnknownCase",
            UnknownRule(_) => "UnknownRule",
            NoSuchCategory { .. } => "NoSuchCategory",
            CitizenNotActive(_) => "CitizenNotActive",
            TargetDestroyed(_) => "TargetDestroyed",
            RecordNotActive(_) => "RecordNotActive",
            RecordNotForgotten(_) => "RecordNotForgotten",
            RecordNotArchived(_) => "RecordNotArchived",
            TicketClosed(_) => "TicketClosed",
            DuplicateApprover(_) => "DuplicateApprover",
            DuplicateTicket(_) => "DuplicateTicket",
            DigestMismatch => "DigestMismatch",
            CoolingOffNotElapsed => "CoolingOffNotElapsed",
            ConsentRequired => "ConsentRequired",
            AlreadyInheriting(_) => "AlreadyInheriting",
            AlreadyDeparting(_) => "AlreadyDeparting",
            CaseClosed(_) => "CaseClosed",
            ParentNotActive(_) => "ParentNotActive",
            NotABranchOf { .. } => "NotABranchOf",
            MergeConflict(_) => "MergeConflict",
            NoHandoverNote => "NoHandoverNote",
            DuplicateName(_) => "DuplicateName",
            DuplicatePrincipal(_) => "DuplicatePrincipal",
            SelfTransferNoop { .. } => "SelfTransferNoop",
            VoidOnRegistration { .. } => "VoidOnRegistration",
            DepartureNotOpen(_) => "DepartureNotOpen",
            OutOfRange(_) => "OutOfRange",
            EmptyRationale => "EmptyRationale",
            ContentTooLarge { .. } => "ContentTooLarge",
            MixedCitizens(_) => "MixedCitizens",
            SourceNotActive(_) => "SourceNotActive",
            EmptyNote => "EmptyNote",
            InvalidNote(_) => "InvalidNote",
            UnknownQueryId(_) => "UnknownQueryId",
            ReaffirmationMissing => "ReaffirmationMissing",
            InvalidConstitutionPack(_) => "InvalidConstitutionPack",
            NotGated(_) => "NotGated",
            Governance(GovernanceError::MalformedScope(_)) => "MalformedScope",
            Governance(GovernanceError::NotInConflict(..)) => "NotInConflict",
            Governance(GovernanceError::UnknownRule(_)) => "UnknownRule",
            Governance(GovernanceError::RuleNotActive(_)) => "RuleNotActive",
            Governance(GovernanceError::RedLineImmutable(_)) => "RedLineImmutable",
            Governance(GovernanceError::PackParse { .. }) => "PackParse",
            Invalid(_) => "InvalidRequest",
            ChainCorrupt { .. } => "ChainCorrupt",
            RangeOutOfBounds(_) => "RangeOutOfBounds",
            Persistence(_) => "PersistenceFailure",
        }
    }

    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            UnknownPrincipal(_) => ErrorClass::Unauthenticated,
            NotAuthorized(_)
            | NotPrimaryWriter { .. }
            | NotSelf
            | NotCurrentInstance(_)
            | NotAuthorizedForTier { .. }
            | TicketNotApproved(_) => ErrorClass::Forbidden,
            RedLineDenied(_) => ErrorClass::RedLine,
            UnknownCitizen(_)
            | TargetNotFound(_)
            | UnknownTicket(_)
            | UnknownCase(_)
            | UnknownRule(_)
            | NoSuchCategory { .. }
            | Governance(GovernanceError::UnknownRule(_)) => ErrorClass::NotFound,
            OutOfRange(_)
            | EmptyRationale
            | ContentTooLarge { .. }
            | MixedCitizens(_)
            | EmptyNote
            | InvalidNote(_)
            | UnknownQueryId(_)
            | ReaffirmationMissing
            | InvalidConstitutionPack(_)
            | NotGated(_)
            | Invalid(_)
            | RangeOutOfBounds(_)
            | Governance(_) => ErrorClass::Validation,
            Persistence(_) => ErrorClass::Internal,
            _ => ErrorClass::Conflict,
        }
    }

    pub fn red_line(&self) -> Option<RedLine> {
        match self {
            Error::RedLineDenied(r) => Some(*r),
            _ => None,
        }
    }
}

impl From<GateError> for Error {
    fn from(e: GateError) -> Self {
        match e {
            GateError::NotGated(r) => Error::NotGated(r),
            GateError::NotAuthorizedForTier { approver, risk } => {
                Error::NotAuthorizedForTier { approver, risk }
            }
            GateError::DuplicateApprover(p) => Error::DuplicateApprover(p),
            GateError::TicketClosed(t) => Error::TicketClosed(t),
            GateError::EmptyRationale => Error::EmptyRationale,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
