use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used for exit codes and HTTP status mapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Budget,
    Internal,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("symmetry or value belongs to a different color universe")]
    UniverseMismatch,
    #[error("initial marking is not symmetric: {0}")]
    NonSymmetricInitialMarking(String),
    #[error("ill-typed arc: {0}")]
    IllTypedArc(String),
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("transition {0} is not enabled")]
    NotEnabled(String),
    #[error("guard of {0} is false in this mode")]
    GuardFalse(String),
    #[error("decision set has no top symbol")]
    NoTop,
    #[error("decision set still contains a top symbol")]
    TopPresent,
    #[error("transition {0} is not enabled in the decision set")]
    NotEnabledInDs(String),
    #[error("net is not safe: {0}")]
    UnsafeNet(String),
    #[error("more than one environment token: {0}")]
    MultipleEnvironmentTokens(String),
    #[error("unknown dynamic subclass {0}")]
    UnknownSubclass(String),
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("representation is not minimal")]
    NotMinimal,
    #[error("bound exceeded: {0}")]
    BoundExceeded(String),
    #[error("game is not total: node {0} has no successor")]
    NonTotalGame(usize),
    #[error("flow relation is cyclic")]
    CyclicFlow,
    #[error("synthesis limit exceeded: {0}")]
    LimitExceeded(String),
    #[error("the initial node is not winning")]
    NotWinning,
    #[error("assignment mismatch during strategy generation: {0}")]
    AssignmentMismatch(String),
    #[error("generated strategy failed validation: {0}")]
    InvalidStrategy(String),
    #[error("model anomaly: {0}")]
    Anomaly(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::BoundExceeded(_) | Error::LimitExceeded(_) => ErrorClass::Budget,
            Error::AssignmentMismatch(_) | Error::NonTotalGame(_) | Error::InvalidStrategy(_) => ErrorClass::Internal,
            _ => ErrorClass::Input,
        }
    }
}
