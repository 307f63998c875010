use thiserror::Error;

use crate::symbolic::{EvalError, Name};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("sort error: {0}")]
    Sort(String),
    #[error("substitution would capture variable {0}")]
    Capture(Name),
    #[error("no domain declared for {0}")]
    DomainMissing(Name),
    #[error("malformed operator: {0}")]
    MalformedOperator(String),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("operator guard is false")]
    GuardFalse,
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("unknown process {0}")]
    UnknownProcess(String),
    #[error("invalid hint: {0}")]
    HintInvalid(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid process {process}: {detail}")]
    InvalidProcess { process: String, detail: String },
    #[error("evaluation failed in transition {transition} at {valuation}: {source}")]
    Realize {
        transition: String,
        valuation: String,
        source: EvalError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
