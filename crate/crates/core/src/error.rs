use thiserror::Error;

use crate::estimators::{BaselineKind, MetricKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bandit config: {0}")]
    InvalidConfig(String),

    #[error("arm {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },

    #[error("time {t} out of range 1..={horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("baseline {baseline:?} cannot be coupled with metric {metric:?}")]
    NotCoupled {
        metric: MetricKind,
        baseline: BaselineKind,
    },

    #[error("self-play baseline requires an independent run on the same instance")]
    MissingSelfPlay,

    #[error(
        "training diverged at iteration {iteration}: batch regret {regret} exceeds 10x initial {initial}"
    )]
    Diverged {
        iteration: usize,
        regret: f64,
        initial: f64,
    },

    #[error("at least {required} evaluation instances are required, got {got}")]
    TooFewInstances { required: usize, got: usize },

    #[error("config line {line}, column {column}: {message}")]
    ConfigSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config: {0}")]
    ConfigSchema(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.line() == 0 {
            return Error::ConfigSchema(e.to_string());
        }
        // serde_json appends " at line L column C"; strip it so the location is not repeated.
        let msg = e.to_string();
        let message = match msg.rfind(" at line ") {
            Some(i) => msg[..i].to_string(),
            None => msg,
        };
        Error::ConfigSyntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}
