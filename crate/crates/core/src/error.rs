use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The latency budget leaves no room for the requested mini-slot window.
    #[error("infeasible latency: {requested} mini-slots requested, {available} available (budget {budget}, waited {waited})")]
    InfeasibleLatency {
        requested: usize,
        available: usize,
        budget: usize,
        waited: usize,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Every shared resource is interference-free, so the interference-limited
    /// approximation has no reference level.
    #[error("interference-limited power is undefined: no resource carries eMBB interference")]
    UndefinedInterferenceLimited,

    #[error("distance {distance_m} m is inside the reference distance {reference_m} m")]
    OutOfModel { distance_m: f64, reference_m: f64 },

    #[error("no grid power meets outage {epsilon:e} at interference row {row}; extend the table axis")]
    TableExhausted { epsilon: f64, row: String },

    #[error("interference {0} is not covered by the table axis")]
    NotCovered(String),

    #[error("table does not match the request: {0}")]
    TableMismatch(String),

    #[error("malformed table file: {0}")]
    TableFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
