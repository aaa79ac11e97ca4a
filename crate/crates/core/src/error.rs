use std::path::PathBuf;

use thiserror::Error;

use crate::oracle::MilpSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis of size {size} exceeds the configured limit {limit}")]
    CapacityExceeded { size: u128, limit: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    #[error("simplex breakdown: pivot magnitudes repeatedly below {threshold:e}")]
    NumericBreakdown { threshold: f64 },

    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),

    #[error("linear program is {0}")]
    LpStatus(&'static str),

    #[error("the kept row set is empty")]
    EmptyKeepSet,

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("node budget of {budget} exhausted after {nodes} nodes")]
    BudgetExceeded {
        budget: u64,
        nodes: u64,
        incumbent: Option<Box<MilpSolution>>,
        lower_bound: f64,
    },

    #[error("inverse mapping undefined: v_hat = {0:e} is not safely positive")]
    DivisionHazard(f64),

    #[error("cutting-plane loop hit the limit of {limit} cuts (residual {residual:e})")]
    CutLimit { limit: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("no usable rows in {0}")]
    NoUsableRows(PathBuf),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Solver,
    Data,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidInstance(_) | Error::Precondition(_) => {
                ErrorKind::Usage
            }
            Error::CapacityExceeded { .. }
            | Error::MalformedLp(_)
            | Error::NumericBreakdown { .. }
            | Error::IterationLimit(_)
            | Error::LpStatus(_)
            | Error::EmptyKeepSet
            | Error::BudgetExceeded { .. }
            | Error::DivisionHazard(_)
            | Error::CutLimit { .. } => ErrorKind::Solver,
            Error::DimensionMismatch { .. }
            | Error::InvalidDataset(_)
            | Error::MissingColumn(_)
            | Error::NoUsableRows(_)
            | Error::DegenerateSplit(_)
            | Error::ModelFormat(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Data,
        }
    }
}
