use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Pareto parameters: {0}")]
    InvalidPareto(String),

    #[error("invalid spectral efficiency {eta} at ue {ue}, k {k}, t {t} (allowed range (0, {eta_max}])")]
    InvalidEta { ue: usize, k: usize, t: usize, eta: f64, eta_max: f64 },

    #[error("spectral efficiency must be positive, got {0}")]
    NonPositiveEta(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("missing trace cell ue {ue}, k {k}, t {t}")]
    MissingCell { ue: usize, k: usize, t: usize },

    #[error("positive budget {budget} offered to an empty UE set")]
    EmptyPool { budget: f64 },

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("recovered multiplier {name} = {value} is negative beyond tolerance")]
    DualInfeasible { name: String, value: f64 },

    #[error("invalid model parameter: {0}")]
    InvalidModel(String),

    #[error("assignment is missing variable {0}")]
    MissingVariable(String),

    #[error("LP parse error at line {line}: {msg}")]
    LpParse { line: usize, msg: String },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { path: path.into(), msg: msg.into() }
    }
}
