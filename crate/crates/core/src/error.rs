use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("node {node} has degree zero; the normalized Laplacian is undefined")]
    DegenerateDegree { node: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("missing input: {0}")]
    MissingInput(&'static str),

    #[error("expected exactly one same-sign eigenvector, found {0}")]
    AmbiguousDegreeEigenvector(usize),

    #[error("templates are not realizable under the shift constraints")]
    InfeasibleTemplates,

    #[error("recovered shift is identically zero")]
    AllZeroRecovery,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("unknown recovery mode `{0}`")]
    UnknownMode(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
