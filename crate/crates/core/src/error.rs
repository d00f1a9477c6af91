// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("qubit count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("radial collapse at iteration {iter}: |r| = {norm:e}")]
    RadialCollapse { iter: usize, norm: f64 },

    #[error("dense path infeasible for {n} qubits (limit {limit})")]
    DenseInfeasible { n: usize, limit: usize },

    #[error("ambiguous eigenvalue assignment between {0:?}")]
    AmbiguousAssignment(Vec<f64>),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
