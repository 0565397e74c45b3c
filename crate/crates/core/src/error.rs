use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },

    #[error("graph is empty: {0}")]
    EmptyGraph(String),

    #[error("node {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("cascade never reached {target} infected nodes after {attempts} attempts (best: {best_infected})")]
    RetriesExhausted {
        target: usize,
        attempts: usize,
        best_infected: usize,
        best: Box<crate::cascade::Cascade>,
    },

    #[error("matrix is not symmetric: |m[{row}][{col}] - m[{col}][{row}]| = {asymmetry:e}")]
    NotSymmetric {
        row: usize,
        col: usize,
        asymmetry: f64,
    },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("graph hash mismatch: file was built for {found}, configured graph is {expected}")]
    GraphHashMismatch { expected: String, found: String },

    #[error("training diverged at epoch {epoch}, snapshot {snapshot}: loss = {loss}")]
    Diverged {
        epoch: usize,
        snapshot: usize,
        loss: f64,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Io { .. } => 4,
            Error::Diverged { .. }
            | Error::NoConvergence { .. }
            | Error::RetriesExhausted { .. } => 3,
            _ => 2,
        }
    }
}
