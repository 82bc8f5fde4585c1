use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("basis error: {0}")]
    Basis(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("vanishing denominator {value:e} for {what}")]
    Degeneracy { what: String, value: f64 },

    #[error("{stage} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { stage: String, iterations: usize, residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("export error: {0}")]
    Export(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    /// Wrap the error with the name of the pipeline stage that produced it.
    pub fn at_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage { stage: stage.into(), source: Box::new(self) }
    }

    /// The innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_convergence(&self) -> bool {
        matches!(self.root(), Error::Convergence { .. })
    }
}
