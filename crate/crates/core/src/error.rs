use std::fmt;

use crate::pde::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("nearest-point projection did not converge after {iterations} iterations (last parameter {last_iterate:e})")]
    Projection { iterations: usize, last_iterate: f64 },

    #[error("non-smooth boundary point at {point:?}")]
    NonSmooth { point: Vec<f64> },

    #[error("point at infinity: the north pole has no preimage")]
    PointAtInfinity,

    #[error("Newton iteration diverged in {solver}: residual history {history:?}")]
    Divergence { solver: &'static str, history: Vec<f64> },

    #[error("Newton iteration stalled after {} iterations at residual {:e}", .0.iterations, .0.residual_inf)]
    Stall(Box<SolveReport>),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("fit window too small: {available} nodes, need at least {required}")]
    FitWindow { available: usize, required: usize },

    #[error("{0}")]
    Config(Diagnostics),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single configuration problem, located by key path or by line/column.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, d) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", d.location, d.message)?;
        }
        Ok(())
    }
}
