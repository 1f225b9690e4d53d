use thiserror::Error;

use crate::domain::{DagDefect, LossViolation};

/// Convergence diagnostics attached to a [`Error::SolverFailure`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverDiagnostics {
    pub solver: &'static str,
    pub iterations: usize,
    pub residual: f64,
    pub tolerance: f64,
}

impl std::fmt::Display for SolverDiagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} stopped after {} iterations with residual {:.3e} (tolerance {:.1e})",
            self.solver, self.iterations, self.residual, self.tolerance
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("enumerating {what} would exceed the cap of {cap} vertices")]
    CapExceeded { what: String, cap: usize },

    #[error("solver failure: {0}")]
    SolverFailure(SolverDiagnostics),

    #[error("point outside the regularizer domain: {0}")]
    Domain(String),

    #[error("infeasible loss vector: {0}")]
    Validation(LossViolation),

    #[error("no shattered index set of size {k}")]
    NotFound { k: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("vertex {vertex} carries flow {mass:.3e}; cannot condition on it")]
    DegenerateVertex { vertex: usize, mass: f64 },

    #[error("round {t} outside ledger range 1..={len}")]
    Range { t: usize, len: usize },

    #[error("invalid DAG: {}", format_defects(.0))]
    InvalidDag(Vec<DagDefect>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("trial {trial}, round {round}, learner {learner}: {source}")]
    Context {
        trial: usize,
        round: usize,
        learner: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_defects(defects: &[DagDefect]) -> String {
    defects
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
