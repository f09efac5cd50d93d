use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// State and spectrum recorded when the augmented acceleration/multiplier
/// matrix cannot be inverted.
#[derive(Debug, Clone, PartialEq)]
pub struct Degeneracy {
    pub t: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub min_singular_value: f64,
    pub max_singular_value: f64,
    /// Right singular vector of the smallest singular value, over the
    /// stacked unknowns `(qddot, lambda)`.
    pub weakest_direction: Vec<f64>,
    /// Runge-Kutta stage (1-based) that hit the failure, if known.
    pub stage: Option<usize>,
    /// Cauchy-grid nodes implicated by the weakest direction, if the system
    /// came from a semidiscretized field theory.
    pub nodes: Vec<usize>,
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "degenerate KKT system at t={:e}: smallest singular value {:e} (largest {:e}), q={:?}, qdot={:?}",
            self.t, self.min_singular_value, self.max_singular_value, self.q, self.qdot
        )?;
        if let Some(stage) = self.stage {
            write!(f, ", RK stage {stage}")?;
        }
        if !self.nodes.is_empty() {
            write!(f, ", nodes {:?}", self.nodes)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid construction: {0}")]
    Construction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite {quantity} at probe {probe}")]
    NonFinite { quantity: &'static str, probe: String },

    #[error("{0}")]
    DegenerateSystem(Box<Degeneracy>),

    #[error(
        "constraints are not independent at t={t:e}: rank {rank} < {count} (smallest singular value {min_singular_value:e})"
    )]
    DependentConstraints {
        t: f64,
        rank: usize,
        count: usize,
        min_singular_value: f64,
    },

    #[error("velocity projection failed after {iterations} iterations (residual {residual:e})")]
    ProjectionFailed { iterations: usize, residual: f64 },

    #[error("constraint drift {residual:e} exceeds ceiling {ceiling:e} at t={t:e}")]
    DriftExceeded { t: f64, residual: f64, ceiling: f64 },

    #[error("state violates the constraints by {residual:e} (allowed {allowed:e})")]
    InconsistentState { residual: f64, allowed: f64 },

    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// True for the failures a caller should treat as solver degeneracy
    /// rather than bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSystem(_)
                | Error::DependentConstraints { .. }
                | Error::ProjectionFailed { .. }
                | Error::DriftExceeded { .. }
                | Error::NonFinite { .. }
        )
    }
}
