//! Backward-Euler (Rothe) time stepping for Stokes flow with a friction-slip
//! boundary, and the piecewise interpolants of the resulting trajectory.
//!
//! The divergence constraint is kept as a per-step pressure multiplier, so
//! every step is a saddle-point problem; the nonsmooth boundary term is
//! handled by an operator splitting on the nodal tangential slip.

mod fields;
mod step;
mod trajectory;

pub use fields::{Field, FieldContext, FieldSpec, Manufactured, SourceTerm, FIELD_NAMES};
pub use step::{step_objective, StepOptions, StepSolution, StepSolver, StepStats};
pub use trajectory::{
    average_source, build_interpolants, project_initial, project_initial_load, run, run_from, Interpolants,
    RotheTrajectory,
};

use thiserror::Error;

use crate::friction::FrictionError;
use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum RotheError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("unknown field `{0}` (expected one of: {})", FIELD_NAMES.join(", "))]
    UnknownField(String),
    #[error("field `{name}` takes {expected} parameter(s), got {found}")]
    FieldParameters { name: String, expected: usize, found: usize },
    #[error("source term is not finite at t = {t}")]
    NonFiniteSource { t: f64 },
    #[error(
        "k = {k} violates the per-step convexity condition (need k < {k_max:e}; \
         the spectral form is k < lambda_tau/alpha_psi); halve k"
    )]
    StepCondition { k: f64, k_max: f64 },
    #[error("per-step solver stopped after {iterations} iterations with residual {residual:e}; try halving k")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("step {step} failed ({} steps completed): {source}", partial.steps_done())]
    StepFailed {
        step: usize,
        #[source]
        source: Box<RotheError>,
        partial: Box<RotheTrajectory>,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Friction(#[from] FrictionError),
}

/// Uniform grid `t_n = n k` on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub n: usize,
    pub k: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, n: usize) -> Result<Self, RotheError> {
        if n == 0 {
            return Err(RotheError::InvalidGrid("N must be at least 1".into()));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(RotheError::InvalidGrid(format!("T = {t_final} must be positive and finite")));
        }
        Ok(Self { t_final, n, k: t_final / n as f64 })
    }

    /// Node `t_n`; the last node is exactly `T`.
    pub fn t(&self, n: usize) -> f64 {
        if n >= self.n {
            self.t_final
        } else {
            n as f64 * self.k
        }
    }

    /// Same horizon with twice as many steps.
    pub fn refined(&self) -> Self {
        Self { t_final: self.t_final, n: 2 * self.n, k: self.t_final / (2 * self.n) as f64 }
    }

    /// Index `n ≥ 1` of the step interval `(t_{n−1}, t_n]` containing `t`;
    /// `[0, t_1]` belongs to step 1.
    pub fn interval(&self, t: f64) -> usize {
        let n = (t / self.k).ceil();
        (n.max(1.0) as usize).min(self.n)
    }
}
