//! Compositions `W_n(t) = exp(A_1 t/n) ... exp(A_n t/n)` of i.i.d. random
//! semigroups: paths on a time grid, Chernoff iterates, the bracket expansion
//! of `W_n`, closed-form variance bounds and the Monte Carlo LLN engine.

mod bounds;
mod chernoff;
mod monte_carlo;
mod oracle;
mod path;

use thiserror::Error;

use crate::ensembles::EnsembleError;
use crate::lp_core::LinalgError;

pub use bounds::{variance_bound_binomial, variance_bound_f};
pub use chernoff::{chernoff_convergence, chernoff_iterate, CheckStatus, ChernoffReport, ChernoffRow, ConditionCheck};
pub use monte_carlo::{mc_lln_experiment, DeviationNorm, DeviationReport, LlnRun};
pub use oracle::{
    bracket_positions, composition_w_n, delta_term, f_term, variance_w_n_oracle, variance_w_n_pair,
    ORACLE_TOLERANCE,
};
pub use path::{composition_apply, deviation_sup, uniform_grid, PathLabel, SemigroupPath};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlnError {
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("time grids differ")]
    GridMismatch,
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("variance oracle mismatch (max entry difference {max_diff:e})\nenumeration: {enumeration}\nbracket sum: {bracket_sum}")]
    OracleMismatch {
        max_diff: f64,
        enumeration: String,
        bracket_sum: String,
    },
    #[error("every trial was aborted: {0}")]
    AllTrialsAborted(String),
}
