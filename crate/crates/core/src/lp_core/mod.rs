//! Finite-truncation l_p linear algebra: vectors, dense and banded operators,
//! norms, adjoints and exponentials.

mod error;
mod expm;
mod json;
mod matrix;
mod norms;
mod operator;
mod scalar;
mod vector;

pub use error::LinalgError;
pub use expm::{matexp, matexp_apply, taylor_degree, EXP_ARGUMENT_CAP};
pub use json::{operator_from_json, operator_to_json, OperatorDocument};
pub use matrix::{prefers_banded, Mat, Storage};
pub use norms::{
    opnorm_estimate, opnorm_l1_exact, opnorm_upper_bound, spectral_norm, EstimateKind, NormEstimate,
    POWER_ITERATION_CAP,
};
pub use operator::TruncOperator;
pub use scalar::{Field, Scalar};
pub use vector::{conjugate_exponent, lp_norm, lp_norm_slice, TruncVector};

/// Default truncation dimension.
pub const DEFAULT_DIM: usize = 256;

/// Default exponential tolerance.
pub const DEFAULT_EXPM_TOL: f64 = 1e-12;
