//! Closed forms for three explicit ensembles, evaluated without matrix
//! arithmetic, next to the matrix-path values they must agree with.
//!
//! * `A = |0><xi|` and `A = xi |0><xi|` with `xi ~ Geom(1/2)`: both nilpotent,
//!   so `W_n(t) x - exp((EA) t) x` reduces to a scalar in entry 0.
//! * `A = diag(i xi k)` with `xi` uniform on `{-1, 1}`: converges weakly but
//!   not in operator norm.
//!
//! Sequences are indexed from 0 and vanish beyond the truncation.

mod runner;

use num_complex::Complex64;
use thiserror::Error;

use crate::ensembles::{DiagonalImaginary, EnsembleError, GeneratorEnsemble, RankOneGeometric, ScaledRankOneGeometric};
use crate::lp_core::{lp_norm, matexp_apply, LinalgError, TruncOperator, TruncVector};
use crate::rng::{RngStream, StreamId};
use crate::semigroup_lln::{chernoff_iterate, composition_apply, LlnError};

pub use runner::{
    run_example3, run_geometric_example, Example3Report, Example3Run, ExampleKind, ExampleReport, GeometricRun,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExampleError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible norm-gap search: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Lln(#[from] LlnError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Draws `xi_1, ..., xi_n` from `Geom(1/2)`, each at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeometricDraws {
    values: Vec<u64>,
}

impl GeometricDraws {
    /// Draw `i` comes from stream `(experiment, trial, i)`, the same stream the
    /// Monte Carlo engine uses for generator `i`.
    pub fn sample(seed: u64, experiment: u64, trial: u64, n: usize) -> Self {
        let values = (0..n as u64)
            .map(|i| RngStream::new(seed, StreamId::new(experiment, trial, i)).geometric_half())
            .collect();
        GeometricDraws { values }
    }

    pub fn forced(values: Vec<u64>) -> Result<Self, ExampleError> {
        if values.is_empty() || values.contains(&0) {
            return Err(ExampleError::InvalidArgument("geometric draws must be nonempty and >= 1".into()));
        }
        Ok(GeometricDraws { values })
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64
    }
}

/// Draws `xi_1, ..., xi_n` uniform on `{-1, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignDraws {
    values: Vec<i64>,
}

impl SignDraws {
    pub fn sample(seed: u64, experiment: u64, trial: u64, n: usize) -> Self {
        let values = (0..n as u64)
            .map(|i| RngStream::new(seed, StreamId::new(experiment, trial, i)).sign())
            .collect();
        SignDraws { values }
    }

    pub fn forced(values: Vec<i64>) -> Result<Self, ExampleError> {
        if values.is_empty() || values.iter().any(|v| v.abs() != 1) {
            return Err(ExampleError::InvalidArgument("sign draws must be nonempty and in {-1, 1}".into()));
        }
        Ok(SignDraws { values })
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> i64 {
        self.values.iter().sum()
    }
}

fn entry(x: &TruncVector, k: u64) -> Complex64 {
    if (k as usize) < x.dim() {
        x.get(k as usize)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// `E g(xi) = sum_{k >= 1} g(k) 2^{-k}` for `g` vanishing beyond the truncation.
fn geometric_expectation(dim: usize, g: impl Fn(usize) -> Complex64) -> Complex64 {
    (1..dim).map(|k| g(k) * 2f64.powi(-(k as i32))).sum()
}

/// `t |sum_i x_{xi_i} / n - E x_xi|`.
pub fn ex1_deviation(x: &TruncVector, t: f64, draws: &GeometricDraws) -> f64 {
    let n = draws.len() as f64;
    let avg: Complex64 = draws.values.iter().map(|&k| entry(x, k)).sum::<Complex64>() / n;
    let mean = geometric_expectation(x.dim(), |k| x.get(k));
    t * (avg - mean).norm()
}

/// `t |sum_i xi_i x_{xi_i} / n - E xi x_xi|`.
pub fn ex2_deviation(x: &TruncVector, t: f64, draws: &GeometricDraws) -> f64 {
    let n = draws.len() as f64;
    let avg: Complex64 = draws.values.iter().map(|&k| entry(x, k) * k as f64).sum::<Complex64>() / n;
    let mean = geometric_expectation(x.dim(), |k| x.get(k) * k as f64);
    t * (avg - mean).norm()
}

/// `var x_xi = sum x_k^2 2^{-k} - (sum x_k 2^{-k})^2` (with moduli for complex `x`).
pub fn ex1_variance(x: &TruncVector) -> f64 {
    let second = geometric_expectation(x.dim(), |k| Complex64::new(x.get(k).norm_sqr(), 0.0)).re;
    let first = geometric_expectation(x.dim(), |k| x.get(k)).norm_sqr();
    (second - first).max(0.0)
}

/// `var xi x_xi = sum k^2 x_k^2 2^{-k} - (sum k x_k 2^{-k})^2`.
pub fn ex2_variance(x: &TruncVector) -> f64 {
    let second = geometric_expectation(x.dim(), |k| Complex64::new((k * k) as f64 * x.get(k).norm_sqr(), 0.0)).re;
    let first = geometric_expectation(x.dim(), |k| x.get(k) * k as f64).norm_sqr();
    (second - first).max(0.0)
}

fn chebyshev(t_max: f64, var: f64, n: u64, eps: f64) -> Result<f64, ExampleError> {
    if !(eps > 0.0) || n == 0 {
        return Err(ExampleError::InvalidArgument(format!("epsilon = {eps}, n = {n}")));
    }
    Ok(t_max * t_max * var / (n as f64 * eps * eps))
}

/// `T^2 var x_xi / (n eps^2)`.
pub fn ex1_bound(t_max: f64, x: &TruncVector, n: u64, eps: f64) -> Result<f64, ExampleError> {
    chebyshev(t_max, ex1_variance(x), n, eps)
}

/// `T^2 var(xi x_xi) / (n eps^2)`.
pub fn ex2_bound(t_max: f64, x: &TruncVector, n: u64, eps: f64) -> Result<f64, ExampleError> {
    chebyshev(t_max, ex2_variance(x), n, eps)
}

fn matrix_deviation(
    e: &dyn GeneratorEnsemble,
    ops: Vec<TruncOperator>,
    x: &TruncVector,
    t: f64,
    tol: f64,
) -> Result<f64, ExampleError> {
    let w = composition_apply(&ops, t, x, tol)?;
    let target = matexp_apply(&e.mean_generator()?, t, x, tol)?;
    Ok(lp_norm(&w.sub(&target)?, 1.0)?)
}

fn clamp(k: u64, dim: usize) -> usize {
    (k as usize).min(dim - 1)
}

/// `||(W_n(t) - exp((EA) t)) x||_1` with `A_i = |0><xi_i|`, from matrix exponentials.
/// Draws past the truncation are clamped to `N - 1`, so this equals [`ex1_deviation`]
/// exactly when `x_{N-1} = 0`.
pub fn ex1_matrix_deviation(x: &TruncVector, t: f64, draws: &GeometricDraws, tol: f64) -> Result<f64, ExampleError> {
    let e = RankOneGeometric::new(x.dim())?;
    let ops = draws
        .values
        .iter()
        .map(|&k| e.operator_for(clamp(k, x.dim())))
        .collect::<Result<Vec<_>, _>>()?;
    matrix_deviation(&e, ops, x, t, tol)
}

/// Same with `A_i = xi_i |0><xi_i|`.
pub fn ex2_matrix_deviation(x: &TruncVector, t: f64, draws: &GeometricDraws, tol: f64) -> Result<f64, ExampleError> {
    let e = ScaledRankOneGeometric::new(x.dim())?;
    let ops = draws
        .values
        .iter()
        .map(|&k| e.operator_for(clamp(k, x.dim())))
        .collect::<Result<Vec<_>, _>>()?;
    matrix_deviation(&e, ops, x, t, tol)
}

fn check_cutoff(cutoff: usize, dims: &[usize]) -> Result<(), ExampleError> {
    if cutoff == 0 || dims.iter().any(|&d| cutoff > d) {
        return Err(ExampleError::InvalidArgument(format!("cutoff {cutoff} outside 1..={dims:?}")));
    }
    Ok(())
}

/// `|sum_{k < K} z_k x_k (e^{i t k S/n} - cos(kt/n)^n)|`, `S = sum_j xi_j`.
pub fn ex3_wot_pairing(
    z: &TruncVector,
    x: &TruncVector,
    t: f64,
    draws: &SignDraws,
    cutoff: usize,
) -> Result<f64, ExampleError> {
    check_cutoff(cutoff, &[z.dim(), x.dim()])?;
    let n = draws.len() as f64;
    let s = draws.sum() as f64;
    let total: Complex64 = (0..cutoff)
        .map(|k| {
            let kf = k as f64;
            let walk = Complex64::from_polar(1.0, t * kf * s / n);
            let iterate = (kf * t / n).cos().powi(draws.len() as i32);
            z.get(k) * x.get(k) * (walk - iterate)
        })
        .sum();
    Ok(total.norm())
}

/// `|<z, (W_n(t) - (E e^{At/n})^n) x>|` on the first `K` coordinates, from matrix paths.
pub fn ex3_matrix_pairing(
    z: &TruncVector,
    x: &TruncVector,
    t: f64,
    draws: &SignDraws,
    cutoff: usize,
    tol: f64,
) -> Result<f64, ExampleError> {
    check_cutoff(cutoff, &[z.dim(), x.dim()])?;
    let e = DiagonalImaginary::new(cutoff)?;
    let xk = TruncVector::from_complex((0..cutoff).map(|k| x.get(k)).collect());
    let ops: Vec<TruncOperator> = draws.values.iter().map(|&s| e.operator_for(s)).collect();
    let w = composition_apply(&ops, t, &xk, tol)?;
    let chernoff = chernoff_iterate(&e, t, draws.len() as u64, crate::ensembles::MeanMode::ClosedForm, tol)?;
    let d = w.sub(&chernoff.apply(&xk)?)?;
    let total: Complex64 = (0..cutoff).map(|k| z.get(k) * d.get(k)).sum();
    Ok(total.norm())
}

/// Maximum of [`ex3_wot_pairing`] over a time grid.
pub fn ex3_wot_sup(
    z: &TruncVector,
    x: &TruncVector,
    t_grid: &[f64],
    draws: &SignDraws,
    cutoff: usize,
) -> Result<f64, ExampleError> {
    let mut sup = 0.0_f64;
    for &t in t_grid {
        sup = sup.max(ex3_wot_pairing(z, x, t, draws, cutoff)?);
    }
    Ok(sup)
}

/// `2 sum_{k >= K} |z_k x_k|`, the part of the pairing dropped by the cutoff.
pub fn ex3_tail_bound(z: &TruncVector, x: &TruncVector, cutoff: usize) -> f64 {
    let dim = z.dim().min(x.dim());
    2.0 * (cutoff..dim).map(|k| (z.get(k) * x.get(k)).norm()).sum::<f64>()
}

/// `max_{t, k < K} |e^{i t k S/n} - cos(kt/n)^n|`. Fails before computing when no
/// grid pair has `|cos(kt/n)^n| < 1/2`, since the gap is then not forced.
pub fn ex3_norm_gap(t_grid: &[f64], draws: &SignDraws, cutoff: usize) -> Result<f64, ExampleError> {
    if cutoff == 0 || t_grid.is_empty() {
        return Err(ExampleError::InvalidArgument("empty grid or cutoff".into()));
    }
    let n = draws.len();
    let iterate = |k: usize, t: f64| (k as f64 * t / n as f64).cos().powi(n as i32);
    let feasible = t_grid
        .iter()
        .any(|&t| (0..cutoff).any(|k| iterate(k, t).abs() < 0.5));
    if !feasible {
        let t_max = t_grid.iter().copied().fold(0.0, f64::max);
        return Err(ExampleError::Infeasible(format!(
            "no k < {cutoff} and grid t <= {t_max} with |cos(kt/n)^n| < 1/2 at n = {n}"
        )));
    }
    let s = draws.sum() as f64;
    let mut gap = 0.0_f64;
    for &t in t_grid {
        for k in 0..cutoff {
            let walk = Complex64::from_polar(1.0, t * k as f64 * s / n as f64);
            gap = gap.max((walk - iterate(k, t)).norm());
        }
    }
    Ok(gap)
}
