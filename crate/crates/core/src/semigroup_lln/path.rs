use super::LlnError;
use crate::ensembles::{GeneratorEnsemble, MeanMode};
use crate::lp_core::{lp_norm, matexp, matexp_apply, TruncOperator, TruncVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum PathLabel {
    #[serde(rename = "W_n")]
    Composition,
    #[serde(rename = "target e^{EAt}")]
    Target,
    #[serde(rename = "Chernoff F(t/n)^n")]
    Chernoff,
}

impl PathLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PathLabel::Composition => "W_n",
            PathLabel::Target => "target e^{EAt}",
            PathLabel::Chernoff => "Chernoff F(t/n)^n",
        }
    }
}

/// `points` equally spaced times on `[0, t_max]`, both ends included.
pub fn uniform_grid(t_max: f64, points: usize) -> Result<Vec<f64>, LlnError> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(LlnError::InvalidGrid(format!("horizon {t_max}")));
    }
    if points < 2 {
        return Err(LlnError::InvalidGrid(format!("{points} grid points")));
    }
    let last = (points - 1) as f64;
    Ok((0..points).map(|j| t_max * j as f64 / last).collect())
}

fn check_grid(grid: &[f64]) -> Result<(), LlnError> {
    match grid.first() {
        Some(&t0) if t0 == 0.0 => {}
        _ => return Err(LlnError::InvalidGrid("grid must start at t = 0".into())),
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
        return Err(LlnError::InvalidGrid("grid must be strictly ascending and finite".into()));
    }
    Ok(())
}

/// Operator values of `t -> U(t)` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupPath {
    t_grid: Vec<f64>,
    values: Vec<TruncOperator>,
    label: PathLabel,
}

impl SemigroupPath {
    pub fn from_values(t_grid: Vec<f64>, values: Vec<TruncOperator>, label: PathLabel) -> Result<Self, LlnError> {
        check_grid(&t_grid)?;
        if values.len() != t_grid.len() {
            return Err(LlnError::GridMismatch);
        }
        Ok(SemigroupPath { t_grid, values, label })
    }

    /// `t -> exp(A t)`.
    pub fn exponential(a: &TruncOperator, t_grid: &[f64], tol: f64) -> Result<Self, LlnError> {
        check_grid(t_grid)?;
        let values = t_grid
            .iter()
            .map(|&t| matexp(a, t, tol))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_values(t_grid.to_vec(), values, PathLabel::Target)
    }

    /// `t -> W_n(t)` for fixed generators.
    pub fn composition(generators: &[TruncOperator], t_grid: &[f64], tol: f64) -> Result<Self, LlnError> {
        check_grid(t_grid)?;
        let values = t_grid
            .iter()
            .map(|&t| super::composition_w_n(generators, t, tol))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_values(t_grid.to_vec(), values, PathLabel::Composition)
    }

    /// `t -> F(t/n)^n`.
    pub fn chernoff(
        e: &dyn GeneratorEnsemble,
        n: u64,
        t_grid: &[f64],
        mode: MeanMode,
        tol: f64,
    ) -> Result<Self, LlnError> {
        check_grid(t_grid)?;
        let values = t_grid
            .iter()
            .map(|&t| super::chernoff_iterate(e, t, n, mode, tol))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_values(t_grid.to_vec(), values, PathLabel::Chernoff)
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn values(&self) -> &[TruncOperator] {
        &self.values
    }

    pub fn label(&self) -> PathLabel {
        self.label
    }
}

/// `W_n(t) x`, applying the factors `exp(A_i t/n)` to the vector right to left.
pub fn composition_apply(
    generators: &[TruncOperator],
    t: f64,
    x: &TruncVector,
    tol: f64,
) -> Result<TruncVector, LlnError> {
    if generators.is_empty() {
        return Err(LlnError::InvalidArgument("no generators".into()));
    }
    let s = t / generators.len() as f64;
    let mut y = x.clone();
    for a in generators.iter().rev() {
        y = matexp_apply(a, s, &y, tol)?;
    }
    Ok(y)
}

/// `max_j ||(path(t_j) - target(t_j)) x||_q`, a grid lower bound of the supremum over `[0, T]`.
pub fn deviation_sup(
    path: &SemigroupPath,
    target: &SemigroupPath,
    x: &TruncVector,
    q: f64,
) -> Result<f64, LlnError> {
    if path.t_grid != target.t_grid {
        return Err(LlnError::GridMismatch);
    }
    let mut sup = 0.0_f64;
    for (u, v) in path.values.iter().zip(&target.values) {
        let d = u.apply(x)?.sub(&v.apply(x)?)?;
        sup = sup.max(lp_norm(&d, q)?);
    }
    Ok(sup)
}
