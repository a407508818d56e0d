use serde::Serialize;

use super::{uniform_grid, LlnError};
use crate::ensembles::{mean_semigroup, GeneratorEnsemble, MeanMode};
use crate::lp_core::{lp_norm, matexp_apply, opnorm_estimate, opnorm_upper_bound, TruncOperator, TruncVector};

/// Finite-difference tolerance for the derivative condition.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-6;
const NORM_SLACK: f64 = 1e-12;

/// `F(t/n)^n` with `F(s) = E exp(A s)`.
pub fn chernoff_iterate(
    e: &dyn GeneratorEnsemble,
    t: f64,
    n: u64,
    mode: MeanMode,
    tol: f64,
) -> Result<TruncOperator, LlnError> {
    if n == 0 {
        return Err(LlnError::InvalidArgument("n must be at least 1".into()));
    }
    Ok(mean_semigroup(e, t / n as f64, mode, tol)?.power(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    /// Only a lower estimate of the norm satisfies the inequality.
    LowerBoundConsistent,
    Fail,
}

impl CheckStatus {
    pub fn passed(self) -> bool {
        self != CheckStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChernoffRow {
    pub n: u64,
    pub sup_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChernoffReport {
    pub rows: Vec<ChernoffRow>,
    pub conditions: Vec<ConditionCheck>,
    pub t_max: f64,
    pub grid_points: usize,
    pub p: f64,
    pub dim: usize,
}

impl ChernoffReport {
    pub fn conditions_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.status.passed())
    }
}

fn check_identity_at_zero(e: &dyn GeneratorEnsemble, mode: MeanMode, tol: f64) -> Result<ConditionCheck, LlnError> {
    let f0 = mean_semigroup(e, 0.0, mode, tol)?;
    let diff = f0.max_abs_diff(&TruncOperator::identity(e.dim()));
    Ok(ConditionCheck {
        name: "F(0) = I",
        status: if diff <= tol { CheckStatus::Pass } else { CheckStatus::Fail },
        detail: format!("max |F(0) - I| = {diff:e}"),
    })
}

fn check_growth(
    e: &dyn GeneratorEnsemble,
    grid: &[f64],
    p: f64,
    mode: MeanMode,
    tol: f64,
) -> Result<ConditionCheck, LlnError> {
    let a = e.truncation_radius(p);
    let mut status = CheckStatus::Pass;
    let mut worst = f64::NEG_INFINITY;
    for &t in grid {
        let f = mean_semigroup(e, t, mode, tol)?;
        let limit = (a * t).exp() * (1.0 + NORM_SLACK);
        let upper = opnorm_upper_bound(&f, p)?;
        worst = worst.max(upper / limit);
        if upper > limit {
            let lower = opnorm_estimate(&f, p, p, 4, tol)?.value;
            status = if lower <= limit && status != CheckStatus::Fail {
                CheckStatus::LowerBoundConsistent
            } else {
                CheckStatus::Fail
            };
        }
    }
    Ok(ConditionCheck {
        name: "||F(t)|| <= e^{at}",
        status,
        detail: format!("a = {a}, max upper-bound ratio {worst:.6}"),
    })
}

fn check_derivative(
    e: &dyn GeneratorEnsemble,
    x: &TruncVector,
    mode: MeanMode,
    tol: f64,
) -> Result<ConditionCheck, LlnError> {
    let exact = e.mean_generator()?.apply(x)?;
    let scale = lp_norm(&exact, f64::INFINITY)?.max(1.0);
    let quotient = |h: f64| -> Result<TruncVector, LlnError> {
        let fx = mean_semigroup(e, h, mode, tol)?.apply(x)?;
        Ok(fx.sub(x)?.scaled(1.0 / h))
    };
    let mut best = (f64::INFINITY, 0.0);
    let mut h = 0.1;
    let mut coarse = quotient(h)?;
    for _ in 0..40 {
        let fine = quotient(h / 2.0)?;
        // Richardson step removes the O(h) term of the one-sided quotient
        let extrapolated = fine.scaled(2.0).sub(&coarse)?;
        for candidate in [&fine, &extrapolated] {
            let err = lp_norm(&candidate.sub(&exact)?, f64::INFINITY)?;
            if err < best.0 {
                best = (err, h / 2.0);
            }
        }
        if best.0 <= DERIVATIVE_TOLERANCE * scale * 1e-3 {
            break;
        }
        coarse = fine;
        h /= 2.0;
    }
    Ok(ConditionCheck {
        name: "(F(h) - I)x / h -> (EA)x",
        status: if best.0 <= DERIVATIVE_TOLERANCE * scale { CheckStatus::Pass } else { CheckStatus::Fail },
        detail: format!("best error {:e} at h = {:e}", best.0, best.1),
    })
}

/// `sup_t ||(F(t/n)^n - exp((EA) t)) x||_p` for each `n`, plus the checks
/// `F(0) = I`, `||F(t)||_p <= e^{at}` on the grid and `F'(0) x = (EA) x`.
#[allow(clippy::too_many_arguments)]
pub fn chernoff_convergence(
    e: &dyn GeneratorEnsemble,
    x: &TruncVector,
    t_max: f64,
    grid_points: usize,
    n_list: &[u64],
    p: f64,
    mode: MeanMode,
    tol: f64,
) -> Result<ChernoffReport, LlnError> {
    let grid = uniform_grid(t_max, grid_points)?;
    let mean = e.mean_generator()?;
    let targets = grid
        .iter()
        .map(|&t| matexp_apply(&mean, t, x, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut sup = 0.0_f64;
        for (&t, target) in grid.iter().zip(&targets) {
            let y = chernoff_iterate(e, t, n, mode, tol)?.apply(x)?;
            sup = sup.max(lp_norm(&y.sub(target)?, p)?);
        }
        rows.push(ChernoffRow { n, sup_deviation: sup });
    }
    let conditions = vec![
        check_identity_at_zero(e, mode, tol)?,
        check_growth(e, &grid, p, mode, tol)?,
        check_derivative(e, x, mode, tol)?,
    ];
    Ok(ChernoffReport { rows, conditions, t_max, grid_points, p, dim: e.dim() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{DiagonalImaginary, DiscreteAtoms, RankOneGeometric};

    #[test]
    fn iterate_at_zero_is_identity() {
        let e = RankOneGeometric::new(8).unwrap();
        let f = chernoff_iterate(&e, 0.0, 5, MeanMode::ClosedForm, 1e-12).unwrap();
        assert_eq!(f.max_abs_diff(&TruncOperator::identity(8)), 0.0);
    }

    #[test]
    fn diagonal_iterate_entries() {
        let e = DiagonalImaginary::new(6).unwrap();
        let (t, n) = (1.3, 7u64);
        let f = chernoff_iterate(&e, t, n, MeanMode::ClosedForm, 1e-12).unwrap();
        for k in 0..6 {
            let expected = (k as f64 * t / n as f64).cos().powi(n as i32);
            assert!((f.get(k, k).re - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn deterministic_iterate_matches_exponential() {
        let a = TruncOperator::from_real_dense(ndarray::array![[0.1, 0.3], [-0.2, 0.05]]).unwrap();
        let e = DiscreteAtoms::uniform(vec![a.clone()]).unwrap();
        let x = TruncVector::from_real(vec![1.0, -1.0]);
        let r = chernoff_convergence(&e, &x, 1.0, 9, &[1, 4, 16], 1.0, MeanMode::ClosedForm, 1e-12).unwrap();
        for row in &r.rows {
            assert!(row.sup_deviation < 1e-12, "{row:?}");
        }
        assert!(r.conditions_hold(), "{:?}", r.conditions);
    }

    #[test]
    fn rank_one_conditions() {
        let e = RankOneGeometric::new(16).unwrap();
        let x = TruncVector::basis(16, 1).unwrap();
        let r = chernoff_convergence(&e, &x, 1.0, 9, &[4, 16], 1.0, MeanMode::ClosedForm, 1e-12).unwrap();
        assert!(r.conditions_hold(), "{:?}", r.conditions);
        assert!(r.rows.iter().all(|row| row.sup_deviation < 1e-14));
    }
}
