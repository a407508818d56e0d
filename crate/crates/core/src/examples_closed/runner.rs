use rayon::prelude::*;
use serde::Serialize;

use super::{
    ex1_bound, ex1_deviation, ex1_matrix_deviation, ex2_bound, ex2_deviation, ex2_matrix_deviation,
    ex3_matrix_pairing, ex3_norm_gap, ex3_tail_bound, ex3_wot_pairing, ex3_wot_sup, ExampleError, GeometricDraws,
    SignDraws,
};
use crate::lp_core::TruncVector;
use crate::rng::experiment_ids;
use crate::semigroup_lln::uniform_grid;
use crate::stats::wilson_interval;

/// Agreement required between a closed form and its matrix path.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    /// `A = |0><xi|`.
    RankOne,
    /// `A = xi |0><xi|`.
    ScaledRankOne,
}

impl ExampleKind {
    fn experiment(self) -> u64 {
        match self {
            ExampleKind::RankOne => experiment_ids::EXAMPLE_ONE << 16,
            ExampleKind::ScaledRankOne => experiment_ids::EXAMPLE_TWO << 16,
        }
    }

    fn deviation(self, x: &TruncVector, t: f64, draws: &GeometricDraws) -> f64 {
        match self {
            ExampleKind::RankOne => ex1_deviation(x, t, draws),
            ExampleKind::ScaledRankOne => ex2_deviation(x, t, draws),
        }
    }

    fn matrix_deviation(self, x: &TruncVector, t: f64, draws: &GeometricDraws, tol: f64) -> Result<f64, ExampleError> {
        match self {
            ExampleKind::RankOne => ex1_matrix_deviation(x, t, draws, tol),
            ExampleKind::ScaledRankOne => ex2_matrix_deviation(x, t, draws, tol),
        }
    }

    fn bound(self, t_max: f64, x: &TruncVector, n: u64, eps: f64) -> Result<f64, ExampleError> {
        match self {
            ExampleKind::RankOne => ex1_bound(t_max, x, n, eps),
            ExampleKind::ScaledRankOne => ex2_bound(t_max, x, n, eps),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricRun {
    pub kind: ExampleKind,
    pub x: TruncVector,
    pub x_label: String,
    pub t_max: f64,
    pub grid_points: usize,
    pub n_list: Vec<u64>,
    pub trials: usize,
    pub epsilons: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
    pub tol: f64,
    /// Leading trials whose closed form is recomputed from matrix exponentials.
    pub check_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleReport {
    pub n: u64,
    pub trials: usize,
    pub exceedances: u64,
    pub empirical_probability: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// Chebyshev bound `T^2 var / (n eps^2)`, not clipped.
    pub bound: f64,
    pub epsilon: f64,
    pub t_max: f64,
    pub p: f64,
    pub q: f64,
    pub x: String,
    pub dim: usize,
    pub seed: u64,
    pub closed_form_check: bool,
    pub max_check_diff: f64,
    /// Largest sampled `||A_i||_1`.
    pub max_generator_norm: f64,
}

struct TrialResult {
    sup: f64,
    check_diff: f64,
    max_xi: u64,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, ExampleError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExampleError::InvalidArgument(format!("worker pool: {e}")))
}

/// Empirical `P{sup_t ||(W_n(t) - exp((EA) t)) x||_1 > eps}` from the closed
/// form, against the Chebyshev bound.
pub fn run_geometric_example(run: &GeometricRun) -> Result<Vec<ExampleReport>, ExampleError> {
    if run.trials == 0 || run.n_list.is_empty() || run.n_list.contains(&0) {
        return Err(ExampleError::InvalidArgument("trials and n-list must be positive".into()));
    }
    let grid = uniform_grid(run.t_max, run.grid_points)?;
    let pool = pool(run.workers)?;
    let mut reports = Vec::new();
    for (idx, &n) in run.n_list.iter().enumerate() {
        let experiment = run.kind.experiment() + idx as u64;
        let results: Vec<Result<TrialResult, ExampleError>> = pool.install(|| {
            (0..run.trials as u64)
                .into_par_iter()
                .map(|r| {
                    let draws = GeometricDraws::sample(run.seed, experiment, r, n as usize);
                    // the deviation is linear in t, so the grid maximum sits at the last point
                    let per_unit = run.kind.deviation(&run.x, 1.0, &draws);
                    let sup = grid.iter().map(|&t| t * per_unit).fold(0.0, f64::max);
                    let check_diff = if (r as usize) < run.check_trials {
                        let matrix = run.kind.matrix_deviation(&run.x, run.t_max, &draws, run.tol)?;
                        (matrix - run.kind.deviation(&run.x, run.t_max, &draws)).abs()
                    } else {
                        0.0
                    };
                    let max_xi = draws.values().iter().copied().max().unwrap_or(0);
                    Ok(TrialResult { sup, check_diff, max_xi })
                })
                .collect()
        });
        let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        let max_check_diff = results.iter().map(|r| r.check_diff).fold(0.0, f64::max);
        let max_xi = results.iter().map(|r| r.max_xi).max().unwrap_or(0);
        let max_generator_norm = match run.kind {
            ExampleKind::RankOne => 1.0,
            ExampleKind::ScaledRankOne => max_xi as f64,
        };
        for &eps in &run.epsilons {
            let exceedances = results.iter().filter(|r| r.sup > eps).count() as u64;
            let (wilson_lo, wilson_hi) = wilson_interval(exceedances, run.trials as u64);
            reports.push(ExampleReport {
                n,
                trials: run.trials,
                exceedances,
                empirical_probability: exceedances as f64 / run.trials as f64,
                wilson_lo,
                wilson_hi,
                bound: run.kind.bound(run.t_max, &run.x, n, eps)?,
                epsilon: eps,
                t_max: run.t_max,
                p: 1.0,
                q: f64::INFINITY,
                x: run.x_label.clone(),
                dim: run.x.dim(),
                seed: run.seed,
                closed_form_check: max_check_diff <= CROSS_CHECK_TOLERANCE,
                max_check_diff,
                max_generator_norm,
            });
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example3Run {
    pub z: TruncVector,
    pub x: TruncVector,
    pub x_label: String,
    pub t_max: f64,
    pub grid_points: usize,
    /// Composition length of the norm-gap draws (shared with the first WOT check).
    pub n_gap: u64,
    /// Composition length of the separate WOT run.
    pub n_wot: u64,
    pub cutoff: usize,
    pub seeds: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub workers: usize,
    pub tol: f64,
    pub check_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example3Report {
    pub seeds: usize,
    pub n_gap: u64,
    pub n_wot: u64,
    pub cutoff: usize,
    pub t_max: f64,
    pub grid_points: usize,
    pub epsilon: f64,
    /// Fraction of seeds with WOT pairing sup `<= eps` at `n_gap`, same draws as the gaps.
    pub wot_freq_shared: f64,
    /// Same fraction at `n_wot`.
    pub wot_freq: f64,
    pub wot_values: Vec<f64>,
    pub norm_gaps: Vec<f64>,
    pub norm_gap_min: f64,
    pub tail_bound: f64,
    pub closed_form_check: bool,
    pub max_check_diff: f64,
}

/// Weak convergence next to the operator-norm gap, seed by seed.
pub fn run_example3(run: &Example3Run) -> Result<Example3Report, ExampleError> {
    if run.seeds == 0 || run.n_gap == 0 || run.n_wot == 0 || !(run.epsilon > 0.0) {
        return Err(ExampleError::InvalidArgument("seeds, n and epsilon must be positive".into()));
    }
    let grid = uniform_grid(run.t_max, run.grid_points)?;
    let base = experiment_ids::EXAMPLE_THREE << 16;
    // fail early on an infeasible search rather than per seed
    ex3_norm_gap(&grid, &SignDraws::forced(vec![1; run.n_gap as usize])?, run.cutoff)?;
    let pool = pool(run.workers)?;
    type Row = (f64, f64, f64, f64);
    let rows: Vec<Result<Row, ExampleError>> = pool.install(|| {
        (0..run.seeds as u64)
            .into_par_iter()
            .map(|s| {
                let shared = SignDraws::sample(run.seed, base, s, run.n_gap as usize);
                let gap = ex3_norm_gap(&grid, &shared, run.cutoff)?;
                let wot_shared = ex3_wot_sup(&run.z, &run.x, &grid, &shared, run.cutoff)?;
                let long = SignDraws::sample(run.seed, base + 1, s, run.n_wot as usize);
                let wot = ex3_wot_sup(&run.z, &run.x, &grid, &long, run.cutoff)?;
                let mut diff = 0.0_f64;
                if (s as usize) < run.check_trials {
                    for &t in &grid {
                        let closed = ex3_wot_pairing(&run.z, &run.x, t, &shared, run.cutoff)?;
                        let matrix = ex3_matrix_pairing(&run.z, &run.x, t, &shared, run.cutoff, run.tol)?;
                        diff = diff.max((closed - matrix).abs());
                    }
                }
                Ok((gap, wot_shared, wot, diff))
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let count = |f: &dyn Fn(&Row) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / rows.len() as f64;
    let max_check_diff = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let norm_gaps: Vec<f64> = rows.iter().map(|r| r.0).collect();
    Ok(Example3Report {
        seeds: run.seeds,
        n_gap: run.n_gap,
        n_wot: run.n_wot,
        cutoff: run.cutoff,
        t_max: run.t_max,
        grid_points: run.grid_points,
        epsilon: run.epsilon,
        wot_freq_shared: count(&|r| r.1 <= run.epsilon),
        wot_freq: count(&|r| r.2 <= run.epsilon),
        wot_values: rows.iter().map(|r| r.2).collect(),
        norm_gap_min: norm_gaps.iter().copied().fold(f64::INFINITY, f64::min),
        norm_gaps,
        tail_bound: ex3_tail_bound(&run.z, &run.x, run.cutoff),
        closed_form_check: max_check_diff <= CROSS_CHECK_TOLERANCE,
        max_check_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_geometric_run() {
        let run = GeometricRun {
            kind: ExampleKind::RankOne,
            x: TruncVector::basis(64, 1).unwrap(),
            x_label: "e1".into(),
            t_max: 1.0,
            grid_points: 8,
            n_list: vec![100],
            trials: 200,
            epsilons: vec![0.1],
            seed: 5,
            workers: 2,
            tol: 1e-12,
            check_trials: 3,
        };
        let r = &run_geometric_example(&run).unwrap()[0];
        assert!(r.closed_form_check, "{}", r.max_check_diff);
        assert!((r.bound - 0.25).abs() < 1e-12);
        assert!(r.empirical_probability <= r.bound);
    }

    #[test]
    fn small_example3() {
        let run = Example3Run {
            z: TruncVector::from_real(vec![1.0; 16]),
            x: TruncVector::basis(16, 1).unwrap(),
            x_label: "e1".into(),
            t_max: std::f64::consts::PI,
            grid_points: 16,
            n_gap: 16,
            n_wot: 400,
            cutoff: 16,
            seeds: 10,
            epsilon: 0.5,
            seed: 1,
            workers: 1,
            tol: 1e-12,
            check_trials: 2,
        };
        let r = run_example3(&run).unwrap();
        assert!(r.closed_form_check, "{}", r.max_check_diff);
        assert!(r.norm_gap_min >= 0.9);
        assert_eq!(r.tail_bound, 0.0);
    }
}
