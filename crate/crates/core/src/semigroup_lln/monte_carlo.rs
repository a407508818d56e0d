use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{uniform_grid, variance_bound_f, LlnError};
use crate::ensembles::{EnsembleError, GeneratorEnsemble};
use crate::lp_core::{lp_norm, lp_norm_slice, Field, Mat, Scalar, TruncVector};
use crate::rng::{experiment_ids, RngStream, StreamId};
use crate::stats::wilson_interval;

/// Norm used for the deviation `sup_t ||(W_n(t) - W(t)) x||`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationNorm {
    /// `l_2`, as in the theorem.
    L2,
    /// `l_p` with the run's `p`; exploratory only.
    Lp,
}

impl DeviationNorm {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviationNorm::L2 => "l2",
            DeviationNorm::Lp => "lp",
        }
    }
}

/// One Monte Carlo LLN run over a list of composition lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct LlnRun {
    pub n_list: Vec<u64>,
    pub trials: usize,
    pub t_max: f64,
    pub grid_points: usize,
    pub epsilons: Vec<f64>,
    pub x: TruncVector,
    pub x_label: String,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
    pub tol: f64,
    pub deviation_norm: DeviationNorm,
    pub workers: usize,
    /// Stream experiment id of the first `n`; later ones count up from it.
    pub experiment_base: u64,
}

impl LlnRun {
    pub fn new(x: TruncVector, n_list: Vec<u64>, trials: usize, epsilons: Vec<f64>) -> Self {
        LlnRun {
            n_list,
            trials,
            t_max: 1.0,
            grid_points: 64,
            epsilons,
            x_label: "custom".into(),
            x,
            p: 2.0,
            q: 2.0,
            seed: 0,
            tol: crate::lp_core::DEFAULT_EXPM_TOL,
            deviation_norm: DeviationNorm::L2,
            workers: 1,
            experiment_base: experiment_ids::LLN_BASE,
        }
    }

    fn validate(&self, dim: usize) -> Result<(), LlnError> {
        let bad = |msg: String| Err(LlnError::InvalidArgument(msg));
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if !(1.0..=2.0).contains(&self.p) {
            return bad(format!("p = {} outside [1, 2]", self.p));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad(format!("n-list {:?} must be nonempty and positive", self.n_list));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad(format!("epsilons {:?} must be positive", self.epsilons));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance {}", self.tol));
        }
        if self.x.dim() != dim {
            return bad(format!("x has dimension {} but the ensemble has {dim}", self.x.dim()));
        }
        self.x.check_finite()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub n: u64,
    /// Completed trials (aborted ones are excluded).
    pub trials: usize,
    pub aborted: usize,
    pub exceedances: u64,
    pub empirical_probability: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// `min(1, f(T, rho, n) ||x||_p^2 / eps^2)`, absent without a certified radius.
    pub bound: Option<f64>,
    pub epsilon: f64,
    pub t_max: f64,
    pub grid_points: usize,
    pub p: f64,
    pub q: f64,
    pub x: String,
    pub dim: usize,
    pub seed: u64,
    pub deviation_norm: DeviationNorm,
    pub clamped_draws: u64,
    pub mean_sup_deviation: f64,
    pub diagnostic: Option<String>,
}

enum TrialOutcome {
    Done { sup: f64, clamps: u64 },
    Aborted(String),
}

fn replicate<S: Scalar>(x: &Array1<S>, cols: usize) -> Array2<S> {
    Array2::from_shape_fn((x.len(), cols), |(k, _)| x[k])
}

fn max_column_deviation<S: Scalar>(a: &Array2<S>, b: &Array2<S>, q: f64) -> f64 {
    let mut buf = vec![S::zero(); a.nrows()];
    let mut sup = 0.0_f64;
    for j in 0..a.ncols() {
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = a[[k, j]] - b[[k, j]];
        }
        sup = sup.max(lp_norm_slice(&buf, q));
    }
    sup
}

struct Context<'a, S> {
    e: &'a dyn GeneratorEnsemble,
    run: &'a LlnRun,
    x: Array1<S>,
    target: Array2<S>,
    norm_index: f64,
}

impl<S: Scalar> Context<'_, S> {
    /// `sup_j ||W_n(t_j) x - exp((EA) t_j) x||`, applying the factors right to left.
    fn trial(&self, experiment: u64, n: u64, taus: &[f64], trial: u64) -> Result<TrialOutcome, LlnError> {
        let mut block = replicate(&self.x, taus.len());
        let mut clamps = 0;
        for i in (0..n).rev() {
            let mut rng = RngStream::new(self.run.seed, StreamId::new(experiment, trial, i));
            let draw = match self.e.sample(&mut rng) {
                Ok(d) => d,
                Err(EnsembleError::Uncertified(msg)) => {
                    return Ok(TrialOutcome::Aborted(format!("trial {trial}, generator {i}: {msg}")))
                }
                Err(err) => return Err(err.into()),
            };
            clamps += u64::from(draw.clamped);
            let a: Mat<S> = draw.operator.to_scalar_mat()?;
            a.expm_apply_block(taus, &mut block, self.run.tol)?;
        }
        Ok(TrialOutcome::Done {
            sup: max_column_deviation(&block, &self.target, self.norm_index),
            clamps,
        })
    }
}

fn run_typed<S: Scalar>(
    e: &dyn GeneratorEnsemble,
    run: &LlnRun,
    grid: &[f64],
    pool: &rayon::ThreadPool,
) -> Result<Vec<DeviationReport>, LlnError> {
    let x: Array1<S> = run.x.to_scalar()?;
    let mean: Mat<S> = e.mean_generator()?.to_scalar_mat()?;
    let mut target = replicate(&x, grid.len());
    mean.expm_apply_block(grid, &mut target, run.tol)?;
    let norm_index = match run.deviation_norm {
        DeviationNorm::L2 => 2.0,
        DeviationNorm::Lp => run.p,
    };
    let ctx = Context { e, run, x, target, norm_index };
    let x_norm = lp_norm(&run.x, run.p)?;
    let radius = e.radius(run.p);

    let mut reports = Vec::new();
    for (idx, &n) in run.n_list.iter().enumerate() {
        let experiment = run.experiment_base + idx as u64;
        let taus: Vec<f64> = grid.iter().map(|t| t / n as f64).collect();
        let outcomes: Vec<Result<TrialOutcome, LlnError>> = pool.install(|| {
            (0..run.trials as u64)
                .into_par_iter()
                .map(|r| ctx.trial(experiment, n, &taus, r))
                .collect()
        });
        let mut sups = Vec::with_capacity(run.trials);
        let mut clamped_draws = 0;
        let mut diagnostic = None;
        for outcome in outcomes {
            match outcome? {
                TrialOutcome::Done { sup, clamps } => {
                    sups.push(sup);
                    clamped_draws += clamps;
                }
                TrialOutcome::Aborted(msg) => {
                    diagnostic.get_or_insert(msg);
                }
            }
        }
        if sups.is_empty() {
            return Err(LlnError::AllTrialsAborted(diagnostic.unwrap_or_default()));
        }
        let done = sups.len();
        let mean_sup = sups.iter().sum::<f64>() / done as f64;
        for &eps in &run.epsilons {
            let exceedances = sups.iter().filter(|&&s| s > eps).count() as u64;
            let (wilson_lo, wilson_hi) = wilson_interval(exceedances, done as u64);
            let bound =
                radius.map(|rho| (variance_bound_f(rho, run.t_max, n) * x_norm * x_norm / (eps * eps)).min(1.0));
            reports.push(DeviationReport {
                n,
                trials: done,
                aborted: run.trials - done,
                exceedances,
                empirical_probability: exceedances as f64 / done as f64,
                wilson_lo,
                wilson_hi,
                bound,
                epsilon: eps,
                t_max: run.t_max,
                grid_points: run.grid_points,
                p: run.p,
                q: run.q,
                x: run.x_label.clone(),
                dim: e.dim(),
                seed: run.seed,
                deviation_norm: run.deviation_norm,
                clamped_draws,
                mean_sup_deviation: mean_sup,
                diagnostic: diagnostic.clone(),
            });
        }
    }
    Ok(reports)
}

/// Monte Carlo estimate of `P{sup_t ||(W_n(t) - exp((EA) t)) x|| > eps}` for
/// every `n` and `eps` of the run. Trial `r` of the `k`-th `n` draws generator
/// `i` from stream `(experiment_base + k, r, i)`, so reports do not depend on
/// the worker count.
pub fn mc_lln_experiment(e: &dyn GeneratorEnsemble, run: &LlnRun) -> Result<Vec<DeviationReport>, LlnError> {
    run.validate(e.dim())?;
    let grid = uniform_grid(run.t_max, run.grid_points)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.workers.max(1))
        .build()
        .map_err(|err| LlnError::InvalidArgument(format!("worker pool: {err}")))?;
    match e.field().join(run.x.field()) {
        Field::Real => run_typed::<f64>(e, run, &grid, &pool),
        Field::Complex => run_typed::<Complex64>(e, run, &grid, &pool),
    }
}
