use num_complex::Complex64;

use super::{EnsembleError, GeneratorEnsemble};
use crate::lp_core::{lp_norm, TruncOperator, TruncVector};
use crate::rng::{experiment_ids, RngStream, StreamId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum VarianceProvenance {
    ExactEnumeration,
    MonteCarlo { samples: usize },
}

/// `var A = E (A - EA)^* (A - EA)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceOperator {
    pub matrix: TruncOperator,
    pub provenance: VarianceProvenance,
    /// Norm index of the domain; the codomain index is its conjugate.
    pub p: f64,
}

fn centered_gram(a: &TruncOperator, mean: &TruncOperator) -> Result<TruncOperator, EnsembleError> {
    let c = a.sub(mean)?;
    Ok(c.adjoint().compose(&c)?)
}

pub fn variance_operator(
    e: &dyn GeneratorEnsemble,
    mode: VarianceMode,
    p: f64,
) -> Result<VarianceOperator, EnsembleError> {
    let mean = e.mean_generator()?;
    let mut acc = TruncOperator::zeros(e.dim(), e.field());
    let provenance = match mode {
        VarianceMode::Exact => {
            let atoms = e.atoms().ok_or(EnsembleError::NotEnumerable(e.kind()))?;
            for a in atoms {
                acc = acc.add(&centered_gram(&a.operator, &mean)?.scale_real(a.probability))?;
            }
            VarianceProvenance::ExactEnumeration
        }
        VarianceMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(EnsembleError::EmptySamples);
            }
            // every built-in kind has a closed-form mean, so it is plugged in
            for i in 0..samples {
                let mut rng = RngStream::new(seed, StreamId::new(experiment_ids::VARIANCE, i as u64, 0));
                let a = e.sample(&mut rng)?.operator;
                acc = acc.add(&centered_gram(&a, &mean)?)?;
            }
            acc = acc.scale_real(1.0 / samples as f64);
            VarianceProvenance::MonteCarlo { samples }
        }
    };
    Ok(VarianceOperator { matrix: acc, provenance, p })
}

/// `<(var A) x, x>` in the `l_2` pairing (conjugate-linear in the left slot).
pub fn quadratic_form(v: &VarianceOperator, x: &TruncVector) -> Result<Complex64, EnsembleError> {
    let vx = v.matrix.apply(x)?;
    Ok((0..x.dim()).map(|k| x.get(k).conj() * vx.get(k)).sum())
}

fn check_conjugate(p: f64, q: f64) -> Result<(), EnsembleError> {
    let inv = |r: f64| if r.is_infinite() { 0.0 } else { 1.0 / r };
    if !(1.0..=2.0).contains(&p) {
        return Err(EnsembleError::InvalidParameter(format!("p = {p} outside [1, 2]")));
    }
    if q.is_nan() || q < 1.0 || (inv(p) + inv(q) - 1.0).abs() > 1e-12 {
        return Err(EnsembleError::InvalidParameter(format!("p = {p} and q = {q} are not conjugate")));
    }
    Ok(())
}

/// `||(var A) x||_q ||x||_p / eps^2`, an upper bound on `P{||(A - EA) x||_2 > eps}`.
pub fn chebyshev_bound(
    v: &VarianceOperator,
    x: &TruncVector,
    p: f64,
    q: f64,
    eps: f64,
) -> Result<f64, EnsembleError> {
    check_conjugate(p, q)?;
    if !(eps > 0.0) {
        return Err(EnsembleError::InvalidParameter(format!("epsilon = {eps}")));
    }
    let vx = v.matrix.apply(x)?;
    Ok(lp_norm(&vx, q)? * lp_norm(x, p)? / (eps * eps))
}

/// Exact `P{||(A - EA) x||_2 > eps}` over the atoms of an enumerable ensemble.
pub fn exact_deviation_probability(
    e: &dyn GeneratorEnsemble,
    x: &TruncVector,
    eps: f64,
) -> Result<f64, EnsembleError> {
    let atoms = e.atoms().ok_or(EnsembleError::NotEnumerable(e.kind()))?;
    let mean = e.mean_generator()?;
    let mut prob = 0.0;
    for a in atoms {
        let d = a.operator.sub(&mean)?.apply(x)?;
        if lp_norm(&d, 2.0)? > eps {
            prob += a.probability;
        }
    }
    Ok(prob)
}
