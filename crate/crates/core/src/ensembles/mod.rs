//! Distributions over random generators `A`.
//!
//! Every kind implements [`GeneratorEnsemble`] and is constructed by name
//! through [`EnsembleRegistry`], so experiments select kinds at runtime from
//! their configuration.

mod kinds;
mod registry;
mod variance;

use std::fmt::Debug;

use thiserror::Error;

use crate::lp_core::{matexp, Field, LinalgError, TruncOperator};
use crate::rng::{experiment_ids, RngStream, StreamId};

pub use kinds::{
    geometric_pmf, BandedEnsemble, BoundedDense, DiagonalImaginary, DiscreteAtoms, RankOneGeometric,
    ScaledRankOneGeometric,
};
pub use registry::{EnsembleConstructor, EnsembleParams, EnsembleRegistry};
pub use variance::{
    chebyshev_bound, exact_deviation_probability, quadratic_form, variance_operator, VarianceMode,
    VarianceOperator, VarianceProvenance,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("invalid ensemble parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown ensemble kind `{0}`")]
    UnknownKind(String),
    #[error("ensemble `{0}` has no closed form; use the Monte Carlo route")]
    NoClosedForm(&'static str),
    #[error("ensemble `{0}` is not enumerable")]
    NotEnumerable(&'static str),
    #[error("empirical mean of an empty sample")]
    EmptySamples,
    #[error("sample rejected: {0}")]
    Uncertified(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One draw of a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub operator: TruncOperator,
    /// A geometric index exceeded the truncation and was clamped.
    pub clamped: bool,
}

impl Draw {
    pub fn exact(operator: TruncOperator) -> Self {
        Draw { operator, clamped: false }
    }
}

/// An atom of a discrete ensemble.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Atom {
    #[serde(rename = "matrix")]
    pub operator: TruncOperator,
    #[serde(rename = "prob")]
    pub probability: f64,
}

pub trait GeneratorEnsemble: Send + Sync + Debug {
    /// Registry name of the kind.
    fn kind(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn field(&self) -> Field;

    fn sample(&self, rng: &mut RngStream) -> Result<Draw, EnsembleError>;

    /// Closed-form `E A`.
    fn mean_generator(&self) -> Result<TruncOperator, EnsembleError>;

    /// Closed-form `F(t) = E exp(A t)`, when the kind has one.
    fn mean_semigroup_closed(&self, _t: f64, _tol: f64) -> Option<Result<TruncOperator, EnsembleError>> {
        None
    }

    /// Radius of an `||.||_p` ball containing every sample, if the kind is bounded.
    fn radius(&self, p: f64) -> Option<f64>;

    /// A norm bound valid on the truncation even for kinds that are unbounded
    /// in the limit.
    fn truncation_radius(&self, p: f64) -> f64 {
        self.radius(p).unwrap_or(f64::INFINITY)
    }

    /// Atoms with probabilities, for enumerable kinds.
    fn atoms(&self) -> Option<&[Atom]> {
        None
    }

    /// Parameters for config echoes.
    fn describe(&self) -> serde_json::Value;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanMode {
    ClosedForm,
    MonteCarlo { samples: usize, seed: u64 },
}

/// `F(t) = E exp(A t)`.
pub fn mean_semigroup(
    e: &dyn GeneratorEnsemble,
    t: f64,
    mode: MeanMode,
    tol: f64,
) -> Result<TruncOperator, EnsembleError> {
    if !(t >= 0.0) {
        return Err(LinalgError::NegativeTime(t).into());
    }
    match mode {
        MeanMode::ClosedForm => e
            .mean_semigroup_closed(t, tol)
            .unwrap_or(Err(EnsembleError::NoClosedForm(e.kind()))),
        MeanMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(EnsembleError::EmptySamples);
            }
            let mut acc: Option<TruncOperator> = None;
            for i in 0..samples {
                let mut rng = RngStream::new(seed, StreamId::new(experiment_ids::MEAN_SEMIGROUP, i as u64, 0));
                let a = e.sample(&mut rng)?.operator;
                let ea = matexp(&a, t, tol)?;
                acc = Some(match acc {
                    None => ea,
                    Some(s) => s.add(&ea)?,
                });
            }
            Ok(acc.expect("samples > 0").scale_real(1.0 / samples as f64))
        }
    }
}

/// Entrywise arithmetic mean.
pub fn empirical_mean(samples: &[TruncOperator]) -> Result<TruncOperator, EnsembleError> {
    let (first, rest) = samples.split_first().ok_or(EnsembleError::EmptySamples)?;
    let mut acc = first.clone();
    for s in rest {
        acc = acc.add(s)?;
    }
    Ok(acc.scale_real(1.0 / samples.len() as f64))
}

/// Draw `count` samples from streams `(experiment, i, 0)`.
pub fn draw_samples(
    e: &dyn GeneratorEnsemble,
    count: usize,
    seed: u64,
    experiment: u64,
) -> Result<Vec<Draw>, EnsembleError> {
    (0..count)
        .map(|i| e.sample(&mut RngStream::new(seed, StreamId::new(experiment, i as u64, 0))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_mean_basics() {
        let u = TruncOperator::ket_bra(3, 0, 2).unwrap();
        assert_eq!(empirical_mean(std::slice::from_ref(&u)).unwrap(), u);
        let m = empirical_mean(&[u.clone(), u.scale_real(-1.0)]).unwrap();
        assert_eq!(m.max_abs(), 0.0);
        assert_eq!(empirical_mean(&[]), Err(EnsembleError::EmptySamples));
    }
}
