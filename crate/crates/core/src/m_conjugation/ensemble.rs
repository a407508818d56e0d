use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{banded_constant, check_band, check_series_premise, series_constant, MConjugation};
use crate::ensembles::{Draw, EnsembleError, GeneratorEnsemble};
use crate::lp_core::{Field, TruncOperator};
use crate::rng::RngStream;
use crate::semigroup_lln::{mc_lln_experiment, DeviationReport, LlnError, LlnRun};

/// Which membership rule every sample must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "d", rename_all = "snake_case")]
pub enum CertificateRule {
    Series(usize),
    DDiagonal(usize),
}

impl CertificateRule {
    pub fn constant(self) -> f64 {
        match self {
            CertificateRule::Series(d) => series_constant(d),
            CertificateRule::DDiagonal(d) => banded_constant(d),
        }
    }

    fn check(self, m: &MConjugation, b: &TruncOperator) -> Result<(), String> {
        match self {
            CertificateRule::Series(d) => check_series_premise(m, b, d),
            CertificateRule::DDiagonal(d) => check_band(b, d),
        }
        .map_err(|e| e.to_string())
    }
}

/// `A = {B}_M` for `B` drawn from a base ensemble with `||B||_1 <= rho`.
/// Every draw is certified against the rule; a failing draw is reported as
/// [`EnsembleError::Uncertified`].
#[derive(Debug)]
pub struct ConjugatedEnsemble {
    base: Box<dyn GeneratorEnsemble>,
    m: MConjugation,
    rule: CertificateRule,
    rho: f64,
}

impl ConjugatedEnsemble {
    pub fn new(base: Box<dyn GeneratorEnsemble>, rule: CertificateRule) -> Result<Self, EnsembleError> {
        let rho = base.radius(1.0).ok_or_else(|| {
            EnsembleError::InvalidParameter(format!("`{}` has no certified l_1 radius", base.kind()))
        })?;
        let m = MConjugation::harmonic(base.dim());
        Ok(ConjugatedEnsemble { base, m, rule, rho })
    }

    pub fn rule(&self) -> CertificateRule {
        self.rule
    }

    /// `C rho`, the `l_2` radius of the conjugated samples.
    pub fn effective_radius(&self) -> f64 {
        self.rule.constant() * self.rho
    }

    fn conjugate(&self, b: &TruncOperator) -> Result<TruncOperator, EnsembleError> {
        self.m
            .conjugate(b)
            .map_err(|e| EnsembleError::InvalidParameter(e.to_string()))
    }
}

impl GeneratorEnsemble for ConjugatedEnsemble {
    fn kind(&self) -> &'static str {
        "conjugated"
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn field(&self) -> Field {
        self.base.field()
    }
    fn sample(&self, rng: &mut RngStream) -> Result<Draw, EnsembleError> {
        let draw = self.base.sample(rng)?;
        let b = &draw.operator;
        let l1 = b.norm_l1();
        if l1 > self.rho * (1.0 + 1e-12) {
            return Err(EnsembleError::Uncertified(format!("||B||_1 = {l1} exceeds rho = {}", self.rho)));
        }
        self.rule.check(&self.m, b).map_err(EnsembleError::Uncertified)?;
        Ok(Draw { operator: self.conjugate(b)?, clamped: draw.clamped })
    }
    fn mean_generator(&self) -> Result<TruncOperator, EnsembleError> {
        self.conjugate(&self.base.mean_generator()?)
    }
    fn mean_semigroup_closed(&self, t: f64, tol: f64) -> Option<Result<TruncOperator, EnsembleError>> {
        // conjugation commutes with the exponential
        self.base
            .mean_semigroup_closed(t, tol)
            .map(|f| f.and_then(|f| self.conjugate(&f)))
    }
    fn radius(&self, p: f64) -> Option<f64> {
        (p == 2.0).then(|| self.effective_radius())
    }
    fn describe(&self) -> serde_json::Value {
        json!({
            "kind": self.kind(),
            "base": self.base.describe(),
            "rule": self.rule,
            "C": self.rule.constant(),
            "rho": self.rho,
        })
    }
}

/// The LLN run for `{B_1}_M ... {B_n}_M` in `l_2`, with bound radius `C rho`.
pub fn conjugated_lln(
    base: Box<dyn GeneratorEnsemble>,
    rule: CertificateRule,
    run: &LlnRun,
) -> Result<Vec<DeviationReport>, LlnError> {
    let e = ConjugatedEnsemble::new(base, rule)?;
    let mut run = run.clone();
    run.p = 2.0;
    run.q = 2.0;
    mc_lln_experiment(&e, &run)
}
