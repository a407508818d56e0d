use num_complex::Complex64;
use serde_json::json;

use super::{Atom, Draw, EnsembleError, GeneratorEnsemble};
use crate::lp_core::{matexp, opnorm_upper_bound, Field, Mat, TruncOperator};
use crate::rng::RngStream;

/// Truncated `Geom(1/2)` law on indices `1..dim`: the tail mass `P{xi >= dim-1}`
/// sits on the last index, matching the clamping of samples.
pub fn geometric_pmf(k: usize, dim: usize) -> f64 {
    if k == 0 || k >= dim {
        0.0
    } else if k + 1 == dim {
        2f64.powi(-(dim as i32 - 2))
    } else {
        2f64.powi(-(k as i32))
    }
}

fn clamped_geometric(rng: &mut RngStream, dim: usize) -> (usize, bool) {
    let xi = rng.geometric_half();
    let last = (dim - 1) as u64;
    if xi > last {
        (dim - 1, true)
    } else {
        (xi as usize, false)
    }
}

fn check_dim(dim: usize, min: usize) -> Result<(), EnsembleError> {
    if dim < min {
        return Err(EnsembleError::InvalidParameter(format!("dimension {dim} < {min}")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<(), EnsembleError> {
    if p.is_nan() || p < 1.0 {
        return Err(EnsembleError::InvalidParameter(format!("norm index p = {p}")));
    }
    Ok(())
}

fn noise_entry(rng: &mut RngStream, density: f64, field: Field) -> Complex64 {
    if density < 1.0 && rng.uniform() >= density {
        return Complex64::new(0.0, 0.0);
    }
    match field {
        Field::Real => Complex64::new(rng.uniform_in(-1.0, 1.0), 0.0),
        Field::Complex => Complex64::from_polar(rng.uniform(), rng.uniform_in(0.0, std::f64::consts::TAU)),
    }
}

fn to_field(m: Mat<Complex64>, field: Field) -> TruncOperator {
    match field {
        Field::Real => TruncOperator::Real(m.map_entries(|v| v.re)),
        Field::Complex => TruncOperator::Complex(m),
    }
}

/// Fixed mean part `drift * rho * S`, with `S` the down-shift `|k+1><k|`
/// (norm 1 in every `l_p`); `-drift * rho * I` when no off-diagonal is allowed.
fn drift_matrix(dim: usize, scale: f64, bandwidth: usize) -> TruncOperator {
    if bandwidth == 0 || dim < 2 {
        return TruncOperator::diagonal_real(&vec![-scale; dim]);
    }
    TruncOperator::Real(Mat::banded_from_fn(dim, 1, |n, m| if n == m + 1 { scale } else { 0.0 }))
}

/// Mean part plus symmetric noise, the noise rescaled so that its certified
/// `l_p` norm bound is exactly `(1 - drift) * rho`. Every sample then satisfies
/// `||A||_p <= rho`, and `E A` is the mean part since the noise law is symmetric.
#[derive(Debug, Clone)]
struct ShiftedNoise {
    dim: usize,
    rho: f64,
    p: f64,
    density: f64,
    drift: f64,
    field: Field,
    bandwidth: Option<usize>,
}

impl ShiftedNoise {
    fn validate(&self) -> Result<(), EnsembleError> {
        check_dim(self.dim, 1)?;
        check_p(self.p)?;
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(EnsembleError::InvalidParameter(format!("rho = {}", self.rho)));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(EnsembleError::InvalidParameter(format!("density = {}", self.density)));
        }
        if !(0.0..=1.0).contains(&self.drift) {
            return Err(EnsembleError::InvalidParameter(format!("drift = {}", self.drift)));
        }
        Ok(())
    }

    fn mean(&self) -> TruncOperator {
        drift_matrix(self.dim, self.drift * self.rho, self.bandwidth.unwrap_or(1))
    }

    fn sample(&self, rng: &mut RngStream) -> Result<TruncOperator, EnsembleError> {
        let raw: Mat<Complex64> = match self.bandwidth {
            None => Mat::from_fn(self.dim, |_, _| noise_entry(rng, self.density, self.field)),
            Some(d) => Mat::banded_from_fn(self.dim, d, |_, _| noise_entry(rng, self.density, self.field)),
        };
        let noise = to_field(raw, self.field);
        let bound = opnorm_upper_bound(&noise, self.p)?;
        let target = (1.0 - self.drift) * self.rho;
        let noise = if bound > 0.0 {
            noise.scale_real(target / bound)
        } else {
            noise
        };
        Ok(self.mean().add(&noise)?)
    }

    fn describe(&self, kind: &str) -> serde_json::Value {
        let mut v = json!({
            "kind": kind,
            "dim": self.dim,
            "rho": self.rho,
            "p": self.p,
            "density": self.density,
            "drift": self.drift,
            "field": self.field.as_str(),
        });
        if let Some(d) = self.bandwidth {
            v["bandwidth"] = json!(d);
        }
        v
    }
}

/// Dense generators in the `l_p` ball of radius `rho`.
#[derive(Debug, Clone)]
pub struct BoundedDense(ShiftedNoise);

impl BoundedDense {
    pub fn new(dim: usize, rho: f64, p: f64, density: f64, drift: f64, field: Field) -> Result<Self, EnsembleError> {
        let inner = ShiftedNoise { dim, rho, p, density, drift, field, bandwidth: None };
        inner.validate()?;
        Ok(BoundedDense(inner))
    }
}

impl GeneratorEnsemble for BoundedDense {
    fn kind(&self) -> &'static str {
        "bounded_dense"
    }
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn field(&self) -> Field {
        self.0.field
    }
    fn sample(&self, rng: &mut RngStream) -> Result<Draw, EnsembleError> {
        Ok(Draw::exact(self.0.sample(rng)?))
    }
    fn mean_generator(&self) -> Result<TruncOperator, EnsembleError> {
        Ok(self.0.mean())
    }
    fn radius(&self, p: f64) -> Option<f64> {
        (p == self.0.p).then_some(self.0.rho)
    }
    fn describe(&self) -> serde_json::Value {
        self.0.describe(self.kind())
    }
}

/// `d`-diagonal generators in the `l_p` ball of radius `rho`.
#[derive(Debug, Clone)]
pub struct BandedEnsemble(ShiftedNoise);

impl BandedEnsemble {
    pub fn new(
        dim: usize,
        rho: f64,
        p: f64,
        bandwidth: usize,
        density: f64,
        drift: f64,
        field: Field,
    ) -> Result<Self, EnsembleError> {
        let inner = ShiftedNoise {
            dim,
            rho,
            p,
            density,
            drift,
            field,
            bandwidth: Some(bandwidth.min(dim.saturating_sub(1))),
        };
        inner.validate()?;
        Ok(BandedEnsemble(inner))
    }

    pub fn bandwidth(&self) -> usize {
        self.0.bandwidth.unwrap_or(0)
    }
}

impl GeneratorEnsemble for BandedEnsemble {
    fn kind(&self) -> &'static str {
        "banded"
    }
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn field(&self) -> Field {
        self.0.field
    }
    fn sample(&self, rng: &mut RngStream) -> Result<Draw, EnsembleError> {
        Ok(Draw::exact(self.0.sample(rng)?))
    }
    fn mean_generator(&self) -> Result<TruncOperator, EnsembleError> {
        Ok(self.0.mean())
    }
    fn radius(&self, p: f64) -> Option<f64> {
        (p == self.0.p).then_some(self.0.rho)
    }
    fn describe(&self) -> serde_json::Value {
        self.0.describe(self.kind())
    }
}

fn geometric_mean_row(dim: usize, weight: impl Fn(usize) -> f64) -> TruncOperator {
    let mut m = Mat::<f64>::dense_zeros(dim);
    for k in 1..dim {
        m.set(0, k, weight(k) * geometric_pmf(k, dim)).expect("in range");
    }
    TruncOperator::Real(m).with_layout_rule()
}

/// `A = |0><xi|`, `xi ~ Geom(1/2)`. Nilpotent, so `exp(A t) = I + A t`.
#[derive(Debug, Clone)]
pub struct RankOneGeometric {
    dim: usize,
}

impl RankOneGeometric {
    pub fn new(dim: usize) -> Result<Self, EnsembleError> {
        check_dim(dim, 2)?;
        Ok(RankOneGeometric { dim })
    }

    /// The generator for a given (already clamped) index.
    pub fn operator_for(&self, xi: usize) -> Result<TruncOperator, EnsembleError> {
        Ok(TruncOperator::ket_bra(self.dim, 0, xi)?)
    }
}

impl GeneratorEnsemble for RankOneGeometric {
    fn kind(&self) -> &'static str {
        "rank_one_geometric"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn field(&self) -> Field {
        Field::Real
    }
    fn sample(&self, rng: &mut RngStream) -> Result<Draw, EnsembleError> {
        let (xi, clamped) = clamped_geometric(rng, self.dim);
        Ok(Draw { operator: self.operator_for(xi)?, clamped })
    }
    fn mean_generator(&self) -> Result<TruncOperator, EnsembleError> {
        Ok(geometric_mean_row(self.dim, |_| 1.0))
    }
    fn mean_semigroup_closed(&self, t: f64, _tol: f64) -> Option<Result<TruncOperator, EnsembleError>> {
        Some(affine_semigroup(self, t))
    }
    fn radius(&self, _p: f64) -> Option<f64> {
        Some(1.0)
    }
    fn describe(&self) -> serde_json::Value {
        json!({"kind": self.kind(), "dim": self.dim})
    }
}

fn affine_semigroup(e: &dyn GeneratorEnsemble, t: f64) -> Result<TruncOperator, EnsembleError> {
    let mean = e.mean_generator()?;
    Ok(TruncOperator::identity(e.dim()).add(&mean.scale_real(t))?)
}

/// `A = xi |0><xi|`, `xi ~ Geom(1/2)`: unbounded norms, still nilpotent.
#[derive(Debug, Clone)]
pub struct ScaledRankOneGeometric {
    dim: usize,
}

impl ScaledRankOneGeometric {
    pub fn new(dim: usize) -> Result<Self, EnsembleError> {
        check_dim(dim, 2)?;
        Ok(ScaledRankOneGeometric { dim })
    }

    pub fn operator_for(&self, xi: usize) -> Result<TruncOperator, EnsembleError> {
        Ok(TruncOperator::scaled_ket_bra(self.dim, 0, xi, xi as f64)?)
    }
}

impl GeneratorEnsemble for ScaledRankOneGeometric {
    fn kind(&self) -> &'static str {
        "scaled_rank_one_geometric"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn field(&self) -> Field {
        Field::Real
    }
    fn sample(&self, rng: &mut RngStream) -> Result<Draw, EnsembleError> {
        let (xi, clamped) = clamped_geometric(rng, self.dim);
        Ok(Draw { operator: self.operator_for(xi)?, clamped })
    }
    fn mean_generator(&self) -> Result<TruncOperator, EnsembleError> {
        Ok(geometric_mean_row(self.dim, |k| k as f64))
    }
    fn mean_semigroup_closed(&self, t: f64, _tol: f64) -> Option<Result<TruncOperator, EnsembleError>> {
        Some(affine_semigroup(self, t))
    }
    fn radius(&self, _p: f64) -> Option<f64> {
        None
    }
    fn truncation_radius(&self, _p: f64) -> f64 {
        (self.dim - 1) as f64
    }
    fn describe(&self) -> serde_json::Value {
        json!({"kind": self.kind(), "dim": self.dim})
    }
}

/// `A = sum_k i xi k |k><k|`, `xi` uniform on `{-1, 1}`.
#[derive(Debug, Clone)]
pub struct DiagonalImaginary {
    dim: usize,
}

impl DiagonalImaginary {
    pub fn new(dim: usize) -> Result<Self, EnsembleError> {
        check_dim(dim, 1)?;
        Ok(DiagonalImaginary { dim })
    }

    pub fn operator_for(&self, sign: i64) -> TruncOperator {
        let diag: Vec<Complex64> = (0..self.dim)
            .map(|k| Complex64::new(0.0, sign as f64 * k as f64))
            .collect();
        TruncOperator::diagonal_complex(&diag)
    }
}

impl GeneratorEnsemble for DiagonalImaginary {
    fn kind(&self) -> &'static str {
        "diagonal_imaginary"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn field(&self) -> Field {
        Field::Complex
    }
    fn sample(&self, rng: &mut RngStream) -> Result<Draw, EnsembleError> {
        Ok(Draw::exact(self.operator_for(rng.sign())))
    }
    fn mean_generator(&self) -> Result<TruncOperator, EnsembleError> {
        Ok(TruncOperator::zeros(self.dim, Field::Complex))
    }
    fn mean_semigroup_closed(&self, t: f64, _tol: f64) -> Option<Result<TruncOperator, EnsembleError>> {
        let diag: Vec<f64> = (0..self.dim).map(|k| (k as f64 * t).cos()).collect();
        Some(Ok(TruncOperator::diagonal_real(&diag)))
    }
    fn radius(&self, _p: f64) -> Option<f64> {
        None
    }
    fn truncation_radius(&self, _p: f64) -> f64 {
        self.dim.saturating_sub(1) as f64
    }
    fn describe(&self) -> serde_json::Value {
        json!({"kind": self.kind(), "dim": self.dim})
    }
}

/// Finitely many atoms with probabilities summing to 1.
#[derive(Debug, Clone)]
pub struct DiscreteAtoms {
    atoms: Vec<Atom>,
    dim: usize,
    field: Field,
}

/// Allowed deviation of the total probability from 1.
pub const ATOM_PROBABILITY_SLACK: f64 = 1e-12;

impl DiscreteAtoms {
    pub fn new(atoms: Vec<Atom>) -> Result<Self, EnsembleError> {
        let first = atoms
            .first()
            .ok_or_else(|| EnsembleError::InvalidParameter("no atoms".into()))?;
        let dim = first.operator.dim();
        let mut field = Field::Real;
        let mut total = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            if a.operator.dim() != dim {
                return Err(EnsembleError::InvalidParameter(format!(
                    "atom {i} has dimension {} != {dim}",
                    a.operator.dim()
                )));
            }
            if !(a.probability >= 0.0 && a.probability <= 1.0) {
                return Err(EnsembleError::InvalidParameter(format!(
                    "atom {i} has probability {}",
                    a.probability
                )));
            }
            if !a.operator.is_finite() {
                return Err(EnsembleError::InvalidParameter(format!("atom {i} is not finite")));
            }
            field = field.join(a.operator.field());
            total += a.probability;
        }
        if (total - 1.0).abs() > ATOM_PROBABILITY_SLACK {
            return Err(EnsembleError::InvalidParameter(format!("probabilities sum to {total}")));
        }
        Ok(DiscreteAtoms { atoms, dim, field })
    }

    /// Equally likely atoms.
    pub fn uniform(ops: Vec<TruncOperator>) -> Result<Self, EnsembleError> {
        let w = 1.0 / ops.len().max(1) as f64;
        Self::new(ops.into_iter().map(|operator| Atom { operator, probability: w }).collect())
    }
}

impl GeneratorEnsemble for DiscreteAtoms {
    fn kind(&self) -> &'static str {
        "discrete_atoms"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn field(&self) -> Field {
        self.field
    }
    fn sample(&self, rng: &mut RngStream) -> Result<Draw, EnsembleError> {
        let u = rng.uniform();
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.probability;
            if u < acc {
                return Ok(Draw::exact(a.operator.clone()));
            }
        }
        // u landed in the rounding gap of the cumulative sum
        let last = self.atoms.iter().rev().find(|a| a.probability > 0.0).expect("positive mass");
        Ok(Draw::exact(last.operator.clone()))
    }
    fn mean_generator(&self) -> Result<TruncOperator, EnsembleError> {
        let mut acc = TruncOperator::zeros(self.dim, self.field);
        for a in &self.atoms {
            acc = acc.add(&a.operator.scale_real(a.probability))?;
        }
        Ok(acc)
    }
    fn mean_semigroup_closed(&self, t: f64, tol: f64) -> Option<Result<TruncOperator, EnsembleError>> {
        let run = || -> Result<TruncOperator, EnsembleError> {
            let mut acc = TruncOperator::zeros(self.dim, self.field);
            for a in &self.atoms {
                acc = acc.add(&matexp(&a.operator, t, tol)?.scale_real(a.probability))?;
            }
            Ok(acc)
        };
        Some(run())
    }
    fn radius(&self, p: f64) -> Option<f64> {
        let mut r = 0.0_f64;
        for a in &self.atoms {
            r = r.max(opnorm_upper_bound(&a.operator, p).ok()?);
        }
        Some(r)
    }
    fn atoms(&self) -> Option<&[Atom]> {
        Some(&self.atoms)
    }
    fn describe(&self) -> serde_json::Value {
        json!({"kind": self.kind(), "dim": self.dim, "atoms": self.atoms})
    }
}
