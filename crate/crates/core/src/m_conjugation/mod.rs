//! The diagonal weight map `(Mx)_k = x_k / k`, the conjugation
//! `{U}_M = M^{-1} U M`, and certificates for `||{U}_M||_2 <= C ||U||_1`.
//!
//! Indices are stored 0-based, so storage index `k` carries the weight
//! `1 / (k + 1)`.

mod ensemble;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::lp_core::{spectral_norm, LinalgError, Mat, Scalar, Storage, TruncOperator, TruncVector};

pub use ensemble::{conjugated_lln, CertificateRule, ConjugatedEnsemble};

/// Relative tolerance of the power iteration used for measured ratios.
pub const MEASURE_TOL: f64 = 1e-10;
const PREMISE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("column-sum premise fails at column {column}: f_m(M^-1 U) / ||U||_1 = {ratio}")]
    PremiseViolated { column: usize, ratio: f64 },
    #[error("entry ({row}, {col}) = {value:e} lies outside bandwidth {bandwidth}")]
    OutsideBand {
        row: usize,
        col: usize,
        value: f64,
        bandwidth: usize,
    },
    #[error("dimension {operator} does not match weight map dimension {weights}")]
    DimensionMismatch { operator: usize, weights: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Positive diagonal weights `w_k`; `M x = (w_k x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MConjugation {
    weights: Vec<f64>,
}

impl MConjugation {
    /// `w_k = 1 / k` for `k = 1..=dim`.
    pub fn harmonic(dim: usize) -> Self {
        MConjugation {
            weights: (1..=dim).map(|k| 1.0 / k as f64).collect(),
        }
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self, LinalgError> {
        if let Some(bad) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(LinalgError::Malformed(format!("weight {bad} is not positive")));
        }
        Ok(MConjugation { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check(&self, dim: usize) -> Result<(), CertificateError> {
        if dim != self.dim() {
            return Err(CertificateError::DimensionMismatch { operator: dim, weights: self.dim() });
        }
        Ok(())
    }

    fn scale_vector(&self, x: &TruncVector, invert: bool) -> Result<TruncVector, LinalgError> {
        if x.dim() != self.dim() {
            return Err(LinalgError::DimensionMismatch { left: self.dim(), right: x.dim() });
        }
        let w = |k: usize| if invert { 1.0 / self.weights[k] } else { self.weights[k] };
        Ok(match x {
            TruncVector::Real(v) => TruncVector::Real(ndarray::Array1::from_shape_fn(v.len(), |k| v[k] * w(k))),
            TruncVector::Complex(v) => {
                TruncVector::Complex(ndarray::Array1::from_shape_fn(v.len(), |k| v[k] * w(k)))
            }
        })
    }

    pub fn apply_m(&self, x: &TruncVector) -> Result<TruncVector, LinalgError> {
        self.scale_vector(x, false)
    }

    pub fn apply_m_inv(&self, x: &TruncVector) -> Result<TruncVector, LinalgError> {
        self.scale_vector(x, true)
    }

    fn conjugate_mat<S: Scalar>(&self, u: &Mat<S>) -> Mat<S> {
        let mut out = match u.storage() {
            Storage::Dense(_) => Mat::dense_zeros(u.dim()),
            Storage::Banded { bandwidth, .. } => Mat::banded_zeros(u.dim(), *bandwidth),
        };
        for (n, m, v) in u.entries() {
            let r = self.weights[m] / self.weights[n];
            out.set(n, m, v.scale(r)).expect("same pattern");
        }
        out
    }

    /// `{U}_M = M^{-1} U M`, entries `(w_m / w_n) u_nm`; the storage layout is kept.
    pub fn conjugate(&self, u: &TruncOperator) -> Result<TruncOperator, CertificateError> {
        self.check(u.dim())?;
        Ok(match u {
            TruncOperator::Real(a) => TruncOperator::Real(self.conjugate_mat(a)),
            TruncOperator::Complex(a) => TruncOperator::Complex(self.conjugate_mat(a)),
        })
    }

    /// `f_m(M^{-1} U) = sum_n |u_nm| / w_n`.
    pub fn weighted_column_sum(&self, u: &TruncOperator, m: usize) -> Result<f64, CertificateError> {
        self.check(u.dim())?;
        if m >= u.dim() {
            return Err(LinalgError::IndexOutOfRange { index: m, dim: u.dim() }.into());
        }
        Ok((0..u.dim()).map(|n| u.get(n, m).norm() / self.weights[n]).sum())
    }
}

/// The operator with every column equal to `(1, 1/2, 1/4, ...)`: `||U||_1 -> 2`
/// while `U` is unbounded on `l_2` as the dimension grows.
pub fn halving_columns_operator(dim: usize) -> TruncOperator {
    TruncOperator::Real(Mat::from_fn(dim, |n, _| 2f64.powi(-(n as i32))))
}

/// `max_k ||U x_k||_2` over the normalized indicators `x_k` of `{0, ..., k-1}`.
pub fn indicator_probe_ratio(u: &TruncOperator) -> Result<f64, LinalgError> {
    let dim = u.dim();
    let mut best = 0.0_f64;
    let mut x = vec![0.0; dim];
    for k in 1..=dim {
        x[k - 1] = 1.0;
        let scaled: Vec<f64> = x.iter().map(|v| v / (k as f64).sqrt()).collect();
        let y = u.apply(&TruncVector::from_real(scaled))?;
        best = best.max(y.norm(2.0)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Series,
    DDiagonal,
    Direct,
}

/// Certified membership `||{U}_M||_2 <= C ||U||_1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipCertificate {
    pub rule: RuleKind,
    pub d: usize,
    #[serde(rename = "C")]
    pub constant: f64,
    /// `||{U}_M||_2 / ||U||_1` with the numerator from power iteration (0 for `U = 0`).
    pub measured_ratio: f64,
    pub premise_checked: bool,
    #[serde(rename = "N")]
    pub dim: usize,
}

impl MembershipCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("certificate serializes")
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.measured_ratio <= self.constant * (1.0 + tol)
    }
}

pub fn series_constant(d: usize) -> f64 {
    PI * d as f64 / 6f64.sqrt()
}

pub fn banded_constant(d: usize) -> f64 {
    ((2 * d + 1) as f64).powi(3).sqrt()
}

/// Checks `f_m(M^{-1} U) <= d ||U||_1` for every column.
pub fn check_series_premise(m: &MConjugation, u: &TruncOperator, d: usize) -> Result<(), CertificateError> {
    let l1 = u.norm_l1();
    for col in 0..u.dim() {
        let f = m.weighted_column_sum(u, col)?;
        if f > d as f64 * l1 * (1.0 + PREMISE_SLACK) {
            let ratio = if l1 > 0.0 { f / l1 } else { f64::INFINITY };
            return Err(CertificateError::PremiseViolated { column: col, ratio });
        }
    }
    Ok(())
}

/// Checks that every entry with `|n - m| > d` vanishes.
pub fn check_band(u: &TruncOperator, d: usize) -> Result<(), CertificateError> {
    if u.bandwidth().is_some_and(|b| b <= d) {
        return Ok(());
    }
    let dim = u.dim();
    for n in 0..dim {
        for col in 0..dim {
            if n.abs_diff(col) > d {
                let v = u.get(n, col);
                if v != Complex64::new(0.0, 0.0) {
                    return Err(CertificateError::OutsideBand { row: n, col, value: v.norm(), bandwidth: d });
                }
            }
        }
    }
    Ok(())
}

/// `||{U}_M||_2 / ||U||_1`, reporting `0` for the zero operator.
pub fn measured_ratio(m: &MConjugation, u: &TruncOperator) -> Result<f64, CertificateError> {
    let l1 = u.norm_l1();
    if l1 == 0.0 {
        return Ok(0.0);
    }
    let conj = m.conjugate(u)?;
    let sigma = match &conj {
        TruncOperator::Real(a) => spectral_norm(a, MEASURE_TOL),
        TruncOperator::Complex(a) => spectral_norm(a, MEASURE_TOL),
    };
    let sigma = match sigma {
        Ok(s) => s,
        // the best iterate is still a valid lower estimate
        Err(LinalgError::NonConvergence { best, .. }) => best,
        Err(e) => return Err(e.into()),
    };
    Ok(sigma / l1)
}

/// Column-sum rule: the premise `f_m(M^{-1}U) <= d ||U||_1` gives `C = pi d / sqrt 6`.
pub fn series_certificate(
    m: &MConjugation,
    u: &TruncOperator,
    d: usize,
) -> Result<MembershipCertificate, CertificateError> {
    check_series_premise(m, u, d)?;
    Ok(MembershipCertificate {
        rule: RuleKind::Series,
        d,
        constant: series_constant(d),
        measured_ratio: measured_ratio(m, u)?,
        premise_checked: true,
        dim: u.dim(),
    })
}

/// Band rule: a `d`-diagonal `U` gives `C = sqrt((2d+1)^3)`.
pub fn d_diagonal_certificate(
    m: &MConjugation,
    u: &TruncOperator,
    d: usize,
) -> Result<MembershipCertificate, CertificateError> {
    check_band(u, d)?;
    Ok(MembershipCertificate {
        rule: RuleKind::DDiagonal,
        d,
        constant: banded_constant(d),
        measured_ratio: measured_ratio(m, u)?,
        premise_checked: true,
        dim: u.dim(),
    })
}

/// `max ||{U}_M x||_2 / (C ||U||_1)` over unit `l_2` probes; at most 1 when the certificate applies.
pub fn probe_ratio(
    m: &MConjugation,
    u: &TruncOperator,
    constant: f64,
    probes: &[TruncVector],
) -> Result<f64, CertificateError> {
    let conj = m.conjugate(u)?;
    let scale = constant * u.norm_l1();
    let mut worst = 0.0_f64;
    for x in probes {
        let y = conj.apply(x)?.norm(2.0)? / x.norm(2.0)?;
        if y > 0.0 {
            worst = worst.max(if scale > 0.0 { y / scale } else { f64::INFINITY });
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp_core::Field;

    #[test]
    fn weights_round_trip() {
        let m = MConjugation::harmonic(6);
        let e0 = TruncVector::basis(6, 0).unwrap();
        assert_eq!(m.apply_m(&e0).unwrap(), e0);
        let e3 = TruncVector::basis(6, 3).unwrap();
        assert_eq!(m.apply_m(&e3).unwrap().get(3).re, 0.25);
        let x = TruncVector::from_real(vec![1.5, -2.0, 3.0, 0.1, 7.0, -1.0]);
        let back = m.apply_m_inv(&m.apply_m(&x).unwrap()).unwrap();
        assert!(back.sub(&x).unwrap().norm(f64::INFINITY).unwrap() < 1e-15);
    }

    #[test]
    fn harmonic_sum() {
        let dim = 50;
        let m = MConjugation::harmonic(dim);
        let ones = TruncVector::from_real(vec![1.0; dim]);
        let h: f64 = (1..=dim).map(|k| 1.0 / k as f64).sum();
        assert!((m.apply_m(&ones).unwrap().norm(1.0).unwrap() - h).abs() < 1e-13);
    }

    #[test]
    fn diagonal_is_fixed() {
        let u = TruncOperator::diagonal_real(&[1.0, -2.0, 0.5]);
        let m = MConjugation::harmonic(3);
        assert_eq!(m.conjugate(&u).unwrap(), u);
    }

    #[test]
    fn conjugate_entries() {
        let m = MConjugation::harmonic(4);
        let u = TruncOperator::ket_bra(4, 3, 1).unwrap();
        // (w_1 / w_3) = (1/2) / (1/4) = 2
        assert_eq!(m.conjugate(&u).unwrap().get(3, 1).re, 2.0);
    }

    #[test]
    fn constants() {
        assert_eq!(banded_constant(0), 1.0);
        assert!((banded_constant(1) - 27f64.sqrt()).abs() < 1e-15);
        assert!((series_constant(2) - 2.0 * PI / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_operator_series() {
        let z = TruncOperator::zeros(5, Field::Real);
        let cert = series_certificate(&MConjugation::harmonic(5), &z, 0).unwrap();
        assert_eq!(cert.constant, 0.0);
        assert_eq!(cert.measured_ratio, 0.0);
    }

    #[test]
    fn diagonal_premise_fails() {
        let dim = 40;
        let u = TruncOperator::diagonal_real(&vec![1.0; dim]);
        let err = series_certificate(&MConjugation::harmonic(dim), &u, 3).unwrap_err();
        // f_m(M^-1 U) = m + 1 exceeds 3 ||U||_1 = 3 first at storage column 3
        assert_eq!(err, CertificateError::PremiseViolated { column: 3, ratio: 4.0 });
    }

    #[test]
    fn band_violation_is_reported() {
        let u = TruncOperator::ket_bra(6, 0, 3).unwrap();
        let err = d_diagonal_certificate(&MConjugation::harmonic(6), &u, 2).unwrap_err();
        assert!(matches!(err, CertificateError::OutsideBand { row: 0, col: 3, .. }));
        assert!(d_diagonal_certificate(&MConjugation::harmonic(6), &u, 3).is_ok());
    }

    #[test]
    fn diagonal_certificate_ratio() {
        let u = TruncOperator::diagonal_real(&[0.5, -3.0, 2.0, 1.0]);
        let cert = d_diagonal_certificate(&MConjugation::harmonic(4), &u, 0).unwrap();
        assert_eq!(cert.constant, 1.0);
        assert!(cert.holds(1e-9));
        let json: serde_json::Value = serde_json::from_str(&cert.to_json()).unwrap();
        assert_eq!(json["rule"], "d_diagonal");
        assert_eq!(json["premise_checked"], true);
        assert_eq!(json["N"], 4);
    }

    proptest::proptest! {
        #[test]
        fn conjugation_is_a_homomorphism(
            u in proptest::collection::vec(-1.0f64..1.0, 25),
            v in proptest::collection::vec(-1.0f64..1.0, 25),
        ) {
            let op = |e: Vec<f64>| TruncOperator::from_real_dense(ndarray::Array2::from_shape_vec((5, 5), e).unwrap()).unwrap();
            let (u, v) = (op(u), op(v));
            let m = MConjugation::harmonic(5);
            let product = m.conjugate(&u.compose(&v).unwrap()).unwrap();
            let composed = m.conjugate(&u).unwrap().compose(&m.conjugate(&v).unwrap()).unwrap();
            proptest::prop_assert!(product.max_abs_diff(&composed) <= 1e-12);
            let sum = m.conjugate(&u.add(&v).unwrap()).unwrap();
            let summed = m.conjugate(&u).unwrap().add(&m.conjugate(&v).unwrap()).unwrap();
            proptest::prop_assert!(sum.max_abs_diff(&summed) <= 1e-14);
        }
    }
}
