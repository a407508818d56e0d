use ndarray::Array2;
use num_complex::Complex64;

use super::error::LinalgError;
use super::matrix::Mat;
use super::scalar::{Field, Scalar};
use super::vector::TruncVector;

/// An `N x N` truncation of an infinite operator matrix over either field.
#[derive(Debug, Clone, PartialEq)]
pub enum TruncOperator {
    Real(Mat<f64>),
    Complex(Mat<Complex64>),
}

macro_rules! on_both {
    ($op:expr, |$m:ident| $body:expr) => {
        match $op {
            TruncOperator::Real($m) => $body,
            TruncOperator::Complex($m) => $body,
        }
    };
}

macro_rules! binary {
    ($a:expr, $b:expr, |$x:ident, $y:ident| $body:expr) => {
        match ($a, $b) {
            (TruncOperator::Real($x), TruncOperator::Real($y)) => Ok(TruncOperator::Real($body?)),
            (a, b) => {
                let $x = &a.to_complex_mat();
                let $y = &b.to_complex_mat();
                Ok(TruncOperator::Complex($body?))
            }
        }
    };
}

impl From<Mat<f64>> for TruncOperator {
    fn from(m: Mat<f64>) -> Self {
        TruncOperator::Real(m)
    }
}

impl From<Mat<Complex64>> for TruncOperator {
    fn from(m: Mat<Complex64>) -> Self {
        TruncOperator::Complex(m)
    }
}

impl TruncOperator {
    pub fn identity(dim: usize) -> Self {
        TruncOperator::Real(Mat::identity(dim))
    }

    pub fn zeros(dim: usize, field: Field) -> Self {
        match field {
            Field::Real => TruncOperator::Real(Mat::zeros(dim)),
            Field::Complex => TruncOperator::Complex(Mat::zeros(dim)),
        }
    }

    /// `|n><m|`: a single unit entry at row `n`, column `m`.
    pub fn ket_bra(dim: usize, n: usize, m: usize) -> Result<Self, LinalgError> {
        Self::scaled_ket_bra(dim, n, m, 1.0)
    }

    pub fn scaled_ket_bra(dim: usize, n: usize, m: usize, value: f64) -> Result<Self, LinalgError> {
        for idx in [n, m] {
            if idx >= dim {
                return Err(LinalgError::IndexOutOfRange { index: idx, dim });
            }
        }
        let d = n.abs_diff(m);
        let mut mat = if super::matrix::prefers_banded(dim, d) {
            Mat::banded_zeros(dim, d)
        } else {
            Mat::dense_zeros(dim)
        };
        mat.set(n, m, value)?;
        Ok(TruncOperator::Real(mat))
    }

    pub fn from_real_dense(a: Array2<f64>) -> Result<Self, LinalgError> {
        Ok(TruncOperator::Real(Mat::from_dense(a)?))
    }

    pub fn from_complex_dense(a: Array2<Complex64>) -> Result<Self, LinalgError> {
        Ok(TruncOperator::Complex(Mat::from_dense(a)?))
    }

    pub fn diagonal_real(diag: &[f64]) -> Self {
        TruncOperator::Real(Mat::from_diagonal(diag))
    }

    pub fn diagonal_complex(diag: &[Complex64]) -> Self {
        TruncOperator::Complex(Mat::from_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        on_both!(self, |m| m.dim())
    }

    pub fn field(&self) -> Field {
        match self {
            TruncOperator::Real(_) => Field::Real,
            TruncOperator::Complex(_) => Field::Complex,
        }
    }

    pub fn bandwidth(&self) -> Option<usize> {
        on_both!(self, |m| m.bandwidth())
    }

    pub fn occupied_bandwidth(&self) -> usize {
        on_both!(self, |m| m.occupied_bandwidth())
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        match self {
            TruncOperator::Real(a) => Complex64::new(a.get(n, m), 0.0),
            TruncOperator::Complex(a) => a.get(n, m),
        }
    }

    pub fn as_real(&self) -> Option<&Mat<f64>> {
        match self {
            TruncOperator::Real(m) => Some(m),
            TruncOperator::Complex(_) => None,
        }
    }

    pub fn to_complex_mat(&self) -> Mat<Complex64> {
        match self {
            TruncOperator::Real(m) => m.map_entries(|v| Complex64::new(v, 0.0)),
            TruncOperator::Complex(m) => m.clone(),
        }
    }

    /// Same operator stored over the complex field.
    pub fn promoted(&self, field: Field) -> TruncOperator {
        match (self, field) {
            (TruncOperator::Real(_), Field::Complex) => TruncOperator::Complex(self.to_complex_mat()),
            _ => self.clone(),
        }
    }

    /// Entries as `S`; fails when complex data is requested as real.
    pub fn to_scalar_mat<S: Scalar>(&self) -> Result<Mat<S>, LinalgError> {
        match (self, S::FIELD) {
            (TruncOperator::Real(m), _) => Ok(m.map_entries(S::from_real)),
            (TruncOperator::Complex(m), Field::Complex) => {
                Ok(m.map_entries(|v| S::from_complex(v).expect("complex target")))
            }
            (TruncOperator::Complex(_), Field::Real) => Err(LinalgError::FieldMismatch),
        }
    }

    pub fn to_dense_complex(&self) -> Array2<Complex64> {
        self.to_complex_mat().into_dense()
    }

    pub fn with_layout_rule(self) -> Self {
        match self {
            TruncOperator::Real(m) => TruncOperator::Real(m.with_layout_rule()),
            TruncOperator::Complex(m) => TruncOperator::Complex(m.with_layout_rule()),
        }
    }

    pub fn is_finite(&self) -> bool {
        on_both!(self, |m| m.is_finite())
    }

    pub fn apply(&self, x: &TruncVector) -> Result<TruncVector, LinalgError> {
        match (self, x) {
            (TruncOperator::Real(a), TruncVector::Real(v)) => Ok(TruncVector::Real(a.apply(v.view())?)),
            _ => {
                let a = self.to_complex_mat();
                Ok(TruncVector::Complex(a.apply(x.to_complex().view())?))
            }
        }
    }

    /// `self * other` (apply `other` first).
    pub fn compose(&self, other: &TruncOperator) -> Result<TruncOperator, LinalgError> {
        binary!(self, other, |a, b| a.compose(b))
    }

    pub fn add(&self, other: &TruncOperator) -> Result<TruncOperator, LinalgError> {
        binary!(self, other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &TruncOperator) -> Result<TruncOperator, LinalgError> {
        binary!(self, other, |a, b| a.sub(b))
    }

    pub fn scale_real(&self, c: f64) -> TruncOperator {
        match self {
            TruncOperator::Real(m) => TruncOperator::Real(m.scale(c)),
            TruncOperator::Complex(m) => TruncOperator::Complex(m.scale(Complex64::new(c, 0.0))),
        }
    }

    pub fn scale(&self, c: Complex64) -> TruncOperator {
        if c.im == 0.0 {
            return self.scale_real(c.re);
        }
        TruncOperator::Complex(self.to_complex_mat().scale(c))
    }

    /// Conjugate transpose on the truncation.
    pub fn adjoint(&self) -> TruncOperator {
        match self {
            TruncOperator::Real(m) => TruncOperator::Real(m.adjoint()),
            TruncOperator::Complex(m) => TruncOperator::Complex(m.adjoint()),
        }
    }

    /// `f_m(U) = sum_n |u_nm|` for 0-based column `m`.
    pub fn column_abs_sum(&self, m: usize) -> Result<f64, LinalgError> {
        if m >= self.dim() {
            return Err(LinalgError::IndexOutOfRange { index: m, dim: self.dim() });
        }
        Ok(on_both!(self, |a| a.column_abs_sum(m)))
    }

    pub fn norm_l1(&self) -> f64 {
        on_both!(self, |m| m.norm_l1())
    }

    pub fn norm_linf(&self) -> f64 {
        on_both!(self, |m| m.norm_linf())
    }

    pub fn frobenius(&self) -> f64 {
        on_both!(self, |m| m.frobenius())
    }

    pub fn max_abs(&self) -> f64 {
        on_both!(self, |m| m.max_abs())
    }

    pub fn max_abs_diff(&self, other: &TruncOperator) -> f64 {
        match (self, other) {
            (TruncOperator::Real(a), TruncOperator::Real(b)) => a.max_abs_diff(b),
            _ => self.to_complex_mat().max_abs_diff(&other.to_complex_mat()),
        }
    }

    /// `n`-th power by binary powering.
    pub fn power(&self, n: u64) -> TruncOperator {
        let mut result = TruncOperator::identity(self.dim()).promoted(self.field());
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.compose(&base).expect("same dimension");
            }
            e >>= 1;
            if e > 0 {
                base = base.compose(&base).expect("same dimension");
            }
        }
        result
    }
}
