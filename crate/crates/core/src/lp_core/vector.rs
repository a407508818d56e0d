use ndarray::Array1;
use num_complex::Complex64;

use super::error::LinalgError;
use super::scalar::{Field, Scalar};

/// A length-`N` truncation of a sequence in l_p. Storage is 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum TruncVector {
    Real(Array1<f64>),
    Complex(Array1<Complex64>),
}

impl TruncVector {
    pub fn zeros(dim: usize, field: Field) -> Self {
        match field {
            Field::Real => TruncVector::Real(Array1::zeros(dim)),
            Field::Complex => TruncVector::Complex(Array1::zeros(dim)),
        }
    }

    /// Unit vector `e_k` (0-based `k`).
    pub fn basis(dim: usize, k: usize) -> Result<Self, LinalgError> {
        if k >= dim {
            return Err(LinalgError::IndexOutOfRange { index: k, dim });
        }
        let mut v = Array1::zeros(dim);
        v[k] = 1.0;
        Ok(TruncVector::Real(v))
    }

    pub fn from_real(values: Vec<f64>) -> Self {
        TruncVector::Real(Array1::from(values))
    }

    pub fn from_complex(values: Vec<Complex64>) -> Self {
        TruncVector::Complex(Array1::from(values))
    }

    pub fn dim(&self) -> usize {
        match self {
            TruncVector::Real(v) => v.len(),
            TruncVector::Complex(v) => v.len(),
        }
    }

    pub fn field(&self) -> Field {
        match self {
            TruncVector::Real(_) => Field::Real,
            TruncVector::Complex(_) => Field::Complex,
        }
    }

    pub fn get(&self, k: usize) -> Complex64 {
        match self {
            TruncVector::Real(v) => Complex64::new(v[k], 0.0),
            TruncVector::Complex(v) => v[k],
        }
    }

    pub fn to_complex(&self) -> Array1<Complex64> {
        match self {
            TruncVector::Real(v) => v.mapv(|x| Complex64::new(x, 0.0)),
            TruncVector::Complex(v) => v.clone(),
        }
    }

    /// Entries converted to `S`; fails for complex data requested as real.
    pub fn to_scalar<S: Scalar>(&self) -> Result<Array1<S>, LinalgError> {
        let mut out = Array1::zeros(self.dim());
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = S::from_complex(self.get(k)).ok_or(LinalgError::FieldMismatch)?;
        }
        Ok(out)
    }

    pub fn check_finite(&self) -> Result<(), LinalgError> {
        let bad = match self {
            TruncVector::Real(v) => v.iter().position(|x| !x.is_finite()),
            TruncVector::Complex(v) => v.iter().position(|x| !x.is_finite()),
        };
        match bad {
            Some(k) => Err(LinalgError::NonFinite(k)),
            None => Ok(()),
        }
    }

    pub fn norm(&self, p: f64) -> Result<f64, LinalgError> {
        lp_norm(self, p)
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            TruncVector::Real(v) => TruncVector::Real(v * c),
            TruncVector::Complex(v) => TruncVector::Complex(v * Complex64::new(c, 0.0)),
        }
    }

    pub fn sub(&self, other: &TruncVector) -> Result<TruncVector, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(match (self, other) {
            (TruncVector::Real(a), TruncVector::Real(b)) => TruncVector::Real(a - b),
            _ => TruncVector::Complex(self.to_complex() - other.to_complex()),
        })
    }
}

pub(crate) fn check_norm_index(p: f64) -> Result<(), LinalgError> {
    if p.is_nan() || p < 1.0 {
        Err(LinalgError::InvalidNormIndex(p))
    } else {
        Ok(())
    }
}

/// `(sum |x_k|^p)^(1/p)`, or `max |x_k|` for `p = inf`.
pub fn lp_norm(x: &TruncVector, p: f64) -> Result<f64, LinalgError> {
    check_norm_index(p)?;
    x.check_finite()?;
    Ok(match x {
        TruncVector::Real(v) => lp_norm_slice(v.as_slice().expect("contiguous"), p),
        TruncVector::Complex(v) => lp_norm_slice(v.as_slice().expect("contiguous"), p),
    })
}

/// Unchecked kernel behind [`lp_norm`]; `p >= 1` is assumed.
pub fn lp_norm_slice<S: Scalar>(xs: &[S], p: f64) -> f64 {
    lp_norm_iter(xs.iter().map(|x| x.modulus()), p)
}

pub(crate) fn lp_norm_iter(mags: impl Iterator<Item = f64> + Clone, p: f64) -> f64 {
    let max = mags.clone().fold(0.0_f64, f64::max);
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    if p == 1.0 {
        return mags.sum();
    }
    if p == 2.0 {
        return max * mags.map(|m| (m / max) * (m / max)).sum::<f64>().sqrt();
    }
    max * mags.map(|m| (m / max).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Hoelder conjugate exponent: `1/p + 1/q = 1`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}
