use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, Neg, SubAssign};

use ndarray::LinalgScalar;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Ground field of a truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    /// Smallest field containing both.
    pub fn join(self, other: Field) -> Field {
        if self == Field::Complex || other == Field::Complex {
            Field::Complex
        } else {
            Field::Real
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }
}

impl std::str::FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            other => Err(format!("unknown field `{other}` (expected real|complex)")),
        }
    }
}

/// Entry type of the generic kernels: `f64` or `Complex64`.
pub trait Scalar:
    LinalgScalar
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + PartialEq
    + Debug
    + Send
    + Sync
{
    const FIELD: Field;

    fn from_real(v: f64) -> Self;
    /// `None` when `v` has a nonzero imaginary part and `Self` is real.
    fn from_complex(v: Complex64) -> Option<Self>;
    fn modulus(self) -> f64;
    fn modulus_sqr(self) -> f64;
    fn conjugate(self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn to_complex(self) -> Complex64;
    fn is_finite(self) -> bool;
    fn exp(self) -> Self;
}

impl Scalar for f64 {
    const FIELD: Field = Field::Real;

    fn from_real(v: f64) -> Self {
        v
    }
    fn from_complex(v: Complex64) -> Option<Self> {
        (v.im == 0.0).then_some(v.re)
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn modulus_sqr(self) -> f64 {
        self * self
    }
    fn conjugate(self) -> Self {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

impl Scalar for Complex64 {
    const FIELD: Field = Field::Complex;

    fn from_real(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn from_complex(v: Complex64) -> Option<Self> {
        Some(v)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn modulus_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn conjugate(self) -> Self {
        self.conj()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
}
