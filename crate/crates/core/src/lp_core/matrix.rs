use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::error::LinalgError;
use super::scalar::Scalar;

/// Storage of an `N x N` truncation. Banded storage keeps rows of the band:
/// entry `(n, m)` with `|n - m| <= d` lives at `band[[n, m + d - n]]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Storage<S> {
    Dense(Array2<S>),
    Banded { bandwidth: usize, band: Array2<S> },
}

/// Generic square matrix kernel. Row index is the output coordinate:
/// `(Ux)_n = sum_m u[n][m] x[m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S> {
    dim: usize,
    storage: Storage<S>,
}

/// Banded storage is preferred when `8 * bandwidth <= N`.
pub fn prefers_banded(dim: usize, bandwidth: usize) -> bool {
    bandwidth.saturating_mul(8) <= dim
}

fn mismatch(left: usize, right: usize) -> Result<(), LinalgError> {
    if left == right {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { left, right })
    }
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(dim: usize) -> Self {
        Self::banded_zeros(dim, 0)
    }

    pub fn dense_zeros(dim: usize) -> Self {
        Mat {
            dim,
            storage: Storage::Dense(Array2::zeros((dim, dim))),
        }
    }

    pub fn banded_zeros(dim: usize, bandwidth: usize) -> Self {
        let bandwidth = bandwidth.min(dim.saturating_sub(1));
        Mat {
            dim,
            storage: Storage::Banded {
                bandwidth,
                band: Array2::zeros((dim, 2 * bandwidth + 1)),
            },
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![S::one(); dim])
    }

    pub fn from_diagonal(diag: &[S]) -> Self {
        let mut m = Self::banded_zeros(diag.len(), 0);
        if let Storage::Banded { band, .. } = &mut m.storage {
            for (k, &v) in diag.iter().enumerate() {
                band[[k, 0]] = v;
            }
        }
        m
    }

    pub fn from_dense(a: Array2<S>) -> Result<Self, LinalgError> {
        mismatch(a.nrows(), a.ncols())?;
        Ok(Mat {
            dim: a.nrows(),
            storage: Storage::Dense(a),
        })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        Mat {
            dim,
            storage: Storage::Dense(Array2::from_shape_fn((dim, dim), |(n, m)| f(n, m))),
        }
    }

    /// Banded matrix from a generator evaluated only inside the band.
    pub fn banded_from_fn(dim: usize, bandwidth: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut out = Self::banded_zeros(dim, bandwidth);
        let d = out.bandwidth().unwrap_or(0);
        if let Storage::Banded { band, .. } = &mut out.storage {
            for n in 0..dim {
                for m in n.saturating_sub(d)..(n + d + 1).min(dim) {
                    band[[n, m + d - n]] = f(n, m);
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn storage(&self) -> &Storage<S> {
        &self.storage
    }

    /// Storage bandwidth, `None` for dense storage.
    pub fn bandwidth(&self) -> Option<usize> {
        match &self.storage {
            Storage::Dense(_) => None,
            Storage::Banded { bandwidth, .. } => Some(*bandwidth),
        }
    }

    pub fn get(&self, n: usize, m: usize) -> S {
        assert!(n < self.dim && m < self.dim, "entry ({n}, {m}) outside {}x{}", self.dim, self.dim);
        match &self.storage {
            Storage::Dense(a) => a[[n, m]],
            Storage::Banded { bandwidth, band } => {
                let d = *bandwidth;
                if n.abs_diff(m) > d {
                    S::zero()
                } else {
                    band[[n, m + d - n]]
                }
            }
        }
    }

    pub fn set(&mut self, n: usize, m: usize, value: S) -> Result<(), LinalgError> {
        for idx in [n, m] {
            if idx >= self.dim {
                return Err(LinalgError::IndexOutOfRange { index: idx, dim: self.dim });
            }
        }
        match &mut self.storage {
            Storage::Dense(a) => a[[n, m]] = value,
            Storage::Banded { bandwidth, band } => {
                let d = *bandwidth;
                if n.abs_diff(m) > d {
                    if value == S::zero() {
                        return Ok(());
                    }
                    return Err(LinalgError::OutsideBand { row: n, col: m, bandwidth: d });
                }
                band[[n, m + d - n]] = value;
            }
        }
        Ok(())
    }

    /// Stored entries inside the structural pattern, as `(row, col, value)`.
    pub fn entries(&self) -> Vec<(usize, usize, S)> {
        let mut out = Vec::new();
        match &self.storage {
            Storage::Dense(a) => {
                for ((n, m), &v) in a.indexed_iter() {
                    out.push((n, m, v));
                }
            }
            Storage::Banded { bandwidth, band } => {
                let d = *bandwidth;
                for n in 0..self.dim {
                    for m in n.saturating_sub(d)..(n + d + 1).min(self.dim) {
                        out.push((n, m, band[[n, m + d - n]]));
                    }
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<S> {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Banded { .. } => {
                let mut a = Array2::zeros((self.dim, self.dim));
                for (n, m, v) in self.entries() {
                    a[[n, m]] = v;
                }
                a
            }
        }
    }

    pub fn into_dense(self) -> Array2<S> {
        match self.storage {
            Storage::Dense(a) => a,
            _ => self.to_dense(),
        }
    }

    /// Largest `|n - m|` over nonzero entries.
    pub fn occupied_bandwidth(&self) -> usize {
        self.entries()
            .into_iter()
            .filter(|(_, _, v)| *v != S::zero())
            .map(|(n, m, _)| n.abs_diff(m))
            .max()
            .unwrap_or(0)
    }

    /// Re-store according to the occupied bandwidth: banded if `8d <= N`.
    pub fn with_layout_rule(self) -> Self {
        let d = self.occupied_bandwidth();
        if prefers_banded(self.dim, d) {
            if self.bandwidth() == Some(d) {
                return self;
            }
            let src = self;
            Self::banded_from_fn(src.dim, d, |n, m| src.get(n, m))
        } else if self.bandwidth().is_some() {
            let dim = self.dim;
            Mat {
                dim,
                storage: Storage::Dense(self.to_dense()),
            }
        } else {
            self
        }
    }

    pub fn map_entries<T: Scalar>(&self, f: impl Fn(S) -> T) -> Mat<T> {
        Mat {
            dim: self.dim,
            storage: match &self.storage {
                Storage::Dense(a) => Storage::Dense(a.mapv(f)),
                Storage::Banded { bandwidth, band } => Storage::Banded {
                    bandwidth: *bandwidth,
                    band: band.mapv(f),
                },
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.storage {
            Storage::Dense(a) => a.iter().all(|v| v.is_finite()),
            Storage::Banded { band, .. } => band.iter().all(|v| v.is_finite()),
        }
    }

    pub fn apply(&self, x: ArrayView1<S>) -> Result<Array1<S>, LinalgError> {
        mismatch(self.dim, x.len())?;
        Ok(match &self.storage {
            Storage::Dense(a) => a.dot(&x),
            Storage::Banded { bandwidth, band } => {
                let d = *bandwidth;
                Array1::from_shape_fn(self.dim, |n| {
                    let mut acc = S::zero();
                    for m in n.saturating_sub(d)..(n + d + 1).min(self.dim) {
                        acc += band[[n, m + d - n]] * x[m];
                    }
                    acc
                })
            }
        })
    }

    /// `U X` for a block of column vectors `X` (shape `N x G`).
    pub fn apply_block(&self, x: &Array2<S>) -> Result<Array2<S>, LinalgError> {
        mismatch(self.dim, x.nrows())?;
        Ok(match &self.storage {
            Storage::Dense(a) => a.dot(x),
            Storage::Banded { bandwidth, band } => band_times_dense(self.dim, *bandwidth, band, x),
        })
    }

    pub fn compose(&self, other: &Mat<S>) -> Result<Mat<S>, LinalgError> {
        mismatch(self.dim, other.dim)?;
        let dim = self.dim;
        Ok(match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Mat {
                dim,
                storage: Storage::Dense(a.dot(b)),
            },
            (Storage::Banded { bandwidth: d1, band: b1 }, Storage::Banded { bandwidth: d2, .. }) => {
                let d = (d1 + d2).min(dim.saturating_sub(1));
                if prefers_banded(dim, d) {
                    let (d1, d2) = (*d1, *d2);
                    Self::banded_from_fn(dim, d, |n, m| {
                        let lo = n.saturating_sub(d1).max(m.saturating_sub(d2));
                        let hi = (n + d1).min(m + d2).min(dim - 1);
                        let mut acc = S::zero();
                        for k in lo..=hi {
                            acc += b1[[n, k + d1 - n]] * other.get(k, m);
                        }
                        acc
                    })
                } else {
                    Mat {
                        dim,
                        storage: Storage::Dense(band_times_dense(dim, *d1, b1, &other.to_dense())),
                    }
                }
            }
            (Storage::Banded { bandwidth, band }, Storage::Dense(b)) => Mat {
                dim,
                storage: Storage::Dense(band_times_dense(dim, *bandwidth, band, b)),
            },
            (Storage::Dense(a), Storage::Banded { bandwidth, band }) => {
                let d = *bandwidth;
                let mut out = Array2::zeros((dim, dim));
                for k in 0..dim {
                    let col = a.column(k);
                    for m in k.saturating_sub(d)..(k + d + 1).min(dim) {
                        let v = band[[k, m + d - k]];
                        if v == S::zero() {
                            continue;
                        }
                        let mut target = out.column_mut(m);
                        target.scaled_add(v, &col);
                    }
                }
                Mat {
                    dim,
                    storage: Storage::Dense(out),
                }
            }
        })
    }

    fn combine(&self, other: &Mat<S>, sign: S) -> Result<Mat<S>, LinalgError> {
        mismatch(self.dim, other.dim)?;
        let dim = self.dim;
        Ok(match (&self.storage, &other.storage) {
            (Storage::Banded { bandwidth: d1, .. }, Storage::Banded { bandwidth: d2, .. }) => {
                Self::banded_from_fn(dim, (*d1).max(*d2), |n, m| self.get(n, m) + sign * other.get(n, m))
            }
            _ => {
                let mut a = self.to_dense();
                a.scaled_add(sign, &other.to_dense());
                Mat {
                    dim,
                    storage: Storage::Dense(a),
                }
            }
        })
    }

    pub fn add(&self, other: &Mat<S>) -> Result<Mat<S>, LinalgError> {
        self.combine(other, S::one())
    }

    pub fn sub(&self, other: &Mat<S>) -> Result<Mat<S>, LinalgError> {
        self.combine(other, -S::one())
    }

    pub fn scale(&self, c: S) -> Mat<S> {
        self.map_entries(|v| v * c)
    }

    /// In-place `self += c * other`.
    pub fn axpy(&mut self, c: S, other: &Mat<S>) -> Result<(), LinalgError> {
        *self = self.combine(&other.scale(c), S::one())?;
        Ok(())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Mat<S> {
        match &self.storage {
            Storage::Dense(a) => Mat {
                dim: self.dim,
                storage: Storage::Dense(a.t().mapv(|v| v.conjugate())),
            },
            Storage::Banded { bandwidth, .. } => {
                Self::banded_from_fn(self.dim, *bandwidth, |n, m| self.get(m, n).conjugate())
            }
        }
    }

    /// `f_m(U) = sum_n |u[n][m]|`.
    pub fn column_abs_sum(&self, m: usize) -> f64 {
        self.column_norm(m, 1.0)
    }

    /// l_q norm of column `m`, i.e. `||U e_m||_q`.
    pub fn column_norm(&self, m: usize, q: f64) -> f64 {
        let rows = match self.bandwidth() {
            Some(d) => m.saturating_sub(d)..(m + d + 1).min(self.dim),
            None => 0..self.dim,
        };
        super::vector::lp_norm_iter(rows.map(|n| self.get(n, m).modulus()), q)
    }

    pub fn row_abs_sum(&self, n: usize) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a.row(n).iter().map(|v| v.modulus()).sum(),
            Storage::Banded { band, .. } => band.row(n).iter().map(|v| v.modulus()).sum(),
        }
    }

    /// Exact induced l_1 norm: the largest column sum.
    pub fn norm_l1(&self) -> f64 {
        (0..self.dim).map(|m| self.column_abs_sum(m)).fold(0.0, f64::max)
    }

    /// Exact induced l_inf norm: the largest row sum.
    pub fn norm_linf(&self) -> f64 {
        (0..self.dim).map(|n| self.row_abs_sum(n)).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        let sq: f64 = match &self.storage {
            Storage::Dense(a) => a.iter().map(|v| v.modulus_sqr()).sum(),
            Storage::Banded { band, .. } => band.iter().map(|v| v.modulus_sqr()).sum(),
        };
        sq.sqrt()
    }

    pub fn max_abs_diff(&self, other: &Mat<S>) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff dimension mismatch");
        let a = self.to_dense();
        let b = other.to_dense();
        a.iter().zip(b.iter()).map(|(x, y)| (*x - *y).modulus()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a.iter().map(|v| v.modulus()).fold(0.0, f64::max),
            Storage::Banded { band, .. } => band.iter().map(|v| v.modulus()).fold(0.0, f64::max),
        }
    }

    pub fn diagonal(&self) -> Vec<S> {
        (0..self.dim).map(|k| self.get(k, k)).collect()
    }
}

/// `B X` where `B` is banded (half-bandwidth `d`) and `X` is dense `N x G`.
fn band_times_dense<S: Scalar>(dim: usize, d: usize, band: &Array2<S>, x: &Array2<S>) -> Array2<S> {
    let mut out = Array2::zeros((dim, x.ncols()));
    for n in 0..dim {
        let mut row = out.row_mut(n);
        for m in n.saturating_sub(d)..(n + d + 1).min(dim) {
            let v = band[[n, m + d - n]];
            if v != S::zero() {
                row.scaled_add(v, &x.index_axis(Axis(0), m));
            }
        }
    }
    out
}
