//! Matrix exponential by scaling and squaring with a truncated Taylor core.
//!
//! The argument is scaled so that `||B||_1 = ||A||_1 t / 2^s <= 1/2`, and the
//! Taylor degree `m` is the smallest one whose truncation error, read as a
//! backward perturbation `T_m(B) = exp(B + dB)`, satisfies
//! `||dB||_1 <= tol * ||B||_1`. Squaring preserves that relative backward bound.

use ndarray::{Array1, Array2};

use super::error::LinalgError;
use super::matrix::Mat;
use super::operator::TruncOperator;
use super::scalar::Scalar;
use super::vector::TruncVector;

/// Largest admissible `||A||_1 t`; beyond it `exp` overflows f64 norms.
pub const EXP_ARGUMENT_CAP: f64 = 700.0;

const SCALED_NORM_TARGET: f64 = 0.5;
const MAX_TAYLOR_DEGREE: usize = 60;

/// Smallest Taylor degree with relative backward error `<= tol` at `||B|| = theta`.
pub fn taylor_degree(theta: f64, tol: f64) -> usize {
    if theta == 0.0 {
        return 0;
    }
    let mut term = theta; // theta^(m+1)/(m+1)! at m = 0
    for m in 1..=MAX_TAYLOR_DEGREE {
        term *= theta / (m as f64 + 1.0);
        let tail = term / (1.0 - theta / (m as f64 + 2.0));
        let forward = theta.exp() * tail;
        if forward < 1.0 && forward / (1.0 - forward) <= tol * theta {
            return m;
        }
    }
    MAX_TAYLOR_DEGREE
}

fn validate(t: f64, tol: f64) -> Result<(), LinalgError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(LinalgError::NegativeTime(t));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(LinalgError::InvalidTolerance(tol));
    }
    Ok(())
}

/// `exp(A t)` for `t >= 0`.
pub fn matexp(a: &TruncOperator, t: f64, tol: f64) -> Result<TruncOperator, LinalgError> {
    Ok(match a {
        TruncOperator::Real(m) => TruncOperator::Real(m.expm(t, tol)?),
        TruncOperator::Complex(m) => TruncOperator::Complex(m.expm(t, tol)?),
    })
}

/// `exp(A t) x` without forming `exp(A t)`.
pub fn matexp_apply(a: &TruncOperator, t: f64, x: &TruncVector, tol: f64) -> Result<TruncVector, LinalgError> {
    if a.dim() != x.dim() {
        return Err(LinalgError::DimensionMismatch { left: a.dim(), right: x.dim() });
    }
    match (a, x) {
        (TruncOperator::Real(m), TruncVector::Real(v)) => {
            let mut block = v.clone().insert_axis(ndarray::Axis(1));
            m.expm_apply_block(&[t], &mut block, tol)?;
            Ok(TruncVector::Real(block.column(0).to_owned()))
        }
        _ => {
            let m = a.to_complex_mat();
            let mut block = x.to_complex().insert_axis(ndarray::Axis(1));
            m.expm_apply_block(&[t], &mut block, tol)?;
            Ok(TruncVector::Complex(block.column(0).to_owned()))
        }
    }
}

impl<S: Scalar> Mat<S> {
    pub fn expm(&self, t: f64, tol: f64) -> Result<Mat<S>, LinalgError> {
        validate(t, tol)?;
        let dim = self.dim();
        let arg = self.norm_l1() * t;
        if arg > EXP_ARGUMENT_CAP {
            return Err(LinalgError::Overflow { value: arg, cap: EXP_ARGUMENT_CAP });
        }
        if arg == 0.0 {
            return Ok(Mat::identity(dim));
        }
        if self.occupied_bandwidth() == 0 {
            let diag: Vec<S> = self.diagonal().into_iter().map(|v| v.scale(t).exp()).collect();
            return Ok(Mat::from_diagonal(&diag));
        }
        let squarings = if arg > SCALED_NORM_TARGET {
            (arg / SCALED_NORM_TARGET).log2().ceil() as i32
        } else {
            0
        };
        let factor = t / 2f64.powi(squarings);
        let theta = arg / 2f64.powi(squarings);
        let b: Array2<S> = self.to_dense().mapv(|v| v.scale(factor));
        let degree = taylor_degree(theta, tol);

        let mut sum: Array2<S> = Array2::eye(dim);
        let mut term: Array2<S> = Array2::eye(dim);
        for k in 1..=degree {
            term = term.dot(&b).mapv(|v| v.scale(1.0 / k as f64));
            sum += &term;
        }
        for _ in 0..squarings {
            sum = sum.dot(&sum);
        }
        Ok(Mat::from_dense(sum)?.with_layout_rule())
    }

    /// Replace each column `x_j` of `block` by `exp(A tau_j) x_j`.
    pub fn expm_apply_block(&self, taus: &[f64], block: &mut Array2<S>, tol: f64) -> Result<(), LinalgError> {
        if block.ncols() != taus.len() {
            return Err(LinalgError::DimensionMismatch { left: taus.len(), right: block.ncols() });
        }
        if block.nrows() != self.dim() {
            return Err(LinalgError::DimensionMismatch { left: self.dim(), right: block.nrows() });
        }
        for &tau in taus {
            validate(tau, tol)?;
        }
        let tau_max = taus.iter().copied().fold(0.0, f64::max);
        let norm = self.norm_l1();
        let arg = norm * tau_max;
        if arg > EXP_ARGUMENT_CAP {
            return Err(LinalgError::Overflow { value: arg, cap: EXP_ARGUMENT_CAP });
        }
        if arg == 0.0 {
            return Ok(());
        }
        if self.occupied_bandwidth_hint() == Some(0) {
            let diag = self.diagonal();
            for (n, d) in diag.iter().enumerate() {
                for (j, &tau) in taus.iter().enumerate() {
                    block[[n, j]] *= d.scale(tau).exp();
                }
            }
            return Ok(());
        }
        let steps = (arg / SCALED_NORM_TARGET).ceil().max(1.0) as usize;
        let theta = arg / steps as f64;
        let degree = taylor_degree(theta, tol);
        let coeffs: Array1<f64> = taus.iter().map(|&tau| tau / steps as f64).collect();
        for _ in 0..steps {
            let mut acc = block.clone();
            let mut w = block.clone();
            for k in 1..=degree {
                w = self.apply_block(&w)?;
                for (j, mut col) in w.columns_mut().into_iter().enumerate() {
                    let c = coeffs[j] / k as f64;
                    col.mapv_inplace(|v| v.scale(c));
                }
                acc += &w;
            }
            *block = acc;
        }
        Ok(())
    }

    /// `Some(0)` when the stored pattern is diagonal, without a full scan of dense storage.
    fn occupied_bandwidth_hint(&self) -> Option<usize> {
        match self.bandwidth() {
            Some(0) => Some(0),
            Some(_) => Some(self.occupied_bandwidth()),
            None => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn zero_generator_gives_identity() {
        let z = TruncOperator::zeros(5, crate::lp_core::Field::Real);
        assert_eq!(matexp(&z, 3.0, 1e-12).unwrap().max_abs_diff(&TruncOperator::identity(5)), 0.0);
    }

    #[test]
    fn nilpotent_rank_one_is_affine_exactly() {
        let a = TruncOperator::ket_bra(5, 0, 3).unwrap();
        for t in [0.25, 1.0, 3.0] {
            let e = matexp(&a, t, 1e-12).unwrap();
            let expected = TruncOperator::identity(5).add(&a.scale_real(t)).unwrap();
            assert_eq!(e.max_abs_diff(&expected), 0.0, "t = {t}");
        }
    }

    #[test]
    fn diagonal_imaginary() {
        let diag: Vec<Complex64> = (0..6).map(|k| Complex64::new(0.0, -(k as f64))).collect();
        let a = TruncOperator::diagonal_complex(&diag);
        let t = 0.7;
        let e = matexp(&a, t, 1e-12).unwrap();
        for k in 0..6 {
            let want = Complex64::new(0.0, -(k as f64) * t).exp();
            assert!((e.get(k, k) - want).norm() < 1e-15);
        }
    }

    #[test]
    fn rotation_generator() {
        // exp([[0, -1], [1, 0]] t) is the rotation by t.
        let a = TruncOperator::from_real_dense(ndarray::array![[0.0, -1.0], [1.0, 0.0]]).unwrap();
        let t = 2.3;
        let e = matexp(&a, t, 1e-13).unwrap();
        let r = ndarray::array![[t.cos(), -t.sin()], [t.sin(), t.cos()]];
        let r = TruncOperator::from_real_dense(r).unwrap();
        assert!(e.max_abs_diff(&r) < 1e-13);
    }

    #[test]
    fn rejects_negative_time_and_overflow() {
        let a = TruncOperator::ket_bra(3, 0, 1).unwrap();
        assert_eq!(matexp(&a, -1.0, 1e-12), Err(LinalgError::NegativeTime(-1.0)));
        assert!(matches!(matexp(&a, 1e4, 1e-12), Err(LinalgError::Overflow { .. })));
    }

    #[test]
    fn block_action_matches_full_exponential() {
        let a = TruncOperator::from_real_dense(Array2::from_shape_fn((6, 6), |(n, m)| {
            ((n * 5 + m * 3) % 7) as f64 * 0.3 - 0.9
        }))
        .unwrap();
        let x = TruncVector::from_real((0..6).map(|k| 1.0 / (k as f64 + 1.0)).collect());
        for t in [0.0, 0.3, 1.7] {
            let via_matrix = matexp(&a, t, 1e-13).unwrap().apply(&x).unwrap();
            let via_action = matexp_apply(&a, t, &x, 1e-13).unwrap();
            let diff = via_matrix.sub(&via_action).unwrap().norm(f64::INFINITY).unwrap();
            assert!(diff < 1e-11, "t = {t}: {diff}");
        }
    }

    #[test]
    fn degree_grows_as_tolerance_tightens() {
        assert!(taylor_degree(0.5, 1e-6) < taylor_degree(0.5, 1e-14));
        assert_eq!(taylor_degree(0.0, 1e-12), 0);
    }

    proptest::proptest! {
        #[test]
        fn semigroup_law(
            entries in proptest::collection::vec(-1.0f64..1.0, 16),
            s in 0.0f64..1.5,
            t in 0.0f64..1.5,
        ) {
            let a = TruncOperator::from_real_dense(ndarray::Array2::from_shape_vec((4, 4), entries).unwrap()).unwrap();
            let whole = matexp(&a, s + t, 1e-13).unwrap();
            let split = matexp(&a, s, 1e-13).unwrap().compose(&matexp(&a, t, 1e-13).unwrap()).unwrap();
            proptest::prop_assert!(whole.max_abs_diff(&split) <= 1e-11 * (1.0 + whole.max_abs()));
        }

        #[test]
        fn strictly_triangular_is_polynomial(
            upper in proptest::collection::vec(-2.0f64..2.0, 2),
            t in 0.0f64..3.0,
        ) {
            // only the last column is filled, so A^2 = 0
            let mut dense = ndarray::Array2::zeros((3, 3));
            dense[[0, 2]] = upper[0];
            dense[[1, 2]] = upper[1];
            let a = TruncOperator::from_real_dense(dense).unwrap();
            let e = matexp(&a, t, 1e-12).unwrap();
            let expected = TruncOperator::identity(3).add(&a.scale_real(t)).unwrap();
            proptest::prop_assert_eq!(e.max_abs_diff(&expected), 0.0);
        }
    }
}
