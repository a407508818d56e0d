//! Operator norms on truncations.
//!
//! Only `(1, q)` (largest column `l_q` norm) and `(inf, inf)` (largest row sum)
//! are computed exactly. `(2, 2)` is a converged power-iteration value, which is
//! a lower bound of the spectral norm at every iterate. Every other pair is the
//! maximum ratio over probe vectors, a certified lower bound.

use ndarray::Array1;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::error::LinalgError;
use super::matrix::Mat;
use super::operator::TruncOperator;
use super::scalar::Scalar;
use super::vector::{check_norm_index, lp_norm_slice};

/// Iteration cap for the spectral power method.
pub const POWER_ITERATION_CAP: usize = 20_000;

const PROBE_SEED: u64 = 0x6f70_6e6f_726d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Exact,
    Converged,
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub kind: EstimateKind,
}

/// `||U||_1 = max_m f_m(U)`.
pub fn opnorm_l1_exact(u: &TruncOperator) -> f64 {
    u.norm_l1()
}

/// Norm of `U` as a map `l_p -> l_q`.
pub fn opnorm_estimate(
    u: &TruncOperator,
    p: f64,
    q: f64,
    trials: usize,
    tol: f64,
) -> Result<NormEstimate, LinalgError> {
    check_norm_index(p)?;
    check_norm_index(q)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(LinalgError::InvalidTolerance(tol));
    }
    match u {
        TruncOperator::Real(m) => estimate_generic(m, p, q, trials, tol),
        TruncOperator::Complex(m) => estimate_generic(m, p, q, trials, tol),
    }
}

fn estimate_generic<S: Scalar + ProbeScalar>(
    u: &Mat<S>,
    p: f64,
    q: f64,
    trials: usize,
    tol: f64,
) -> Result<NormEstimate, LinalgError> {
    let dim = u.dim();
    if p == 1.0 {
        let value = (0..dim).map(|m| u.column_norm(m, q)).fold(0.0, f64::max);
        return Ok(NormEstimate { value, kind: EstimateKind::Exact });
    }
    if p.is_infinite() && q.is_infinite() {
        return Ok(NormEstimate {
            value: u.norm_linf(),
            kind: EstimateKind::Exact,
        });
    }
    if p == 2.0 && q == 2.0 {
        let value = spectral_norm(u, tol)?;
        return Ok(NormEstimate { value, kind: EstimateKind::Converged });
    }
    let mut best = 0.0_f64;
    for m in 0..dim {
        // ||e_m||_p = 1
        best = best.max(u.column_norm(m, q));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    for _ in 0..trials {
        let x: Array1<S> = Array1::from_shape_fn(dim, |_| S::probe(&mut rng));
        let nx = lp_norm_slice(x.as_slice().expect("contiguous"), p);
        if nx == 0.0 {
            continue;
        }
        let ux = u.apply(x.view())?;
        best = best.max(lp_norm_slice(ux.as_slice().expect("contiguous"), q) / nx);
    }
    Ok(NormEstimate {
        value: best,
        kind: EstimateKind::LowerBound,
    })
}

/// Random probe entries: uniform on `[-1, 1]`, or on the unit disc boundary
/// times a uniform radius for the complex field.
pub(crate) trait ProbeScalar {
    fn probe(rng: &mut ChaCha8Rng) -> Self;
}

impl ProbeScalar for f64 {
    fn probe(rng: &mut ChaCha8Rng) -> Self {
        rng.gen_range(-1.0..=1.0)
    }
}

impl ProbeScalar for Complex64 {
    fn probe(rng: &mut ChaCha8Rng) -> Self {
        let r: f64 = rng.gen_range(0.0..=1.0);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        Complex64::from_polar(r, phase)
    }
}

/// Power iteration on `U* U`, stopped when the relative change of `||U v||_2`
/// drops below `tol`.
pub fn spectral_norm<S: Scalar>(u: &Mat<S>, tol: f64) -> Result<f64, LinalgError> {
    let dim = u.dim();
    if dim == 0 {
        return Ok(0.0);
    }
    let adj = u.adjoint();
    // Deterministic start with all components nonzero.
    let mut v: Array1<S> = Array1::from_shape_fn(dim, |k| {
        S::from_real(1.0 + 0.5 * ((k as f64 * 0.754_877_666).fract() - 0.5))
    });
    normalize(&mut v);
    let mut sigma = 0.0_f64;
    let mut restarted = false;
    for it in 0..POWER_ITERATION_CAP {
        let uv = u.apply(v.view())?;
        let next = lp_norm_slice(uv.as_slice().expect("contiguous"), 2.0);
        if next == 0.0 {
            // Start vector in the kernel: restart once along the largest column.
            let (m, best) = (0..dim)
                .map(|m| (m, u.column_norm(m, 2.0)))
                .fold((0, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
            if best == 0.0 || restarted {
                return Ok(sigma.max(best));
            }
            restarted = true;
            v = Array1::zeros(dim);
            v[m] = S::one();
            continue;
        }
        if it > 0 && (next - sigma).abs() <= tol * next {
            return Ok(next.max(sigma));
        }
        sigma = sigma.max(next);
        v = adj.apply(uv.view())?;
        normalize(&mut v);
    }
    Err(LinalgError::NonConvergence {
        best: sigma,
        iterations: POWER_ITERATION_CAP,
    })
}

fn normalize<S: Scalar>(v: &mut Array1<S>) {
    let n = lp_norm_slice(v.as_slice().expect("contiguous"), 2.0);
    if n > 0.0 {
        v.mapv_inplace(|x| x.scale(1.0 / n));
    }
}

/// Certified upper bound on `||U||_p` by Riesz-Thorin interpolation between the
/// exact `l_1` and `l_inf` norms; at `p = 2` the Frobenius norm is also used.
pub fn opnorm_upper_bound(u: &TruncOperator, p: f64) -> Result<f64, LinalgError> {
    check_norm_index(p)?;
    let n1 = u.norm_l1();
    let ninf = u.norm_linf();
    if p == 1.0 {
        return Ok(n1);
    }
    if p.is_infinite() {
        return Ok(ninf);
    }
    let theta = 1.0 / p;
    let mut bound = if n1 == 0.0 || ninf == 0.0 {
        0.0
    } else {
        (theta * n1.ln() + (1.0 - theta) * ninf.ln()).exp()
    };
    if p == 2.0 {
        bound = bound.min(u.frobenius());
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_norm_for_every_p() {
        let id = TruncOperator::identity(6);
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let est = opnorm_estimate(&id, p, p, 16, 1e-12).unwrap();
            assert!((est.value - 1.0).abs() < 1e-12, "p = {p}: {}", est.value);
        }
    }

    #[test]
    fn diagonal_spectral_norm() {
        let d = TruncOperator::diagonal_real(&[1.0, 2.0, 3.0]);
        let est = opnorm_estimate(&d, 2.0, 2.0, 1, 1e-13).unwrap();
        assert_eq!(est.kind, EstimateKind::Converged);
        assert!((est.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn projector_norm() {
        let pr = TruncOperator::ket_bra(5, 0, 0).unwrap();
        let est = opnorm_estimate(&pr, 2.0, 2.0, 1, 1e-12).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_exact_is_max_column_sum() {
        let d = TruncOperator::diagonal_real(&[0.5, -4.0, 2.0]);
        assert_eq!(opnorm_l1_exact(&d), 4.0);
        let est = opnorm_estimate(&d, 1.0, 1.0, 0, 1e-12).unwrap();
        assert_eq!(est, NormEstimate { value: 4.0, kind: EstimateKind::Exact });
    }

    #[test]
    fn off_pair_is_lower_bound_below_interpolation() {
        let u = TruncOperator::from_real_dense(ndarray::Array2::from_shape_fn((5, 5), |(n, m)| {
            ((n * 7 + m * 3) % 5) as f64 - 2.0
        }))
        .unwrap();
        let est = opnorm_estimate(&u, 1.5, 1.5, 200, 1e-12).unwrap();
        assert_eq!(est.kind, EstimateKind::LowerBound);
        assert!(est.value <= opnorm_upper_bound(&u, 1.5).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn spectral_estimate_never_exceeds_frobenius() {
        let u = TruncOperator::from_real_dense(ndarray::Array2::from_shape_fn((7, 7), |(n, m)| {
            ((n as f64 + 1.3) * (m as f64 - 2.1)).sin()
        }))
        .unwrap();
        let est = opnorm_estimate(&u, 2.0, 2.0, 1, 1e-12).unwrap();
        assert!(est.value <= u.frobenius() + 1e-12);
        let adj = opnorm_estimate(&u.adjoint(), 2.0, 2.0, 1, 1e-12).unwrap();
        assert!((est.value - adj.value).abs() < 1e-8);
    }

    #[test]
    fn zero_operator() {
        let z = TruncOperator::zeros(4, crate::lp_core::Field::Real);
        assert_eq!(opnorm_estimate(&z, 2.0, 2.0, 1, 1e-12).unwrap().value, 0.0);
        assert_eq!(opnorm_upper_bound(&z, 1.5).unwrap(), 0.0);
    }
}
