/// `((1 + (2 rho t / n)^2)^n - 1) e^{2 rho t}`.
pub fn variance_bound_binomial(rho: f64, t: f64, n: u64) -> f64 {
    let a = 2.0 * rho * t / n as f64;
    (n as f64 * (a * a).ln_1p()).exp_m1() * (2.0 * rho * t).exp()
}

/// `f(t, rho, n) = 8 rho^2 t^2 / n * e^{4 rho^2 t^2 + 2 rho t}`.
pub fn variance_bound_f(rho: f64, t: f64, n: u64) -> f64 {
    let rt = rho * t;
    8.0 * rt * rt / n as f64 * (4.0 * rt * rt + 2.0 * rt).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanish_at_zero() {
        for n in [1, 7, 100] {
            assert_eq!(variance_bound_binomial(1.0, 0.0, n), 0.0);
            assert_eq!(variance_bound_f(1.0, 0.0, n), 0.0);
            assert_eq!(variance_bound_binomial(0.0, 3.0, n), 0.0);
            assert_eq!(variance_bound_f(0.0, 3.0, n), 0.0);
        }
    }

    #[test]
    fn spot_values() {
        let direct = (1.0004f64.powi(100) - 1.0) * 2f64.exp();
        assert!((variance_bound_binomial(1.0, 1.0, 100) - direct).abs() < 1e-13);
        assert!((variance_bound_f(1.0, 1.0, 100) - 0.08 * 6f64.exp()).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn binomial_below_f(rho in 0.0f64..3.0, t in 0.0f64..3.0, n in 1u64..5000) {
            let b = variance_bound_binomial(rho, t, n);
            let f = variance_bound_f(rho, t, n);
            proptest::prop_assert!(b >= 0.0);
            proptest::prop_assert!(b <= f * (1.0 + 1e-12));
        }
    }
}
