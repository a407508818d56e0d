/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    assert!(trials >= 1 && successes <= trials, "need 0 <= successes <= trials, trials >= 1");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Half of the Wilson interval length.
pub fn wilson_half_width(successes: u64, trials: u64) -> f64 {
    let (lo, hi) = wilson_interval(successes, trials);
    0.5 * (hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_successes() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        // z^2 / (n + z^2)
        assert!((hi - Z95 * Z95 / (100.0 + Z95 * Z95)).abs() < 1e-15);
        assert!((hi - 0.037).abs() < 5e-4);
    }

    #[test]
    fn all_successes() {
        assert_eq!(wilson_interval(100, 100).1, 1.0);
    }

    #[test]
    fn half_is_symmetric() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(((lo + hi) / 2.0 - 0.5).abs() < 1e-15);
        assert!(lo < 0.5 && hi > 0.5);
    }

    proptest::proptest! {
        #[test]
        fn interval_contains_estimate(trials in 1u64..5000, frac in 0.0f64..=1.0) {
            let successes = ((trials as f64) * frac).floor() as u64;
            let (lo, hi) = wilson_interval(successes, trials);
            let p = successes as f64 / trials as f64;
            proptest::prop_assert!(0.0 <= lo && lo <= p + 1e-15 && p <= hi + 1e-15 && hi <= 1.0);
        }
    }
}
