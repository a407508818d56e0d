use oplln::ensembles::{draw_samples, EnsembleParams, EnsembleRegistry, GeneratorEnsemble, RankOneGeometric};
use oplln::lp_core::{opnorm_estimate, opnorm_upper_bound, Field};

#[test]
fn rank_one_mean_entry_matches_half() {
    let e = RankOneGeometric::new(64).unwrap();
    let draws = draw_samples(&e, 100_000, 11, 500).unwrap();
    let hits = draws.iter().filter(|d| d.operator.get(0, 1).re == 1.0).count();
    let freq = hits as f64 / draws.len() as f64;
    assert!((freq - 0.5).abs() < 5e-3, "{freq}");
    assert_eq!(e.mean_generator().unwrap().get(0, 1).re, 0.5);
}

#[test]
fn registry_kinds_respect_their_radius() {
    let reg = EnsembleRegistry::builtin();
    for (name, field) in [("bounded_dense", Field::Real), ("banded", Field::Real), ("bounded_dense", Field::Complex)] {
        for p in [1.0, 1.5, 2.0] {
            let params = EnsembleParams { dim: 24, rho: 0.8, p, field, ..Default::default() };
            let e = reg.build(name, &params).unwrap();
            let rho = e.radius(p).unwrap();
            // the upper bound is not subadditive, so check mean part and noise separately
            let mean = e.mean_generator().unwrap();
            let drift = opnorm_upper_bound(&mean, p).unwrap();
            for d in draw_samples(e.as_ref(), 50, 5, 600).unwrap() {
                let noise = opnorm_upper_bound(&d.operator.sub(&mean).unwrap(), p).unwrap();
                assert!(drift + noise <= rho * (1.0 + 1e-9), "{name} p={p}: {drift} + {noise} > {rho}");
                let lower = opnorm_estimate(&d.operator, p, p, 8, 1e-10).unwrap().value;
                assert!(lower <= rho * (1.0 + 1e-9));
            }
        }
    }
}

#[test]
fn unknown_kind_is_reported() {
    assert!(EnsembleRegistry::builtin().build("nope", &EnsembleParams::default()).is_err());
}
