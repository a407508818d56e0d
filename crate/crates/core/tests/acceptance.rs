//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints its own PASS/FAIL line; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;

use oplln::ensembles::{
    chebyshev_bound, draw_samples, exact_deviation_probability, variance_operator, BandedEnsemble, BoundedDense,
    DiagonalImaginary, GeneratorEnsemble, MeanMode, RankOneGeometric, VarianceMode,
};
use oplln::examples_closed::{
    ex1_deviation, ex1_matrix_deviation, ex2_deviation, ex2_matrix_deviation,
    ex3_matrix_pairing, ex3_wot_pairing, run_example3, run_geometric_example, Example3Run, ExampleKind,
    GeometricDraws, GeometricRun, SignDraws,
};
use oplln::harness::{csv_body, oracle_suite, parse_config, run_experiment, ExperimentRegistry};
use oplln::lp_core::{lp_norm, Field, Mat, TruncOperator, TruncVector};
use oplln::m_conjugation::{
    halving_columns_operator, indicator_probe_ratio, measured_ratio, probe_ratio, series_constant, MConjugation,
};
use oplln::rng::{RngStream, StreamId};
use oplln::semigroup_lln::{
    bracket_positions, chernoff_convergence, composition_w_n, f_term, mc_lln_experiment, variance_bound_binomial,
    variance_bound_f, variance_w_n_pair, LlnRun,
};
use oplln::stats::wilson_half_width;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Verdict {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rng(experiment: u64, trial: u64) -> RngStream {
    RngStream::new(20_240_601, StreamId::new(experiment, trial, 0))
}

fn bound_chain() -> Verdict {
    let t_grid: Vec<f64> = (0..=20).map(|k| k as f64 / 10.0).collect();
    let mut points = 0;
    for rho in [0.25, 0.5, 1.0, 2.0] {
        for &t in &t_grid {
            for j in 0..=10 {
                let n = 1u64 << j;
                let b = variance_bound_binomial(rho, t, n);
                let f = variance_bound_f(rho, t, n);
                if !(b >= 0.0 && b <= f * (1.0 + 1e-12)) {
                    return Err(format!("rho={rho} t={t} n={n}: binomial {b} > f {f}"));
                }
                if t == 0.0 && (b != 0.0 || f != 0.0) {
                    return Err(format!("rho={rho} n={n}: nonzero at t = 0"));
                }
                points += 1;
            }
        }
    }
    // direct evaluation at rho = 1, t = 1, n = 100
    let b_direct = (1.0004f64.powi(100) - 1.0) * 2f64.exp();
    let f_direct = 8.0 / 100.0 * 6f64.exp();
    let (b, f) = (variance_bound_binomial(1.0, 1.0, 100), variance_bound_f(1.0, 1.0, 100));
    ensure(
        (b - b_direct).abs() < 1e-12 && (f - f_direct).abs() < 1e-10 && (b - 0.3014).abs() < 5e-4 && (f - 32.27).abs() < 5e-3,
        format!("{points} grid points ordered; spot binomial {b:.4}, f {f:.2}"),
    )
}

fn proof_identity() -> Verdict {
    let suite = oracle_suite();
    let mut max_var = 0.0_f64;
    let mut max_bracket = 0.0_f64;
    for (idx, case) in suite.iter().enumerate() {
        let e = &case.ensemble;
        let (enumeration, bracket_sum) = variance_w_n_pair(e, case.t, case.n, 1e-13).map_err(|x| x.to_string())?;
        max_var = max_var.max(enumeration.max_abs_diff(&bracket_sum));
        if case.name.starts_with("sign/") {
            // W = exp(S t/n) with S a sum of n signs
            let s = case.t / case.n as f64;
            let exact = (2.0 * s).cosh().powi(case.n as i32) - s.cosh().powi(2 * case.n as i32);
            max_var = max_var.max((enumeration.get(0, 0).re - exact).abs());
        }
        for n in 1..=4usize {
            let samples: Vec<TruncOperator> = (0..n as u64)
                .map(|i| e.sample(&mut rng(77, 1000 * idx as u64 + 10 * n as u64 + i)).unwrap().operator)
                .collect();
            let w = composition_w_n(&samples, case.t, 1e-13).map_err(|x| x.to_string())?;
            let s = case.t / n as f64;
            let mut sum = TruncOperator::zeros(e.dim(), e.field());
            for k in 0..=n {
                for pos in bracket_positions(n, k) {
                    let term = f_term(e, &samples, s, &pos, MeanMode::ClosedForm, 1e-13).map_err(|x| x.to_string())?;
                    sum = sum.add(&term).unwrap();
                }
            }
            max_bracket = max_bracket.max(w.max_abs_diff(&sum));
        }
    }
    ensure(
        suite.len() == 12 && max_var <= 1e-10 && max_bracket <= 1e-10,
        format!("{} cases: variance max diff {max_var:e}, W_n reconstruction max diff {max_bracket:e}", suite.len()),
    )
}

/// `P{||(A - EA) x||_2 > eps}` by direct enumeration of the atoms.
fn enumerate_probability(e: &dyn GeneratorEnsemble, x: &TruncVector, eps: f64) -> f64 {
    let atoms = e.atoms().unwrap();
    let mut mean = TruncOperator::zeros(e.dim(), e.field());
    for a in atoms {
        mean = mean.add(&a.operator.scale_real(a.probability)).unwrap();
    }
    atoms
        .iter()
        .filter(|a| lp_norm(&a.operator.sub(&mean).unwrap().apply(x).unwrap(), 2.0).unwrap() > eps)
        .map(|a| a.probability)
        .sum()
}

fn banach_chebyshev() -> Verdict {
    let eps_grid: Vec<f64> = (0..8).map(|k| 0.05 * 2f64.powi(k)).collect();
    let mut seen = Vec::new();
    let mut checks = 0;
    for (idx, case) in oracle_suite().into_iter().enumerate() {
        let family = case.name.split('/').next().unwrap().to_string();
        if seen.contains(&family) || seen.len() == 6 {
            continue;
        }
        seen.push(family.clone());
        let e = &case.ensemble;
        let dim = e.dim();
        let p = [1.0, 1.5, 2.0][idx % 3];
        let q = p / (p - 1.0);
        let x = TruncVector::from_real((0..dim).map(|k| 1.0 / (k + 1) as f64).collect());
        let v = variance_operator(e, VarianceMode::Exact, p).map_err(|x| x.to_string())?;
        for &eps in &eps_grid {
            let exact = exact_deviation_probability(e, &x, eps).map_err(|x| x.to_string())?;
            let direct = enumerate_probability(e, &x, eps);
            let bound = chebyshev_bound(&v, &x, p, q, eps).map_err(|x| x.to_string())?;
            if (exact - direct).abs() > 1e-12 || exact > bound * (1.0 + 1e-12) {
                return Err(format!("{family} eps={eps}: exact {exact} (direct {direct}) vs bound {bound}"));
            }
            checks += 1;
        }
    }
    if seen.len() < 6 {
        return Err(format!("only {} enumerable ensembles", seen.len()));
    }

    let trials = 10_000;
    let sampled: Vec<(Box<dyn GeneratorEnsemble>, f64)> = vec![
        (Box::new(BoundedDense::new(16, 1.0, 2.0, 1.0, 0.5, Field::Real).unwrap()), 2.0),
        (Box::new(BandedEnsemble::new(16, 1.0, 1.5, 2, 1.0, 0.5, Field::Real).unwrap()), 1.5),
        (Box::new(RankOneGeometric::new(32).unwrap()), 1.0),
    ];
    let mut worst = f64::NEG_INFINITY;
    for (e, p) in &sampled {
        let q = if *p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
        let x = TruncVector::from_real((0..e.dim()).map(|k| 2f64.powi(-(k as i32) / 2)).collect());
        let v = variance_operator(e.as_ref(), VarianceMode::MonteCarlo { samples: trials, seed: 5 }, *p)
            .map_err(|x| x.to_string())?;
        let mean = e.mean_generator().unwrap();
        let devs: Vec<f64> = draw_samples(e.as_ref(), trials, 6, 300)
            .map_err(|x| x.to_string())?
            .iter()
            .map(|d| lp_norm(&d.operator.sub(&mean).unwrap().apply(&x).unwrap(), 2.0).unwrap())
            .collect();
        for eps in [0.1, 0.2, 0.4] {
            let hits = devs.iter().filter(|d| **d > eps).count() as u64;
            let emp = hits as f64 / trials as f64;
            let bound = chebyshev_bound(&v, &x, *p, q, eps).map_err(|x| x.to_string())?;
            let excess = emp - bound - 4.0 * wilson_half_width(hits, trials as u64);
            worst = worst.max(excess);
            if excess > 0.0 {
                return Err(format!("{} eps={eps}: empirical {emp} > bound {bound}", e.kind()));
            }
        }
    }
    Ok(format!(
        "{checks} exact checks on {} enumerable ensembles, 0 violations; sampled worst margin {worst:.4}",
        seen.len()
    ))
}

fn lln_convergence() -> Verdict {
    let n_list = vec![16, 64, 256];
    let mut lines = Vec::new();
    for p in [1.0, 2.0] {
        let e = BoundedDense::new(32, 1.0, p, 1.0, 0.5, Field::Real).map_err(|x| x.to_string())?;
        let x = TruncVector::basis(32, 1).unwrap();
        let mut run = LlnRun::new(x, n_list.clone(), 1000, vec![0.1]);
        run.p = p;
        run.q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
        run.seed = 4;
        let reports = mc_lln_experiment(&e, &run).map_err(|x| x.to_string())?;
        for (r, &n) in reports.iter().zip(&n_list) {
            // f(T, rho, n) ||x||_p^2 / eps^2 with rho = 1, T = 1, ||e1||_p = 1
            let oracle = (8.0 / n as f64 * 6f64.exp() / 0.01).min(1.0);
            if r.bound.map_or(true, |b| (b - oracle).abs() > 1e-12) || r.empirical_probability > oracle {
                return Err(format!("p={p} n={n}: empirical {} vs bound {oracle} ({:?})", r.empirical_probability, r.bound));
            }
            if r.aborted > 0 {
                return Err(format!("p={p} n={n}: {} aborted trials", r.aborted));
            }
        }
        for w in reports.windows(2) {
            let slack = 2.0 * wilson_half_width(w[0].exceedances, 1000).max(wilson_half_width(w[1].exceedances, 1000));
            if w[1].empirical_probability > w[0].empirical_probability + slack {
                return Err(format!(
                    "p={p}: P(n={}) = {} exceeds P(n={}) = {} + {slack}",
                    w[1].n, w[1].empirical_probability, w[0].n, w[0].empirical_probability
                ));
            }
        }
        let probs: Vec<String> = reports.iter().map(|r| format!("{}", r.empirical_probability)).collect();
        lines.push(format!("p={p}: [{}]", probs.join(", ")));
    }
    Ok(format!("{} (bound clipped to 1)", lines.join("; ")))
}

fn chernoff() -> Verdict {
    let n_list = [4u64, 16, 64, 256, 1024];
    let (t_max, grid) = (1.0, 64);
    let x = TruncVector::basis(64, 1).unwrap();
    let cases: Vec<(Box<dyn GeneratorEnsemble>, f64)> = vec![
        (Box::new(RankOneGeometric::new(64).unwrap()), 1.0),
        (Box::new(DiagonalImaginary::new(64).unwrap()), 2.0),
    ];
    let mut out = Vec::new();
    for (e, p) in &cases {
        let report = chernoff_convergence(e.as_ref(), &x, t_max, grid, &n_list, *p, MeanMode::ClosedForm, 1e-13)
            .map_err(|x| x.to_string())?;
        if let Some(c) = report.conditions.iter().find(|c| !c.status.passed()) {
            return Err(format!("{}: condition {} failed: {}", e.kind(), c.name, c.detail));
        }
        let sups: Vec<f64> = report.rows.iter().map(|r| r.sup_deviation).collect();
        // E A is nilpotent for the rank-one kind, so F(t/n)^n = I + EA t exactly;
        // for the diagonal kind the e1 component deviates by 1 - cos(t/n)^n, largest at t = T
        let oracle: Vec<f64> = n_list
            .iter()
            .map(|&n| if e.kind() == "diagonal_imaginary" { 1.0 - (t_max / n as f64).cos().powi(n as i32) } else { 0.0 })
            .collect();
        let floor = 1e-12;
        for (i, (s, o)) in sups.iter().zip(&oracle).enumerate() {
            if (s - o).abs() > 1e-10 {
                return Err(format!("{}: n={} sup {s} vs direct {o}", e.kind(), n_list[i]));
            }
        }
        let monotone = sups.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor);
        let last = *sups.last().unwrap();
        let decayed = last <= sups[0] / 10.0 || last <= floor;
        if !(monotone && decayed) {
            return Err(format!("{}: sups {sups:?}", e.kind()));
        }
        out.push(format!("{} {:.2e} -> {:.2e}", e.kind(), sups[0], last));
    }
    Ok(format!("{}; conditions verified", out.join(", ")))
}

fn certificates() -> Verdict {
    let dim = 256;
    let m = MConjugation::harmonic(dim);
    let mut worst = 0.0_f64;
    let mut count = 0;
    for d in 0..=3usize {
        let c = ((2 * d + 1) as f64).powi(3).sqrt();
        for r in 0..1000u64 {
            let mut g = rng(600 + d as u64, r);
            let u = TruncOperator::Real(Mat::banded_from_fn(dim, d, |_, _| g.uniform_in(-1.0, 1.0)));
            let l1 = (0..dim)
                .map(|col| (0..dim).map(|row| u.get(row, col).norm()).sum::<f64>())
                .fold(0.0, f64::max);
            let probes: Vec<TruncVector> = (0..4)
                .map(|_| TruncVector::from_real((0..dim).map(|_| g.uniform_in(-1.0, 1.0)).collect()))
                .chain([TruncVector::basis(dim, (r as usize * 37) % dim).unwrap()])
                .collect();
            for x in &probes {
                // ({U}_M x)_n = sum_m (n+1)/(m+1) u_nm x_m
                let y: Vec<f64> = (0..dim)
                    .map(|n| {
                        (n.saturating_sub(d)..(n + d + 1).min(dim))
                            .map(|col| (n + 1) as f64 / (col + 1) as f64 * u.get(n, col).re * x.get(col).re)
                            .sum()
                    })
                    .collect();
                let ratio = lp_norm(&TruncVector::from_real(y), 2.0).unwrap() / (lp_norm(x, 2.0).unwrap() * c * l1);
                worst = worst.max(ratio);
            }
            let lib = probe_ratio(&m, &u, c, &probes).map_err(|x| x.to_string())?;
            worst = worst.max(lib);
            count += 1;
        }
    }
    if worst > 1.0 + 1e-12 {
        return Err(format!("probe ratio {worst} exceeds 1"));
    }

    let u = halving_columns_operator(dim);
    let f_u: f64 = (0..dim).map(|n| 2f64.powi(-(n as i32))).sum();
    let f_mu: f64 = (0..dim).map(|n| (n + 1) as f64 * 2f64.powi(-(n as i32))).sum();
    let col_sums_ok = (0..dim).all(|col| {
        (u.column_abs_sum(col).unwrap() - f_u).abs() < 1e-15 && (m.weighted_column_sum(&u, col).unwrap() - f_mu).abs() < 1e-13
    });
    let tails_ok = (2.0 - f_u) < 1e-12 && (4.0 - f_mu) < 1e-12;
    // {U}_M = a b^T with a_n = (n+1) 2^{-n}, b_m = 1/(m+1): norm ||a|| ||b||
    let a: f64 = (0..dim).map(|n| ((n + 1) as f64 * 2f64.powi(-(n as i32))).powi(2)).sum::<f64>().sqrt();
    let b: f64 = (0..dim).map(|k| 1.0 / ((k + 1) * (k + 1)) as f64).sum::<f64>().sqrt();
    let measured = measured_ratio(&m, &u).map_err(|x| x.to_string())?;
    let direct = a * b / f_u;
    let raw = indicator_probe_ratio(&u).map_err(|x| x.to_string())?;
    let raw_direct = (dim as f64).sqrt() * (0..dim).map(|n| 4f64.powi(-(n as i32))).sum::<f64>().sqrt();
    ensure(
        col_sums_ok
            && tails_ok
            && (measured - direct).abs() < 1e-8
            && measured <= series_constant(2)
            && raw > 5.0
            && (raw - raw_direct).abs() < 1e-9,
        format!(
            "{count} banded operators, worst probe ratio {worst:.4}; halving operator f_m = {f_u}, {f_mu}, measured {measured:.4} <= {:.4}, raw probe {raw:.2}",
            series_constant(2)
        ),
    )
}

fn dichotomy() -> Verdict {
    let dim = 64;
    let run = Example3Run {
        z: TruncVector::from_real(vec![1.0; dim]),
        x: TruncVector::basis(dim, 1).unwrap(),
        x_label: "e1".into(),
        t_max: PI,
        grid_points: 64,
        n_gap: 64,
        n_wot: 10_000,
        cutoff: dim,
        seeds: 100,
        epsilon: 0.1,
        seed: 9,
        workers: 1,
        tol: 1e-13,
        check_trials: 3,
    };
    let r = run_example3(&run).map_err(|x| x.to_string())?;
    if !(r.wot_freq >= 0.9 && r.norm_gap_min >= 0.9) {
        return Err(format!("wot frequency {} at n = 10^4, min norm gap {}", r.wot_freq, r.norm_gap_min));
    }
    let mut lines = vec![format!("wot freq {} at n=10^4, min gap {:.3}", r.wot_freq, r.norm_gap_min)];
    let x = TruncVector::basis(dim, 1).unwrap();
    for kind in [ExampleKind::RankOne, ExampleKind::ScaledRankOne] {
        let g = GeometricRun {
            kind,
            x: x.clone(),
            x_label: "e1".into(),
            t_max: 1.0,
            grid_points: 64,
            n_list: vec![100, 1000, 10_000],
            trials: 1000,
            epsilons: vec![0.05],
            seed: 10,
            workers: 1,
            tol: 1e-13,
            check_trials: 3,
        };
        for rep in run_geometric_example(&g).map_err(|x| x.to_string())? {
            // var x_xi = var(xi x_xi) = 1/4 for x = e1
            let oracle = 0.25 / (rep.n as f64 * 0.05 * 0.05);
            let hw = wilson_half_width(rep.exceedances, rep.trials as u64);
            if (rep.bound - oracle).abs() > 1e-12 * oracle || rep.empirical_probability > rep.bound + 4.0 * hw {
                return Err(format!("{kind:?} n={}: empirical {} vs bound {}", rep.n, rep.empirical_probability, rep.bound));
            }
        }
        lines.push(format!("{kind:?} within bound"));
    }
    Ok(lines.join("; "))
}

fn cross_validation() -> Verdict {
    let mut worst = [0.0_f64; 3];
    for c in 0..100u64 {
        let mut g = rng(800, c);
        let dim = 8 + (g.uniform() * 32.0) as usize;
        // draws past the truncation are lumped at N-1; with x_{N-1} = 0 the truncation is exact
        let x = TruncVector::from_real((0..dim).map(|k| if k + 1 < dim { g.uniform_in(-1.0, 1.0) } else { 0.0 }).collect());
        let t = g.uniform_in(0.01, 2.0);
        let n = 1 + (g.uniform() * 40.0) as usize;
        let draws = GeometricDraws::sample(31, 801, c, n);
        let d1 = ex1_matrix_deviation(&x, t, &draws, 1e-13).map_err(|x| x.to_string())?;
        worst[0] = worst[0].max((ex1_deviation(&x, t, &draws) - d1).abs());
        let d2 = ex2_matrix_deviation(&x, t, &draws, 1e-13).map_err(|x| x.to_string())?;
        worst[1] = worst[1].max((ex2_deviation(&x, t, &draws) - d2).abs());

        let z = TruncVector::from_complex((0..dim).map(|_| Complex64::new(g.uniform_in(-1.0, 1.0), g.uniform_in(-1.0, 1.0))).collect());
        let cutoff = 1 + (g.uniform() * dim as f64) as usize;
        let signs = SignDraws::sample(31, 802, c, n);
        let t3 = g.uniform_in(0.0, PI);
        let closed = ex3_wot_pairing(&z, &x, t3, &signs, cutoff).map_err(|x| x.to_string())?;
        let matrix = ex3_matrix_pairing(&z, &x, t3, &signs, cutoff, 1e-13).map_err(|x| x.to_string())?;
        worst[2] = worst[2].max((closed - matrix).abs());
    }
    ensure(
        worst.iter().all(|w| *w <= 1e-10),
        format!("100 configurations each: max |closed - matrix| ex1 {:e}, ex2 {:e}, ex3 {:e}", worst[0], worst[1], worst[2]),
    )
}

fn determinism() -> Verdict {
    let registry = ExperimentRegistry::builtin();
    let cases = [
        ("lln", "ensemble = bounded_dense\nN = 12\np = 1.5\nn = [2, 8, 32]\ntrials = 300\ngrid = 16\nepsilon = [0.05, 0.2]\nseed = 3\n"),
        ("example1", "n = [10, 100]\ntrials = 500\nN = 32\nseed = 3\n"),
        ("example3", "n = [32]\nT = 3.14159\nN = 32\nseeds = 20\nn_wot = 500\nseed = 3\n"),
    ];
    for (sub, text) in cases {
        let mut bodies = Vec::new();
        for workers in [1, 4, 16] {
            let mut cfg = parse_config(text).map_err(|x| x.to_string())?;
            cfg.workers = workers;
            let dir = tempfile::tempdir().map_err(|x| x.to_string())?;
            run_experiment(&registry, sub, &cfg, dir.path()).map_err(|x| x.to_string())?;
            let csv = std::fs::read_to_string(dir.path().join(format!("{sub}.csv"))).map_err(|x| x.to_string())?;
            bodies.push(csv_body(&csv).to_string());
        }
        if bodies.iter().any(|b| b != &bodies[0]) {
            return Err(format!("{sub}: CSV bodies differ across worker counts"));
        }
    }
    Ok("lln, example1 and example3 CSV bodies identical at workers 1, 4, 16".into())
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("bound chain", bound_chain),
        ("variance identity oracle", proof_identity),
        ("Chebyshev bound in l_p", banach_chebyshev),
        ("LLN convergence (bounded dense)", lln_convergence),
        ("Chernoff iterate", chernoff),
        ("membership certificates", certificates),
        ("weak vs norm dichotomy and geometric examples", dichotomy),
        ("closed form vs matrix path", cross_validation),
        ("determinism across workers", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("acceptance {} [{name}]: PASS ({secs:.1}s) {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("acceptance {} [{name}]: FAIL ({secs:.1}s) {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
