//! Flat `key = value` experiment configuration.
//!
//! One key per line, separated from its value by `=` or `:`. Values are JSON;
//! a bare word such as `rank_one_geometric` or `e1` is read as a string.
//! `#` starts a comment line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde_json::{json, Value};
use thiserror::Error;

use crate::ensembles::{Atom, EnsembleParams};
use crate::lp_core::{conjugate_exponent, Field, TruncVector, DEFAULT_DIM, DEFAULT_EXPM_TOL};
use crate::semigroup_lln::DeviationNorm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("{field}{}: {message}", .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Field {
        field: &'static str,
        line: Option<usize>,
        message: String,
    },
}

/// How the test vector `x` (or the pairing vector `z`) is built.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorSpec {
    /// Storage index `k`, written `ek`.
    Basis(usize),
    Ones,
    /// `2^{-k}`.
    Geometric,
    /// `1 / (k + 1)`.
    Harmonic,
    Explicit(Vec<Complex64>),
}

impl VectorSpec {
    fn parse(v: &Value) -> Result<Self, String> {
        match v {
            Value::String(s) => match s.as_str() {
                "ones" => Ok(VectorSpec::Ones),
                "geometric" => Ok(VectorSpec::Geometric),
                "harmonic" => Ok(VectorSpec::Harmonic),
                _ => s
                    .strip_prefix('e')
                    .and_then(|k| k.parse().ok())
                    .map(VectorSpec::Basis)
                    .ok_or_else(|| format!("`{s}` is not ek, ones, geometric, harmonic or a list")),
            },
            Value::Array(items) => items
                .iter()
                .map(|item| match item {
                    Value::Number(n) => Ok(Complex64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
                    Value::Array(pair) if pair.len() == 2 => {
                        let re = pair[0].as_f64().ok_or("complex entries are [re, im]")?;
                        let im = pair[1].as_f64().ok_or("complex entries are [re, im]")?;
                        Ok(Complex64::new(re, im))
                    }
                    _ => Err("entries must be numbers or [re, im] pairs".to_string()),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(VectorSpec::Explicit),
            _ => Err("expected a string or a list".into()),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            VectorSpec::Basis(k) => json!(format!("e{k}")),
            VectorSpec::Ones => json!("ones"),
            VectorSpec::Geometric => json!("geometric"),
            VectorSpec::Harmonic => json!("harmonic"),
            VectorSpec::Explicit(v) => {
                if v.iter().all(|c| c.im == 0.0) {
                    json!(v.iter().map(|c| c.re).collect::<Vec<_>>())
                } else {
                    json!(v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>())
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self.to_json() {
            Value::String(s) => s,
            other => other.to_string(),
        }
    }

    /// The vector in dimension `dim`; explicit lists are zero-padded.
    pub fn build(&self, dim: usize) -> Result<TruncVector, String> {
        let real = |f: &dyn Fn(usize) -> f64| TruncVector::from_real((0..dim).map(f).collect());
        match self {
            VectorSpec::Basis(k) => TruncVector::basis(dim, *k).map_err(|e| e.to_string()),
            VectorSpec::Ones => Ok(real(&|_| 1.0)),
            VectorSpec::Geometric => Ok(real(&|k| 2f64.powi(-(k as i32)))),
            VectorSpec::Harmonic => Ok(real(&|k| 1.0 / (k + 1) as f64)),
            VectorSpec::Explicit(v) => {
                if v.len() > dim {
                    return Err(format!("{} entries exceed dimension {dim}", v.len()));
                }
                if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                    return Err("entries must be finite".into());
                }
                let mut padded = v.clone();
                padded.resize(dim, Complex64::new(0.0, 0.0));
                if padded.iter().all(|c| c.im == 0.0) {
                    Ok(TruncVector::from_real(padded.iter().map(|c| c.re).collect()))
                } else {
                    Ok(TruncVector::from_complex(padded))
                }
            }
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ensemble: String,
    pub rho: f64,
    pub density: f64,
    pub drift: f64,
    pub bandwidth: usize,
    pub atoms: Option<Vec<Atom>>,
    pub p: f64,
    pub q: f64,
    pub n: Vec<u64>,
    pub trials: usize,
    pub t_max: f64,
    pub grid: usize,
    pub epsilon: Vec<f64>,
    pub x: VectorSpec,
    pub z: VectorSpec,
    pub dim: usize,
    pub field: Field,
    pub seed: u64,
    pub tol: f64,
    pub deviation_norm: DeviationNorm,
    pub rho_grid: Vec<f64>,
    pub d: Vec<usize>,
    pub rule: String,
    pub probes: usize,
    pub cutoff: Option<usize>,
    pub n_wot: u64,
    pub seeds: usize,
    pub check_trials: usize,
    pub plot: bool,
    /// Execution-only settings, never echoed.
    pub workers: usize,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            ensemble: "rank_one_geometric".into(),
            rho: 1.0,
            density: 1.0,
            drift: 0.5,
            bandwidth: 1,
            atoms: None,
            p: 1.0,
            q: f64::INFINITY,
            n: vec![16, 64, 256],
            trials: 1000,
            t_max: 1.0,
            grid: 64,
            epsilon: vec![0.1],
            x: VectorSpec::Basis(1),
            z: VectorSpec::Ones,
            dim: DEFAULT_DIM,
            field: Field::Real,
            seed: 0,
            tol: DEFAULT_EXPM_TOL,
            deviation_norm: DeviationNorm::L2,
            rho_grid: vec![0.25, 0.5, 1.0, 2.0],
            d: vec![0, 1, 2, 3],
            rule: "d_diagonal".into(),
            probes: 8,
            cutoff: None,
            n_wot: 10_000,
            seeds: 100,
            check_trials: 5,
            plot: false,
            workers: 1,
            out: None,
        }
    }
}

const KEYS: &[&str] = &[
    "ensemble",
    "rho",
    "density",
    "drift",
    "bandwidth",
    "atoms",
    "p",
    "q",
    "n",
    "trials",
    "T",
    "grid",
    "epsilon",
    "x",
    "z",
    "N",
    "field",
    "seed",
    "tol",
    "deviation_norm",
    "rho_grid",
    "d",
    "rule",
    "probes",
    "K",
    "n_wot",
    "seeds",
    "check_trials",
    "plot",
    "workers",
    "out",
];

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn split_line(line: &str) -> Option<(&str, &str)> {
    let idx = line.find(['=', ':'])?;
    Some((line[..idx].trim(), line[idx + 1..].trim()))
}

struct Entries {
    values: BTreeMap<&'static str, (usize, Value)>,
}

impl Entries {
    fn err(&self, field: &'static str, message: impl Into<String>) -> ConfigError {
        ConfigError::Field {
            field,
            line: self.values.get(field).map(|(l, _)| *l),
            message: message.into(),
        }
    }

    fn get(&self, key: &'static str) -> Option<&Value> {
        self.values.get(key).map(|(_, v)| v)
    }

    fn f64(&self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::String(s)) if s == "inf" || s == "infinity" => Ok(f64::INFINITY),
            Some(v) => v.as_f64().ok_or_else(|| self.err(key, format!("expected a number, got {v}"))),
        }
    }

    fn u64(&self, key: &'static str, default: u64) -> Result<u64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| self.err(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn usize(&self, key: &'static str, default: usize) -> Result<usize, ConfigError> {
        self.u64(key, default as u64).map(|v| v as usize)
    }

    fn string(&self, key: &'static str, default: &str) -> Result<String, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(self.err(key, format!("expected a name, got {v}"))),
        }
    }

    fn bool(&self, key: &'static str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| self.err(key, format!("expected true or false, got {v}"))),
        }
    }

    /// A list, or a single scalar promoted to a one-element list.
    fn list<T>(
        &self,
        key: &'static str,
        default: Vec<T>,
        item: impl Fn(&Value) -> Option<T>,
    ) -> Result<Vec<T>, ConfigError> {
        let bad = |v: &Value| self.err(key, format!("invalid entry {v}"));
        match self.get(key) {
            None => Ok(default),
            Some(Value::Array(items)) => items.iter().map(|v| item(v).ok_or_else(|| bad(v))).collect(),
            Some(v) => item(v).map(|x| vec![x]).ok_or_else(|| bad(v)),
        }
    }
}

/// Parses and validates a configuration document, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut values = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = split_line(line).ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let known = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| ConfigError::UnknownKey { line: line_no, key: key.to_string() })?;
        if value.is_empty() {
            return Err(ConfigError::Syntax { line: line_no, message: format!("`{key}` has no value") });
        }
        if values.insert(*known, (line_no, parse_value(value))).is_some() {
            return Err(ConfigError::DuplicateKey { line: line_no, key: key.to_string() });
        }
    }
    let e = Entries { values };
    let d = ExperimentConfig::default();

    let p = e.f64("p", d.p)?;
    let q = e.f64("q", conjugate_exponent(p))?;
    let field = match e.get("field") {
        None => d.field,
        Some(v) => v
            .as_str()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| e.err("field", "expected real or complex"))?,
    };
    let deviation_norm = match e.get("deviation_norm") {
        None => d.deviation_norm,
        Some(v) => serde_json::from_value(v.clone()).map_err(|_| e.err("deviation_norm", "expected l2 or lp"))?,
    };
    let atoms = match e.get("atoms") {
        None => None,
        Some(v) => Some(
            serde_json::from_value::<Vec<Atom>>(v.clone())
                .map_err(|err| e.err("atoms", format!("expected [{{\"matrix\": ..., \"prob\": ...}}]: {err}")))?,
        ),
    };
    let vector = |key: &'static str, default: VectorSpec| -> Result<VectorSpec, ConfigError> {
        match e.get(key) {
            None => Ok(default),
            Some(v) => VectorSpec::parse(v).map_err(|m| e.err(key, m)),
        }
    };
    let cfg = ExperimentConfig {
        ensemble: e.string("ensemble", &d.ensemble)?,
        rho: e.f64("rho", d.rho)?,
        density: e.f64("density", d.density)?,
        drift: e.f64("drift", d.drift)?,
        bandwidth: e.usize("bandwidth", d.bandwidth)?,
        atoms,
        p,
        q,
        n: e.list("n", d.n.clone(), Value::as_u64)?,
        trials: e.usize("trials", d.trials)?,
        t_max: e.f64("T", d.t_max)?,
        grid: e.usize("grid", d.grid)?,
        epsilon: e.list("epsilon", d.epsilon.clone(), Value::as_f64)?,
        x: vector("x", d.x.clone())?,
        z: vector("z", d.z.clone())?,
        dim: e.usize("N", d.dim)?,
        field,
        seed: e.u64("seed", d.seed)?,
        tol: e.f64("tol", d.tol)?,
        deviation_norm,
        rho_grid: e.list("rho_grid", d.rho_grid.clone(), Value::as_f64)?,
        d: e.list("d", d.d.clone(), |v| v.as_u64().map(|x| x as usize))?,
        rule: e.string("rule", &d.rule)?,
        probes: e.usize("probes", d.probes)?,
        cutoff: e.get("K").map(|_| e.usize("K", 0)).transpose()?,
        n_wot: e.u64("n_wot", d.n_wot)?,
        seeds: e.usize("seeds", d.seeds)?,
        check_trials: e.usize("check_trials", d.check_trials)?,
        plot: e.bool("plot", d.plot)?,
        workers: e.usize("workers", d.workers)?,
        out: e.get("out").map(|_| e.string("out", "")).transpose()?,
    };
    validate(&cfg, &e)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig, e: &Entries) -> Result<(), ConfigError> {
    let inv = |r: f64| if r.is_infinite() { 0.0 } else { 1.0 / r };
    if !(1.0..=2.0).contains(&cfg.p) {
        return Err(e.err("p", format!("p = {} outside [1, 2]", cfg.p)));
    }
    if !(cfg.q >= 1.0) || (inv(cfg.p) + inv(cfg.q) - 1.0).abs() > 1e-12 {
        return Err(e.err("q", format!("1/{} + 1/{} != 1", cfg.p, cfg.q)));
    }
    if cfg.trials == 0 {
        return Err(e.err("trials", "trials must be positive"));
    }
    if cfg.n.is_empty() || cfg.n.contains(&0) {
        return Err(e.err("n", "n must be a nonempty list of positive integers"));
    }
    if cfg.epsilon.is_empty() || cfg.epsilon.iter().any(|v| !(*v > 0.0)) {
        return Err(e.err("epsilon", "epsilon values must be positive"));
    }
    if !(cfg.t_max > 0.0 && cfg.t_max.is_finite()) {
        return Err(e.err("T", "T must be positive"));
    }
    if cfg.grid < 2 {
        return Err(e.err("grid", "at least 2 grid points"));
    }
    if !(cfg.tol > 0.0) {
        return Err(e.err("tol", "tolerance must be positive"));
    }
    if cfg.dim == 0 {
        return Err(e.err("N", "dimension must be positive"));
    }
    if !(cfg.rho >= 0.0 && cfg.rho.is_finite()) {
        return Err(e.err("rho", "rho must be non-negative"));
    }
    if cfg.workers == 0 {
        return Err(e.err("workers", "at least one worker"));
    }
    if !["d_diagonal", "series"].contains(&cfg.rule.as_str()) {
        return Err(e.err("rule", "expected d_diagonal or series"));
    }
    cfg.x.build(cfg.dim).map_err(|m| e.err("x", m))?;
    cfg.z.build(cfg.dim).map_err(|m| e.err("z", m))?;
    if let Some(k) = cfg.cutoff {
        if k == 0 || k > cfg.dim {
            return Err(e.err("K", format!("cutoff {k} outside 1..={}", cfg.dim)));
        }
    }
    Ok(())
}

fn num(v: f64) -> Value {
    if v.is_infinite() {
        json!("inf")
    } else {
        json!(v)
    }
}

impl ExperimentConfig {
    pub fn ensemble_params(&self) -> EnsembleParams {
        EnsembleParams {
            dim: self.dim,
            rho: self.rho,
            p: self.p,
            density: self.density,
            drift: self.drift,
            bandwidth: self.bandwidth,
            field: self.field,
            atoms: self.atoms.clone(),
        }
    }

    pub fn x_vector(&self) -> TruncVector {
        self.x.build(self.dim).expect("validated")
    }

    pub fn z_vector(&self) -> TruncVector {
        self.z.build(self.dim).expect("validated")
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff.unwrap_or(self.dim)
    }

    /// Every resolved key except the execution-only ones, in a fixed order.
    pub fn resolved(&self) -> Vec<(&'static str, Value)> {
        let mut out = vec![
            ("ensemble", json!(self.ensemble)),
            ("rho", num(self.rho)),
            ("density", num(self.density)),
            ("drift", num(self.drift)),
            ("bandwidth", json!(self.bandwidth)),
        ];
        if let Some(atoms) = &self.atoms {
            out.push(("atoms", serde_json::to_value(atoms).expect("atoms serialize")));
        }
        out.extend([
            ("p", num(self.p)),
            ("q", num(self.q)),
            ("n", json!(self.n)),
            ("trials", json!(self.trials)),
            ("T", num(self.t_max)),
            ("grid", json!(self.grid)),
            ("epsilon", json!(self.epsilon)),
            ("x", self.x.to_json()),
            ("z", self.z.to_json()),
            ("N", json!(self.dim)),
            ("field", json!(self.field.as_str())),
            ("seed", json!(self.seed)),
            ("tol", num(self.tol)),
            ("deviation_norm", json!(self.deviation_norm.as_str())),
            ("rho_grid", json!(self.rho_grid)),
            ("d", json!(self.d)),
            ("rule", json!(self.rule)),
            ("probes", json!(self.probes)),
        ]);
        if let Some(k) = self.cutoff {
            out.push(("K", json!(k)));
        }
        out.extend([
            ("n_wot", json!(self.n_wot)),
            ("seeds", json!(self.seeds)),
            ("check_trials", json!(self.check_trials)),
            ("plot", json!(self.plot)),
        ]);
        out
    }

    /// The resolved configuration as a document [`parse_config`] reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.resolved() {
            writeln!(s, "{k} = {v}").expect("write to string");
        }
        s
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.resolved().into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}
