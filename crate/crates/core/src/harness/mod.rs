//! Experiment runner: subcommand registry, artifact emission and exit codes.
//!
//! Every subcommand is an [`Experiment`] producing a [`Table`] plus named
//! invariant checks. [`run_experiment`] writes `<name>.csv`, `<name>.json`,
//! `<name>.config` and, when `plot = true`, `<name>.svg` into the output directory.

pub mod config;
mod experiments;
pub mod output;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{parse_config, ConfigError, ExperimentConfig, VectorSpec};
pub use experiments::{oracle_suite, OracleCase};
pub use output::{csv_body, fmt_f64, render_svg, write_csv, Plot, Series, Table};

use crate::ensembles::EnsembleError;
use crate::examples_closed::ExampleError;
use crate::lp_core::LinalgError;
use crate::m_conjugation::CertificateError;
use crate::semigroup_lln::LlnError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown subcommand `{0}`")]
    UnknownSubcommand(String),
    /// The configuration is well formed but names an impossible setup.
    #[error("setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Lln(#[from] LlnError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Example(#[from] ExampleError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn linalg_of_ensemble(e: &EnsembleError) -> Option<&LinalgError> {
    match e {
        EnsembleError::Linalg(l) => Some(l),
        _ => None,
    }
}

fn linalg_of_lln(e: &LlnError) -> Option<&LinalgError> {
    match e {
        LlnError::Linalg(l) => Some(l),
        LlnError::Ensemble(e) => linalg_of_ensemble(e),
        _ => None,
    }
}

fn linalg_of(e: &HarnessError) -> Option<&LinalgError> {
    match e {
        HarnessError::Linalg(l) => Some(l),
        HarnessError::Ensemble(e) => linalg_of_ensemble(e),
        HarnessError::Lln(e) => linalg_of_lln(e),
        HarnessError::Certificate(CertificateError::Linalg(l)) => Some(l),
        HarnessError::Example(ExampleError::Linalg(l)) => Some(l),
        HarnessError::Example(ExampleError::Lln(e)) => linalg_of_lln(e),
        HarnessError::Example(ExampleError::Ensemble(e)) => linalg_of_ensemble(e),
        _ => None,
    }
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::UnknownSubcommand(_) | HarnessError::Setup(_) => EXIT_CONFIG,
            HarnessError::Ensemble(EnsembleError::InvalidParameter(_) | EnsembleError::UnknownKind(_)) => EXIT_CONFIG,
            _ => match linalg_of(self) {
                Some(LinalgError::NonConvergence { .. }) => EXIT_NON_CONVERGENCE,
                _ => EXIT_INVARIANT,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub status: InvariantStatus,
    pub detail: String,
}

impl Invariant {
    pub fn check(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Invariant {
            name: name.into(),
            status: if ok { InvariantStatus::Pass } else { InvariantStatus::Fail },
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == InvariantStatus::Pass
    }
}

/// What an experiment hands back to the runner.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub invariants: Vec<Invariant>,
    /// Subcommand-specific summary merged into the JSON file.
    pub details: Value,
    pub plot: Option<Plot>,
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome, HarnessError>;
}

pub struct ExperimentRegistry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        ExperimentRegistry { entries: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        for e in experiments::builtin() {
            r.register(e);
        }
        r
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.entries.insert(e.name(), e);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Experiment> {
        self.entries.get(name).map(|e| e.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.values().map(|e| (e.name(), e.description())).collect()
    }
}

/// Result of a completed run; the exit code is 0 iff every invariant passed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub invariants: Vec<Invariant>,
    pub artifacts: Vec<PathBuf>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(Invariant::passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_OK
        } else {
            EXIT_INVARIANT
        }
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_summary(
    path: &Path,
    cfg: &ExperimentConfig,
    subcommand: &str,
    invariants: &[Invariant],
    artifacts: &[PathBuf],
    details: Value,
    error: Option<&str>,
) -> std::io::Result<()> {
    let doc = json!({
        "subcommand": subcommand,
        "config": cfg.to_json(),
        "invariants": invariants,
        "artifacts": artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "details": details,
        "error": error,
    });
    fs::write(path, serde_json::to_string_pretty(&doc).expect("summary serializes") + "\n")
}

/// Runs a subcommand and writes its artifacts. Failed invariants still produce
/// every artifact and are reported through [`RunSummary::exit_code`]; an error
/// flushes the config echo with a failure marker before returning.
pub fn run_experiment(
    registry: &ExperimentRegistry,
    subcommand: &str,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RunSummary, HarnessError> {
    let exp = registry
        .get(subcommand)
        .ok_or_else(|| HarnessError::UnknownSubcommand(subcommand.to_string()))?;
    fs::create_dir_all(out_dir)?;
    let stamp = timestamp();
    let path = |ext: &str| out_dir.join(format!("{subcommand}.{ext}"));
    let (csv_path, json_path, config_path) = (path("csv"), path("json"), path("config"));
    fs::write(&config_path, cfg.to_text())?;

    let outcome = match exp.run(cfg) {
        Ok(o) => o,
        Err(err) => {
            let msg = err.to_string().replace('\n', " ");
            write_csv(&csv_path, &stamp, cfg, &Table::default(), Some(&msg))?;
            let artifacts = vec![csv_path, config_path.clone(), json_path.clone()];
            write_summary(&json_path, cfg, subcommand, &[], &artifacts, Value::Null, Some(&msg))?;
            return Err(err);
        }
    };

    let failed: Vec<&str> = outcome
        .invariants
        .iter()
        .filter(|i| !i.passed())
        .map(|i| i.name.as_str())
        .collect();
    let marker = (!failed.is_empty()).then(|| format!("invariants failed: {}", failed.join("; ")));
    write_csv(&csv_path, &stamp, cfg, &outcome.table, marker.as_deref())?;
    let mut artifacts = vec![csv_path, config_path, json_path.clone()];
    if cfg.plot {
        if let Some(plot) = &outcome.plot {
            let svg = path("svg");
            fs::write(&svg, render_svg(plot))?;
            artifacts.push(svg);
        }
    }
    write_summary(
        &json_path,
        cfg,
        subcommand,
        &outcome.invariants,
        &artifacts,
        outcome.details,
        None,
    )?;
    Ok(RunSummary {
        invariants: outcome.invariants,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_every_subcommand() {
        let r = ExperimentRegistry::builtin();
        let mut expected = vec![
            "bounds",
            "chernoff",
            "conj-check",
            "conj-lln",
            "example1",
            "example2",
            "example3",
            "lln",
            "norms",
            "variance-oracle",
        ];
        expected.sort();
        assert_eq!(r.names(), expected);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::UnknownSubcommand("x".into()).exit_code(), EXIT_CONFIG);
        let nc = LinalgError::NonConvergence { best: 1.0, iterations: 3 };
        assert_eq!(HarnessError::Lln(LlnError::Linalg(nc.clone())).exit_code(), EXIT_NON_CONVERGENCE);
        assert_eq!(HarnessError::Linalg(nc).exit_code(), EXIT_NON_CONVERGENCE);
        assert_eq!(HarnessError::Lln(LlnError::GridMismatch).exit_code(), EXIT_INVARIANT);
    }
}
