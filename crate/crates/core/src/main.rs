use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use oplln::harness::{parse_config, run_experiment, ExperimentRegistry, HarnessError, EXIT_CONFIG};

/// Runs one experiment from a flat key/value config file and writes
/// `<subcommand>.{csv,json,config}` (plus `.svg` when `plot = true`).
#[derive(Debug, Parser)]
#[command(name = "oplln", version, after_help = subcommand_help())]
struct Cli {
    /// Experiment to run.
    subcommand: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `out` from the config, else `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn subcommand_help() -> String {
    let mut s = String::from("Subcommands:\n");
    for (name, desc) in ExperimentRegistry::builtin().describe() {
        s.push_str(&format!("  {name:<16} {desc}\n"));
    }
    s
}

fn run(cli: &Cli) -> Result<i32, HarnessError> {
    let registry = ExperimentRegistry::builtin();
    if registry.get(&cli.subcommand).is_none() {
        return Err(HarnessError::UnknownSubcommand(cli.subcommand.clone()));
    }
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| HarnessError::Setup(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(HarnessError::Setup("--workers must be at least 1".into()));
        }
        cfg.workers = w;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let summary = run_experiment(&registry, &cli.subcommand, &cfg, &out)?;
    for inv in &summary.invariants {
        let tag = if inv.passed() { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", inv.name, inv.detail);
    }
    for path in &summary.artifacts {
        println!("wrote {}", path.display());
    }
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
