//! CLI entry point: loads an experiment config (or synthesizes one from
//! flags), runs it and writes the CSV artifact. Exit code 0 on success,
//! nonzero with a message on stderr otherwise.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::Parser;

use riscf::combining::CombinerKind;
use riscf::config::{parse_config, ExperimentConfig, ExperimentKind};
use riscf::experiment::run_experiment;
use riscf::topology::FadingMode;

#[derive(Parser, Debug)]
#[command(
    name = "riscf",
    about = "Uplink simulator for RIS-assisted cell-free massive MIMO with reflection pattern modulation",
    version
)]
struct Cli {
    /// Experiment config file (sectioned key-value text).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Experiment kind: se-cdf | se-vs-m | se-vs-u | se-vs-j | ee-vs-m |
    /// ee-vs-u | ee-vs-rho | optimize | oracle-suite | timing.
    #[arg(long)]
    experiment: Option<String>,

    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Monte Carlo channel trials per drop.
    #[arg(long)]
    trials: Option<u64>,

    /// Output CSV path (defaults to <experiment>.csv).
    #[arg(long)]
    output: Option<PathBuf>,

    /// Local combiner: mr | lmmse.
    #[arg(long)]
    combiner: Option<String>,

    /// Active RIS blocks K (shorthand for a single-entry k-list).
    #[arg(long)]
    k: Option<usize>,

    /// Cascaded-link fading: rayleigh | rician | pure-los.
    #[arg(long)]
    fading: Option<String>,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        parse_config(&text).map_err(|e| e.to_string())?
    } else {
        let kind = cli
            .experiment
            .as_deref()
            .ok_or("either --config or --experiment is required")?;
        ExperimentConfig::new(ExperimentKind::from_str(kind)?)
    };
    if let Some(kind) = &cli.experiment {
        cfg.kind = ExperimentKind::from_str(kind)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(combiner) = &cli.combiner {
        cfg.combiner = match combiner.as_str() {
            "mr" => CombinerKind::Mr,
            "lmmse" => CombinerKind::Lmmse,
            other => return Err(format!("unknown combiner '{other}'")),
        };
    }
    if let Some(k) = cli.k {
        cfg.k_list = vec![k];
        cfg.system.n_active_blocks = k;
    }
    if let Some(fading) = &cli.fading {
        cfg.system.fading = match fading.as_str() {
            "rayleigh" => FadingMode::Rayleigh,
            "rician" => FadingMode::Rician,
            "pure-los" => FadingMode::PureLos,
            other => return Err(format!("unknown fading '{other}'")),
        };
    }
    if let Some(out) = &cli.output {
        cfg.output = Some(out.clone());
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::FAILURE;
        }
    };
    let output = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.kind.as_str())));
    match run_experiment(&cfg) {
        Ok(table) => {
            if let Err(e) = table.write_to(&output) {
                eprintln!("error: cannot write {}: {e}", output.display());
                return ExitCode::FAILURE;
            }
            println!(
                "{}: {} rows -> {}",
                cfg.kind.as_str(),
                table.rows.len(),
                output.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
