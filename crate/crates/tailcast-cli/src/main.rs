//! Command line driver for the tailcast pipeline.
//!
//! Subcommands mirror the four pipeline stages (`features`, `evaluate`,
//! `backtest`, `report`), plus `run` to execute all four in order and
//! `synth` to write a demonstration panel. Configuration lives in a single
//! TOML file; `--seed`, `--jobs`, and `--universe` override it per run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tailcast::artifacts::{self, ArtifactMeta};
use tailcast::exec;
use tailcast::features::{FeatureSubset, MANIFEST_VERSION};
use tailcast::run::{
    cmd_backtest, cmd_evaluate, cmd_features, cmd_report, run_all, RunConfig, FEATURES_CSV,
    RUN_REPORT_JSON,
};
use tailcast::synthetic::{generate, SyntheticConfig};
use tailcast::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tailcast",
    version,
    about = "Correlation-spectrum features, walk-forward tail classifiers, and a risk-on/risk-off backtest",
    propagate_version = true
)]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(short, long, global = true, default_value = "tailcast.toml", value_name = "FILE")]
    config: PathBuf,
    /// Override the seed from the config file.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,
    /// Cap the number of parallel workers (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Use a named asset list from the config file's [universes] table.
    #[arg(long, global = true, value_name = "NAME")]
    universe: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the feature matrix and manifest from the price panel.
    Features {
        /// Restrict the written columns to one family: traditional, spectral, or combined.
        #[arg(long, value_parser = parse_subset, value_name = "FAMILY")]
        subset: Option<FeatureSubset>,
    },
    /// Run the walk-forward evaluation with ablations; writes metrics and predictions.
    Evaluate,
    /// Run the ensemble backtest; writes strategy and benchmark ledgers.
    Backtest,
    /// Assemble the final report from the persisted artifacts.
    Report,
    /// Run all four stages in sequence.
    Run,
    /// Generate a synthetic price panel for demonstrations and smoke tests.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output CSV path.
    #[arg(long, default_value = "panel.csv", value_name = "FILE")]
    out: PathBuf,
    /// Number of trading days to generate.
    #[arg(long, default_value_t = 3000, value_name = "DAYS")]
    days: usize,
}

fn parse_subset(s: &str) -> std::result::Result<FeatureSubset, String> {
    FeatureSubset::from_label(s)
        .ok_or_else(|| format!("expected traditional, spectral, or combined, got {s:?}"))
}

struct FileConfig {
    run: RunConfig,
    universes: BTreeMap<String, Vec<String>>,
}

fn load_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut value: toml::Value =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let universes = match value.as_table_mut().and_then(|t| t.remove("universes")) {
        Some(v) => v
            .try_into()
            .map_err(|e| Error::Config(format!("{}: [universes]: {e}", path.display())))?,
        None => BTreeMap::new(),
    };
    let run: RunConfig =
        value.try_into().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    log::debug!("loaded config from {}", path.display());
    Ok(FileConfig { run, universes })
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let file = load_config(&cli.config)?;
    let mut config = file.run;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(name) = &cli.universe {
        config.universe = file.universes.get(name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "universe {name:?} is not defined in {} (available: {})",
                cli.config.display(),
                if file.universes.is_empty() {
                    "none".to_string()
                } else {
                    file.universes.keys().cloned().collect::<Vec<_>>().join(", ")
                }
            ))
        })?;
    }
    Ok(config)
}

fn synth(args: &SynthArgs, seed: Option<u64>) -> Result<()> {
    let seed = seed.unwrap_or(42);
    let spec = SyntheticConfig { n_days: args.days, seed, ..SyntheticConfig::default() };
    let synth = generate(&spec);
    let meta = ArtifactMeta {
        config_hash: artifacts::config_hash(&("synthetic", args.days, seed))?,
        seed,
        manifest_version: MANIFEST_VERSION,
    };
    artifacts::write_panel_csv(&synth.panel, &meta, &args.out)?;
    println!(
        "synthetic panel: {} days x {} assets -> {}",
        synth.panel.n_dates(),
        synth.panel.symbols().len(),
        args.out.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        exec::configure_threads(jobs);
    }
    if let Command::Synth(args) = &cli.command {
        return synth(args, cli.seed);
    }
    let config = effective_config(cli)?;
    match &cli.command {
        Command::Features { subset } => {
            let mut config = config;
            if let Some(s) = subset {
                config.subset = *s;
            }
            let (meta, features) = cmd_features(&config)?;
            println!(
                "features: {} rows x {} columns ({}) -> {}",
                features.n_rows(),
                features.n_features(),
                config.subset.label(),
                config.artifact_path(FEATURES_CSV).display()
            );
            println!("config hash {} seed {}", meta.config_hash, meta.seed);
        }
        Command::Evaluate => {
            let (report, _) = cmd_evaluate(&config)?;
            println!(
                "walk-forward: {} folds ({} requested) over {} feature rows",
                report.k_effective, report.k_requested, report.n_rows
            );
            println!("{:<12} {:>10} {:>10} {:>8}", "subset", "rally_auc", "crash_auc", "bcd");
            for s in &report.subsets {
                println!(
                    "{:<12} {:>10.4} {:>10.4} {:>8.4}",
                    s.subset.label(),
                    s.rally.pooled_auc,
                    s.crash.pooled_auc,
                    s.bcd_auc
                );
            }
        }
        Command::Backtest => {
            let (report, _) = cmd_backtest(&config)?;
            println!(
                "ensemble: {} of {} grid combinations feasible, {} members kept, out-of-sample from {}",
                report.feasible_combinations,
                report.grid_size,
                report.members.len(),
                report.oos_start_date
            );
            println!(
                "out-of-sample {:<10} {:>8} {:>8} {:>8} {:>9}",
                "series", "sharpe", "cagr", "max_dd", "calmar"
            );
            for (name, stats) in
                [("strategy", &report.strategy.oos), ("benchmark", &report.benchmark.oos)]
            {
                println!(
                    "out-of-sample {:<10} {:>8.3} {:>8.3} {:>8.3} {:>9.3}",
                    name, stats.sharpe, stats.cagr, stats.max_drawdown, stats.calmar
                );
            }
        }
        Command::Report => {
            let report = cmd_report(&config)?;
            println!("report -> {}", config.artifact_path(RUN_REPORT_JSON).display());
            for note in &report.notes {
                println!("note: {note}");
            }
        }
        Command::Run => {
            let report = run_all(&config)?;
            println!(
                "run complete: {} subsets evaluated, {} ensemble members -> {}",
                report.classification.subsets.len(),
                report.strategy.members.len(),
                config.out_dir.display()
            );
        }
        Command::Synth(_) => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
