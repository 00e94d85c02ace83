//! Command-line front end: `simulate`, `sweep`, `aggregate`, `validate`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sidelink_sim::config::{load_config, ResolvedConfig};
use sidelink_sim::engine::sweep_with_threads;
use sidelink_sim::export::{aggregate_paths, sweep_point, write_run};
use sidelink_sim::metrics::{aggregate, PirMode};
use sidelink_sim::{run, Error};

#[derive(Parser)]
#[command(name = "sidelink-sim", version, about = "NR V2X sidelink platooning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML scenario file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any key, e.g. `--set radio.shadowing_sigma_db=0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write metrics.csv and manifest.toml.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every (group C count, seed) combination.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Inclusive seed range `A..B` or a single seed.
        #[arg(long)]
        seeds: String,
        /// Comma-separated group C counts.
        #[arg(long = "group-c", value_delimiter = ',')]
        group_c: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Per-run CSVs (files or directories) to one percentile CSV.
    Aggregate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = ["per-pair", "per-ue"], default_value = "per-pair")]
        pir_mode: String,
    },
    /// Check a configuration and print the resolved manifest.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn overrides(set: &[String]) -> Result<Vec<(String, String)>, Error> {
    set.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("`--set {kv}` is not KEY=VALUE")))
        })
        .collect()
}

fn resolve(cfg: &ConfigArgs, extra: Vec<(String, String)>) -> Result<ResolvedConfig, Error> {
    let mut flags = overrides(&cfg.set)?;
    flags.extend(extra);
    load_config(cfg.config.as_deref(), &flags)
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Config(format!("invalid seed range `{s}` (expected A..B)"));
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}

fn write_aggregate(path: &Path, series: &sidelink_sim::metrics::PercentileSeries) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    series.write_csv(BufWriter::new(File::create(path)?))
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { cfg, seed, out } => {
            let extra = seed.map(|s| ("seed".to_string(), s.to_string())).into_iter().collect();
            let resolved = resolve(&cfg, extra)?;
            let store = run(&resolved.config)?;
            write_run(&out, &resolved, &store)?;
            eprintln!("{}: {} UEs -> {}", store.run_id, store.ues.len(), out.display());
        }
        Command::Sweep {
            cfg,
            seeds,
            group_c,
            out,
            parallel,
        } => {
            let resolved = resolve(&cfg, Vec::new())?;
            let seeds = parse_seeds(&seeds)?;
            if group_c.is_empty() {
                return Err(Error::Config("--group-c needs at least one count".into()));
            }
            let stores = sweep_with_threads(&resolved.config, &group_c, &seeds, parallel.max(1))?;
            for (key, store) in &stores {
                let point = sweep_point(&resolved, key.group_c_count, key.seed);
                write_run(&out.join(&store.run_id), &point, store)?;
            }
            let series = aggregate(stores.values(), resolved.config.metrics.pir_mode);
            write_aggregate(&out.join("aggregate.csv"), &series)?;
            eprintln!("{} runs -> {}", stores.len(), out.display());
        }
        Command::Aggregate { inputs, out, pir_mode } => {
            let mode = if pir_mode == "per-ue" { PirMode::PerUe } else { PirMode::PerPair };
            let series = aggregate_paths(&inputs, mode)?;
            if series.rows.is_empty() {
                return Err(Error::InvalidArgument("no per-run metrics found in the inputs".into()));
            }
            write_aggregate(&out, &series)?;
        }
        Command::Validate { cfg } => {
            let resolved = resolve(&cfg, Vec::new())?;
            print!("{}", resolved.manifest());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
