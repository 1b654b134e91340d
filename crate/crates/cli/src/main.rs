use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, ValueEnum};
use holeguard::runner::{parse_seed_range, run_and_export, summary_table, sweep_and_export};
use holeguard::{parse_scenario, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// Simulate an AODV network under black hole attack, with or without
/// forwarding verification, and write per-bin metrics as CSV.
#[derive(Debug, Parser)]
#[command(name = "holeguard", version)]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Run a single seed, overriding the file's.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Sweep an inclusive seed range, e.g. 1..20.
    #[arg(long)]
    seeds: Option<String>,
    /// Directory for CSV output.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Simulated duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Force the defense on or off.
    #[arg(long, value_enum)]
    defense: Option<Switch>,
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: Args) -> Result<()> {
    let mut config = parse_scenario(&args.scenario)?;
    Overrides {
        seed: args.seed,
        duration: args.duration,
        defense: args.defense.map(|d| matches!(d, Switch::On)),
    }
    .apply(&mut config)
    .context("invalid override")?;

    match &args.seeds {
        None => {
            let (report, path) = run_and_export(&config, &args.out)?;
            print!("{}", report.summary());
            println!("csv: {}", path.display());
        }
        Some(range) => {
            let seeds = parse_seed_range(range).map_err(|e| anyhow!(e))?;
            let results = sweep_and_export(&config, &seeds, &args.out)?;
            let reports: Vec<_> = results.iter().map(|(r, _)| r.clone()).collect();
            println!("scenario {} over {} seeds", config.name, seeds.len());
            print!("{}", summary_table(&reports));
            println!("csv: {} files in {}", results.len(), args.out.display());
        }
    }
    Ok(())
}
