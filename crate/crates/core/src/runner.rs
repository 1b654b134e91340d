//! Running scenarios, alone or over a range of seeds, and writing results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::engine::{self, RunReport};
use crate::error::RunError;
use crate::scenario::ScenarioConfig;

/// Parse an inclusive seed range written `a..b`.
pub fn parse_seed_range(text: &str) -> Result<Vec<u64>, String> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| format!("seed range must look like 1..20, got {text:?}"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|e| format!("bad seed {s:?} in range {text:?}: {e}"))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if a > b {
        return Err(format!("empty seed range {text:?}"));
    }
    Ok((a..=b).collect())
}

pub fn csv_file_name(scenario: &str, seed: u64) -> String {
    format!("{scenario}_{seed}.csv")
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport, RunError> {
    Ok(engine::run(config)?)
}

/// Run once and write `<scenario>_<seed>.csv` into `out_dir`.
pub fn run_and_export(config: &ScenarioConfig, out_dir: &Path) -> Result<(RunReport, PathBuf), RunError> {
    let report = run_scenario(config)?;
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let path = out_dir.join(csv_file_name(&config.name, config.seed));
    report.metrics.export(&path)?;
    Ok((report, path))
}

/// Run the scenario once per seed, in parallel. Results come back in seed
/// order.
pub fn sweep(config: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<RunReport>, RunError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = config.clone();
            c.seed = seed;
            run_scenario(&c)
        })
        .collect()
}

pub fn sweep_and_export(
    config: &ScenarioConfig,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<Vec<(RunReport, PathBuf)>, RunError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = config.clone();
            c.seed = seed;
            run_and_export(&c, out_dir)
        })
        .collect()
}

/// One line per run.
pub fn summary_table(reports: &[RunReport]) -> String {
    let mut s = String::from("seed  generated  delivered  ratio   load_bps    blacklisted\n");
    for r in reports {
        let blacklisted: Vec<String> = r
            .blacklisted_nodes()
            .into_iter()
            .map(|n| format!("{n}@{:.3}", r.detection_time(n).unwrap_or(f64::NAN)))
            .collect();
        let _ = writeln!(
            s,
            "{:<5} {:<10} {:<10} {:<7} {:<11.1} {}",
            r.seed,
            r.counters.data_generated,
            r.counters.data_delivered,
            r.delivery_ratio().map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}")),
            r.mean_load_bps(),
            if blacklisted.is_empty() {
                "-".to_string()
            } else {
                blacklisted.join(" ")
            }
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges_are_inclusive() {
        assert_eq!(parse_seed_range("1..20").unwrap().len(), 20);
        assert_eq!(parse_seed_range("5..5").unwrap(), vec![5]);
        assert!(parse_seed_range("9..2").is_err());
        assert!(parse_seed_range("1-3").is_err());
        assert!(parse_seed_range("a..3").is_err());
    }

    #[test]
    fn csv_names_carry_scenario_and_seed() {
        assert_eq!(csv_file_name("baseline", 7), "baseline_7.csv");
    }
}
