//! Replicated experiments on disk.
//!
//! A run directory holds `rep_<r>.csv` (per-step records) and `rep_<r>.json`
//! (a [`Sidecar`]) for each replication `r`, plus `summary.csv` once aggregated.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::{cost_grid, final_means, summarize, write_summary, GainSeries, SummaryRow};
use crate::config::RunConfig;
use crate::error::{MisoError, Result};
use crate::runner::{read_records, run, write_records, RunLog};

/// Environment variable overriding the output directory.
pub const OUTPUT_DIR_ENV: &str = "MISOKG_OUTPUT_DIR";

/// JSON written next to each replication's CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    /// The effective configuration, overrides applied.
    pub config: RunConfig,
    pub replication: usize,
    pub seed: u64,
    /// Absent when the replication failed before its first step.
    pub log: Option<RunLog>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub seed: u64,
    pub csv: PathBuf,
    pub json: PathBuf,
    /// `None` on full success.
    pub error: Option<String>,
}

pub fn csv_path(dir: &Path, replication: usize) -> PathBuf {
    dir.join(format!("rep_{replication}.csv"))
}

pub fn json_path(dir: &Path, replication: usize) -> PathBuf {
    dir.join(format!("rep_{replication}.json"))
}

/// Runs every replication of `config` on a pool of `jobs` threads and writes the
/// outputs to `config.run.output_dir`. Only configuration and I/O problems are
/// `Err`; failed replications are reported in the outcomes.
pub fn run_experiment(config: &RunConfig, jobs: usize) -> Result<Vec<ReplicationOutcome>> {
    config.validate()?;
    let problem = config.build_problem()?;
    let opts = config.run_options()?;
    let dir = &config.run.output_dir;
    fs::create_dir_all(dir)
        .map_err(|e| MisoError::Config(format!("run.output_dir: cannot create {}: {e}", dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| MisoError::Config(format!("--jobs: {e}")))?;
    let d = problem.dim();
    pool.install(|| {
        use rayon::prelude::*;
        (0..config.run.replications)
            .into_par_iter()
            .map(|r| {
                let seed = config.run.seed.wrapping_add(r as u64);
                let (log, records, error) = match run(&problem, &opts, seed) {
                    Ok(out) => {
                        let failure = out.log.failure.clone();
                        (Some(out.log), out.records, failure)
                    }
                    Err(e) => (None, Vec::new(), Some(e.to_string())),
                };
                if let Some(e) = &error {
                    log::error!("replication {r} (seed {seed}) failed: {e}");
                } else {
                    log::info!("replication {r} (seed {seed}) done");
                }
                let csv = csv_path(dir, r);
                let json = json_path(dir, r);
                write_records(&records, d, fs::File::create(&csv)?)?;
                let sidecar = Sidecar {
                    config: config.clone(),
                    replication: r,
                    seed,
                    log,
                    error: error.clone(),
                };
                let mut text = serde_json::to_string_pretty(&sidecar)?;
                text.push('\n');
                fs::write(&json, text)?;
                Ok(ReplicationOutcome {
                    replication: r,
                    seed,
                    csv,
                    json,
                    error,
                })
            })
            .collect()
    })
}

#[derive(Clone, Debug)]
pub struct AggregateOutcome {
    pub rows: Vec<SummaryRow>,
    pub replications: usize,
    pub final_mean_gain: f64,
    pub mean_total_cost: f64,
    pub summary_path: PathBuf,
}

fn experiment_key(config: &RunConfig) -> Result<serde_json::Value> {
    let mut c = config.clone();
    c.run.output_dir = PathBuf::new();
    Ok(serde_json::to_value(c)?)
}

/// Reads every replication in `dir`, checks they come from one experiment, and
/// writes `summary.csv` on a grid of `grid_points` costs.
pub fn aggregate_dir(dir: &Path, grid_points: usize) -> Result<AggregateOutcome> {
    let entries = fs::read_dir(dir).map_err(|e| MisoError::Config(format!("cannot read {}: {e}", dir.display())))?;
    let mut sidecars: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("rep_"))
        })
        .collect();
    sidecars.sort();
    if sidecars.is_empty() {
        return Err(MisoError::Config(format!("{} holds no replications", dir.display())));
    }
    let mut key = None;
    let mut series = Vec::with_capacity(sidecars.len());
    for path in &sidecars {
        let text = fs::read_to_string(path)?;
        let sidecar: Sidecar = serde_json::from_str(&text)
            .map_err(|e| MisoError::Config(format!("{}: {e}", path.display())))?;
        let k = experiment_key(&sidecar.config)?;
        match &key {
            None => key = Some(k),
            Some(k0) if *k0 != k => {
                return Err(MisoError::Config(format!(
                    "{} comes from a different experiment configuration than {}",
                    path.display(),
                    sidecars[0].display()
                )))
            }
            _ => {}
        }
        let Some(log) = sidecar.log else {
            log::warn!("skipping {}: {}", path.display(), sidecar.error.unwrap_or_default());
            continue;
        };
        let csv = path.with_extension("csv");
        let records = read_records(
            fs::File::open(&csv).map_err(|e| MisoError::Config(format!("cannot open {}: {e}", csv.display())))?,
        )?;
        series.push(GainSeries::from_run(&log, &records)?);
    }
    if series.is_empty() {
        return Err(MisoError::Config(format!("{} holds no successful replications", dir.display())));
    }
    let grid = cost_grid(&series, grid_points)?;
    let rows = summarize(&series, &grid)?;
    let summary_path = dir.join("summary.csv");
    write_summary(&rows, fs::File::create(&summary_path)?)?;
    let (final_mean_gain, mean_total_cost) = final_means(&series);
    Ok(AggregateOutcome {
        rows,
        replications: series.len(),
        final_mean_gain,
        mean_total_cost,
        summary_path,
    })
}
