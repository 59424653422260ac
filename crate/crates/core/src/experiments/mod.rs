//! Experiment harness: parameter sweeps over synthetic manifolds and
//! external data, aggregated over seeded repeats.
//!
//! Every runner returns an [`ExperimentOutput`] holding its CSV tables, a
//! flat map of headline numbers, and the fully resolved configuration.
//! [`write_outputs`] stores the tables and a `manifest.json` in a directory.
//! Output is a deterministic function of the configuration.

pub mod config;
pub mod csvio;
pub mod stats;

mod bandwidth_runs;
mod embedding_runs;
mod operator_runs;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{DensityProfile, Generator, ManifoldDataset};

pub use bandwidth_runs::{run_bandwidth_profile, run_bandwidth_rate};
pub use config::{Experiment, ExperimentConfig, Grid, KRule, LaplacianChoice};
pub use csvio::{load_csv_dataset, read_csv_dataset, write_points_csv, Table};
pub use embedding_runs::{harmonic_energy, run_embedding, run_external_embedding};
pub use operator_runs::{run_dirichlet_sweep, run_operator_sweeps, run_pointwise_sweep, run_standalone_y_study};
pub use stats::{loglog_slope, variance_window, SlopeFit, Summary, SweepRow};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_REPEATS: usize = 100;

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub experiment: Experiment,
    /// Every parameter the run used, defaults included.
    pub resolved: BTreeMap<String, String>,
    /// `(file name, table)` pairs.
    pub tables: Vec<(String, Table)>,
    pub summary: BTreeMap<String, f64>,
    pub rows: Vec<SweepRow>,
}

impl ExperimentOutput {
    fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            resolved: BTreeMap::new(),
            tables: Vec::new(),
            summary: BTreeMap::new(),
            rows: Vec::new(),
        }
    }

    /// Records a resolved parameter and passes it through.
    fn param<T: Display>(&mut self, key: &str, value: T) -> T {
        self.resolved.insert(key.to_string(), value.to_string());
        value
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.summary.get(key).copied()
    }

    fn sweep_table(&self, param_names: &[&str]) -> Table {
        let mut cols: Vec<&str> = param_names.to_vec();
        cols.extend(["metric", "mean", "stderr", "repeats"]);
        let mut table = Table::with_columns(&cols);
        for row in &self.rows {
            let mut cells: Vec<String> = param_names
                .iter()
                .map(|p| row.param(p).unwrap_or("").to_string())
                .collect();
            cells.push(row.metric.clone());
            cells.push(row.mean.to_string());
            cells.push(row.stderr.to_string());
            cells.push(row.repeats.to_string());
            table.push(cells);
        }
        table
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    version: &'a str,
    config: &'a BTreeMap<String, String>,
    outputs: Vec<&'a str>,
    summary: &'a BTreeMap<String, f64>,
}

/// Runs the experiment named in `cfg.experiment`.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let experiment = cfg
        .experiment
        .ok_or_else(|| Error::config("no experiment selected"))?;
    run_experiment(experiment, cfg)
}

pub fn run_experiment(experiment: Experiment, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match experiment {
        Experiment::BandwidthProfile => run_bandwidth_profile(cfg),
        Experiment::BandwidthRate => run_bandwidth_rate(cfg),
        Experiment::DirichletSweep => run_dirichlet_sweep(cfg),
        Experiment::PointwiseSweep => run_pointwise_sweep(cfg),
        Experiment::StandaloneYStudy => run_standalone_y_study(cfg),
        Experiment::Embedding => run_embedding(cfg),
        Experiment::ExternalEmbedding => run_external_embedding(cfg),
    }
}

/// Writes every table plus `manifest.json` into `dir`, creating it.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, table) in &output.tables {
        let path = dir.join(name);
        table.write_file(&path)?;
        paths.push(path);
    }
    let manifest = Manifest {
        experiment: output.experiment.name(),
        version: env!("CARGO_PKG_VERSION"),
        config: &output.resolved,
        outputs: output.tables.iter().map(|(n, _)| n.as_str()).collect(),
        summary: &output.summary,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    paths.push(path);
    Ok(paths)
}

/// Seed of repeat `r`: `seed + r`.
fn repeat_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

/// Independent sub-seed `stream` of a repeat seed.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream + 1);
    rng.next_u64()
}

fn resolve_dataset(cfg: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<ManifoldDataset> {
    resolve_dataset_with(cfg, out, "paper-like")
}

fn resolve_dataset_with(cfg: &ExperimentConfig, out: &mut ExperimentOutput, density: &str) -> Result<ManifoldDataset> {
    let generator = cfg.dataset.unwrap_or(Generator::CircleR2);
    out.param(
        "dataset",
        match generator {
            Generator::CircleR2 => "circle_r2",
            Generator::CurveR4 => "curve_r4",
        },
    );
    let density_name = out.param("density", cfg.density.clone().unwrap_or_else(|| density.into()));
    let density = DensityProfile::preset(&density_name)?;
    let seed = out.param("seed", cfg.seed.unwrap_or(DEFAULT_SEED));
    Ok(ManifoldDataset::new(generator, density, seed))
}

fn resolve_repeats(cfg: &ExperimentConfig, out: &mut ExperimentOutput) -> usize {
    out.param("repeats", cfg.repeats.unwrap_or(DEFAULT_REPEATS))
}

fn fmt_list<T: Display>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn params(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}
