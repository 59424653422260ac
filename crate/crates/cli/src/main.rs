//! `selftune <experiment> [flags]`: runs one experiment and writes its CSV
//! tables plus `manifest.json` to the output directory.
//!
//! On success one JSON line describing the run goes to stdout. On failure
//! one JSON line `{"error": kind, "message": ...}` goes to stderr and the
//! exit code is nonzero (2 for usage, configuration and parse errors, 1
//! otherwise).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use selftune::experiments::{self, Experiment, ExperimentConfig};
use selftune::Error;

#[derive(Parser)]
#[command(name = "selftune", version, about = "kNN self-tuned graph Laplacian experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative error of the kNN bandwidth and of the KDE along the curve.
    BandwidthProfile(Common),
    /// Sup error of the kNN bandwidth against N_y.
    BandwidthRate(Common),
    /// Graph Dirichlet form error over an eps grid.
    DirichletSweep(Common),
    /// Pointwise operator errors over an eps grid.
    PointwiseSweep(Common),
    /// Bandwidths from X itself, from stand-alone samples, and exact.
    StandaloneYStudy(Common),
    /// Spectral embedding of a synthetic curve.
    Embedding(Common),
    /// Spectral embedding of a CSV point set (or a sampled curve).
    ExternalEmbedding(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: `out/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Neighbor count: `k` for the operator sweeps, `k_x` for the
    /// embeddings and the stand-alone study, the `k_grid` of the profile.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long)]
    sigma0: Option<String>,
    /// Geometric grid `a:b:steps` or a comma list.
    #[arg(long = "eps-grid")]
    eps_grid: Option<String>,
    /// Any other configuration key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Command::BandwidthProfile(c) => (Experiment::BandwidthProfile, c),
            Command::BandwidthRate(c) => (Experiment::BandwidthRate, c),
            Command::DirichletSweep(c) => (Experiment::DirichletSweep, c),
            Command::PointwiseSweep(c) => (Experiment::PointwiseSweep, c),
            Command::StandaloneYStudy(c) => (Experiment::StandaloneYStudy, c),
            Command::Embedding(c) => (Experiment::Embedding, c),
            Command::ExternalEmbedding(c) => (Experiment::ExternalEmbedding, c),
        }
    }
}

fn resolve(experiment: Experiment, args: &Common) -> selftune::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = cfg.experiment {
        if e != experiment {
            return Err(Error::Config(format!(
                "config file is for {} but the subcommand is {}",
                e.name(),
                experiment.name()
            )));
        }
    }
    cfg.experiment = Some(experiment);
    for item in &args.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got {item:?}")))?;
        cfg.set(key.trim(), value)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(r) = args.repeats {
        cfg.repeats = Some(r);
    }
    if let Some(k) = args.k {
        let key = match experiment {
            Experiment::BandwidthProfile => "k_grid",
            Experiment::BandwidthRate => {
                return Err(Error::Config(
                    "bandwidth-rate takes k_rule or k_grid, not a single --k".into(),
                ))
            }
            Experiment::DirichletSweep | Experiment::PointwiseSweep => "k",
            Experiment::StandaloneYStudy | Experiment::Embedding | Experiment::ExternalEmbedding => "k_x",
        };
        cfg.set(key, &k.to_string())?;
    }
    if let Some(a) = &args.alpha {
        cfg.set("alpha", a)?;
    }
    if let Some(s) = &args.sigma0 {
        cfg.set("sigma0", s)?;
    }
    if let Some(g) = &args.eps_grid {
        cfg.set("eps_grid", g)?;
    }
    Ok(cfg)
}

fn run(experiment: Experiment, args: Common) -> selftune::Result<serde_json::Value> {
    let cfg = resolve(experiment, &args)?;
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));
    let output = experiments::run(&cfg)?;
    let files = experiments::write_outputs(&output, &dir)?;
    Ok(serde_json::json!({
        "experiment": experiment.name(),
        "out": dir.display().to_string(),
        "files": files.len(),
    }))
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return fail("usage", first.trim_start_matches("error: "), 2);
        }
    };
    let (experiment, args) = cli.command.split();
    match run(experiment, args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = match e {
                Error::Config(_) | Error::Parse { .. } => 2,
                _ => 1,
            };
            fail(e.kind(), &e.to_string(), code)
        }
    }
}
