//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Unknown keys and malformed values are parse errors carrying the line
//! number. Command-line overrides go through [`ExperimentConfig::set`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelVariant;
use crate::manifold::{DensityProfile, Generator, SineTerm, TestFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    BandwidthProfile,
    BandwidthRate,
    DirichletSweep,
    PointwiseSweep,
    StandaloneYStudy,
    Embedding,
    ExternalEmbedding,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::BandwidthProfile,
        Experiment::BandwidthRate,
        Experiment::DirichletSweep,
        Experiment::PointwiseSweep,
        Experiment::StandaloneYStudy,
        Experiment::Embedding,
        Experiment::ExternalEmbedding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::BandwidthProfile => "bandwidth_profile",
            Experiment::BandwidthRate => "bandwidth_rate",
            Experiment::DirichletSweep => "dirichlet_sweep",
            Experiment::PointwiseSweep => "pointwise_sweep",
            Experiment::StandaloneYStudy => "standalone_y_study",
            Experiment::Embedding => "embedding",
            Experiment::ExternalEmbedding => "external_embedding",
        }
    }

    /// Accepts `snake_case` and `kebab-case` names.
    pub fn parse(name: &str) -> Result<Self> {
        let norm = name.trim().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|e| e.name() == norm)
            .ok_or_else(|| Error::config(format!("unknown experiment {name:?}")))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Geometric grid `a:b:steps` (inclusive endpoints), or an explicit
/// comma-separated list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub values: Vec<f64>,
}

impl Grid {
    pub fn geometric(a: f64, b: f64, steps: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::config(format!("grid endpoints must be positive, got {a}:{b}")));
        }
        if steps == 0 || steps > 100_000 {
            return Err(Error::config(format!("grid needs 1 to 100000 steps, got {steps}")));
        }
        if steps == 1 {
            if a != b {
                return Err(Error::config("a one-point grid needs equal endpoints"));
            }
            return Ok(Self { values: vec![a] });
        }
        let ratio = (b / a).ln() / (steps - 1) as f64;
        let mut values: Vec<f64> = (0..steps).map(|i| a * (ratio * i as f64).exp()).collect();
        values[steps - 1] = b;
        Ok(Self { values })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let parts: Vec<&str> = text.split(':').collect();
        match parts.len() {
            1 => {
                let values = text
                    .split(',')
                    .map(|v| parse_positive(v.trim()))
                    .collect::<Result<Vec<f64>>>()?;
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted != values {
                    return Err(Error::config("grid values must be listed in ascending order"));
                }
                Ok(Self { values })
            }
            3 => {
                let a = parse_positive(parts[0].trim())?;
                let b = parse_positive(parts[1].trim())?;
                let steps: usize = parts[2]
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad grid step count {:?}", parts[2])))?;
                if a > b {
                    return Err(Error::config(format!("grid start {a} exceeds end {b}")));
                }
                Self::geometric(a, b, steps)
            }
            _ => Err(Error::config(format!("grid must be a:b:steps or a list, got {text:?}"))),
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

fn parse_positive(text: &str) -> Result<f64> {
    let v: f64 = text
        .parse()
        .map_err(|_| Error::config(format!("not a number: {text:?}")))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::config(format!("expected a positive finite number, got {text:?}")));
    }
    Ok(v)
}

/// `k = max(2, round(c N^e))`, written `N^4/5`, `N^{4/5}`, `0.0845*N^0.8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KRule {
    pub coefficient: f64,
    pub exponent: f64,
}

impl KRule {
    pub fn parse(text: &str) -> Result<Self> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::config(format!("k rule must look like c*N^e, got {text:?}"));
        let (coef, power) = match compact.split_once('*') {
            Some((c, rest)) => (parse_positive(c).map_err(|_| bad())?, rest),
            None => (1.0, compact.as_str()),
        };
        let exp_text = power
            .strip_prefix("N^")
            .or_else(|| power.strip_prefix("n^"))
            .ok_or_else(bad)?;
        let exp_text = exp_text
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .unwrap_or(exp_text);
        let exponent = match exp_text.split_once('/') {
            Some((a, b)) => {
                let a: f64 = a.parse().map_err(|_| bad())?;
                let b: f64 = b.parse().map_err(|_| bad())?;
                if b == 0.0 {
                    return Err(bad());
                }
                a / b
            }
            None => exp_text.parse().map_err(|_| bad())?,
        };
        if !(exponent.is_finite() && exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::config(format!("k rule exponent must lie in (0, 1], got {exponent}")));
        }
        Ok(Self {
            coefficient: coef,
            exponent,
        })
    }

    pub fn k_for(&self, n: usize) -> usize {
        let k = (self.coefficient * (n as f64).powf(self.exponent)).round();
        if k.is_finite() {
            (k as usize).max(2)
        } else {
            2
        }
    }
}

impl fmt::Display for KRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*N^{}", self.coefficient, self.exponent)
    }
}

/// `freq:amp:phase` terms separated by `;`, each `amp sin(2π freq t + phase)`.
pub fn parse_test_function(text: &str) -> Result<TestFunction> {
    if text.trim() == "default" {
        return Ok(TestFunction::default());
    }
    let mut terms = Vec::new();
    for part in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let fields: Vec<&str> = part.split(':').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::config(format!("function term must be freq:amp:phase, got {part:?}")));
        }
        let frequency: u32 = fields[0]
            .parse()
            .map_err(|_| Error::config(format!("bad frequency {:?}", fields[0])))?;
        let amplitude: f64 = fields[1]
            .parse()
            .map_err(|_| Error::config(format!("bad amplitude {:?}", fields[1])))?;
        let phase: f64 = fields[2]
            .parse()
            .map_err(|_| Error::config(format!("bad phase {:?}", fields[2])))?;
        if !(amplitude.is_finite() && phase.is_finite()) {
            return Err(Error::config("function terms must be finite"));
        }
        terms.push(SineTerm {
            frequency,
            amplitude,
            phase,
        });
    }
    if terms.is_empty() {
        return Err(Error::config("test function has no terms"));
    }
    Ok(TestFunction::new(terms))
}

pub fn format_test_function(f: &TestFunction) -> String {
    let parts: Vec<String> = f
        .terms
        .iter()
        .map(|t| format!("{}:{}:{}", t.frequency, t.amplitude, t.phase))
        .collect();
    parts.join(";")
}

/// Which Laplacians an embedding run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianChoice {
    Un,
    RwPrime,
    Both,
}

impl LaplacianChoice {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "un" => Ok(LaplacianChoice::Un),
            "rw_prime" | "rw'" | "rw-prime" => Ok(LaplacianChoice::RwPrime),
            "both" => Ok(LaplacianChoice::Both),
            other => Err(Error::config(format!("unknown laplacian {other:?}"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            LaplacianChoice::Un => "un",
            LaplacianChoice::RwPrime => "rw_prime",
            LaplacianChoice::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub dataset: Option<Generator>,
    pub density: Option<String>,
    pub input_csv: Option<PathBuf>,
    pub n_x: Option<usize>,
    pub n_y: Option<usize>,
    pub k: Option<usize>,
    pub k_x: Option<usize>,
    pub k_rule: Option<KRule>,
    pub k_grid: Option<Vec<usize>>,
    pub n_y_grid: Option<Vec<usize>>,
    pub eps: Option<f64>,
    pub eps_grid: Option<Grid>,
    pub sigma0: Option<f64>,
    pub sigma0_grid: Option<Grid>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub kernel: Option<KernelVariant>,
    pub laplacian: Option<LaplacianChoice>,
    pub queries: Option<usize>,
    pub eigs: Option<usize>,
    pub function: Option<TestFunction>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub truncation_tol: Option<f64>,
    pub solver_tol: Option<f64>,
}

/// Keys accepted in config files, in documentation order.
pub const KEYS: [&str; 27] = [
    "experiment",
    "dataset",
    "density",
    "input_csv",
    "n_x",
    "n_y",
    "k",
    "k_x",
    "k_rule",
    "k_grid",
    "n_y_grid",
    "eps",
    "eps_grid",
    "sigma0",
    "sigma0_grid",
    "alpha",
    "beta",
    "kernel",
    "laplacian",
    "queries",
    "eigs",
    "function",
    "repeats",
    "seed",
    "output_dir",
    "truncation_tol",
    "solver_tol",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse {value:?}")))
}

fn parse_count(key: &str, value: &str) -> Result<usize> {
    let v: usize = parse_num(key, value)?;
    if v == 0 {
        return Err(Error::config(format!("{key} must be at least 1")));
    }
    Ok(v)
}

fn parse_real(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_num(key, value)?;
    if !v.is_finite() {
        return Err(Error::config(format!("{key} must be finite")));
    }
    Ok(v)
}

fn parse_counts(key: &str, value: &str) -> Result<Vec<usize>> {
    let v = value
        .split(',')
        .map(|s| parse_count(key, s))
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(Error::config(format!("{key} is empty")));
    }
    Ok(v)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(idx + 1, format!("expected key = value, got {line:?}")))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "experiment" => self.experiment = Some(Experiment::parse(value)?),
            "dataset" => self.dataset = Some(Generator::parse(value)?),
            "density" => {
                DensityProfile::preset(value)?;
                self.density = Some(value.to_string());
            }
            "input_csv" => self.input_csv = Some(PathBuf::from(value)),
            "n_x" => self.n_x = Some(parse_count(key, value)?),
            "n_y" => self.n_y = Some(parse_count(key, value)?),
            "k" => self.k = Some(parse_count(key, value)?),
            "k_x" => self.k_x = Some(parse_count(key, value)?),
            "k_rule" => self.k_rule = Some(KRule::parse(value)?),
            "k_grid" => self.k_grid = Some(parse_counts(key, value)?),
            "n_y_grid" => self.n_y_grid = Some(parse_counts(key, value)?),
            "eps" => self.eps = Some(parse_positive(value)?),
            "eps_grid" => self.eps_grid = Some(Grid::parse(value)?),
            "sigma0" => self.sigma0 = Some(parse_positive(value)?),
            "sigma0_grid" => self.sigma0_grid = Some(Grid::parse(value)?),
            "alpha" => self.alpha = Some(parse_real(key, value)?),
            "beta" => {
                let b = parse_real(key, value)?;
                if b > 1.0 {
                    return Err(Error::config(format!("beta must be at most 1, got {b}")));
                }
                self.beta = Some(b);
            }
            "kernel" => self.kernel = Some(KernelVariant::parse(value)?),
            "laplacian" => self.laplacian = Some(LaplacianChoice::parse(value)?),
            "queries" => self.queries = Some(parse_count(key, value)?),
            "eigs" => self.eigs = Some(parse_count(key, value)?),
            "function" => self.function = Some(parse_test_function(value)?),
            "repeats" => self.repeats = Some(parse_count(key, value)?),
            "seed" => self.seed = Some(parse_num(key, value)?),
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "truncation_tol" => {
                let t = parse_positive(value)?;
                if t >= 1.0 {
                    return Err(Error::config("truncation_tol must be below 1"));
                }
                self.truncation_tol = Some(t);
            }
            "solver_tol" => self.solver_tol = Some(parse_positive(value)?),
            other => return Err(Error::config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// The explicitly set keys, formatted as they would be written back.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        let join = |v: &Vec<usize>| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        put("experiment", self.experiment.map(|e| e.name().to_string()));
        put(
            "dataset",
            self.dataset.map(|g| match g {
                Generator::CircleR2 => "circle_r2".to_string(),
                Generator::CurveR4 => "curve_r4".to_string(),
            }),
        );
        put("density", self.density.clone());
        put("input_csv", self.input_csv.as_ref().map(|p| p.display().to_string()));
        put("n_x", self.n_x.map(|v| v.to_string()));
        put("n_y", self.n_y.map(|v| v.to_string()));
        put("k", self.k.map(|v| v.to_string()));
        put("k_x", self.k_x.map(|v| v.to_string()));
        put("k_rule", self.k_rule.map(|v| v.to_string()));
        put("k_grid", self.k_grid.as_ref().map(join));
        put("n_y_grid", self.n_y_grid.as_ref().map(join));
        put("eps", self.eps.map(|v| v.to_string()));
        put("eps_grid", self.eps_grid.as_ref().map(|g| g.to_string()));
        put("sigma0", self.sigma0.map(|v| v.to_string()));
        put("sigma0_grid", self.sigma0_grid.as_ref().map(|g| g.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("beta", self.beta.map(|v| v.to_string()));
        put("kernel", self.kernel.map(|v| v.name().to_string()));
        put("laplacian", self.laplacian.map(|v| v.name().to_string()));
        put("queries", self.queries.map(|v| v.to_string()));
        put("eigs", self.eigs.map(|v| v.to_string()));
        put("function", self.function.as_ref().map(format_test_function));
        put("repeats", self.repeats.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("output_dir", self.output_dir.as_ref().map(|p| p.display().to_string()));
        put("truncation_tol", self.truncation_tol.map(|v| v.to_string()));
        put("solver_tol", self.solver_tol.map(|v| v.to_string()));
        m
    }
}
