//! Convergence of the graph Dirichlet form and of the pointwise operators
//! over an ε grid, with bandwidths from a stand-alone sample, from the
//! kernel sample itself, or exact.

use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig, Grid, KRule};
use super::stats::{loglog_slope, variance_window, Summary, SweepRow};
use super::{fmt_list, params, repeat_seed, resolve_dataset, resolve_repeats, stream_seed, ExperimentOutput, Table};
use crate::bandwidth::{knn_distances, normalize_bandwidth, relative_error_profile, BandwidthField, Window};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kernel::{build_selftuned, KernelSpec, DEFAULT_TRUNCATION_TOL};
use crate::laplacian::{apply, dirichlet_form, error_metrics, write_operator_csv, LaplacianConfig, LaplacianKind};
use crate::manifold::{ManifoldDataset, TestFunction};

const METRICS: [&str; 9] = [
    "dirichlet_rel_err",
    "un_err1",
    "un_err_inf",
    "un_rel1",
    "un_rel_inf",
    "rw_prime_err1",
    "rw_prime_err_inf",
    "rw_prime_rel1",
    "rw_prime_rel_inf",
];

fn metric_index(name: &str) -> usize {
    METRICS.iter().position(|m| *m == name).expect("known metric")
}

/// Problem shared by every operator sweep.
struct Setup {
    data: ManifoldDataset,
    f: TestFunction,
    alpha: f64,
    eps: Vec<f64>,
    tol: f64,
    energy: f64,
    n_x: usize,
    repeats: usize,
}

impl Setup {
    fn resolve(cfg: &ExperimentConfig, out: &mut ExperimentOutput, default_grid: &str) -> Result<Self> {
        let data = resolve_dataset(cfg, out)?;
        let repeats = resolve_repeats(cfg, out);
        let n_x = out.param("n_x", cfg.n_x.unwrap_or(2000));
        let alpha = out.param("alpha", cfg.alpha.unwrap_or(1.0));
        let f = cfg.function.clone().unwrap_or_default();
        out.param("function", super::config::format_test_function(&f));
        if f.is_constant() {
            return Err(Error::config("test function is constant, so its Dirichlet energy is zero"));
        }
        let eps = match &cfg.eps_grid {
            Some(g) => g.clone(),
            None => Grid::parse(default_grid)?,
        };
        out.param("eps_grid", fmt_list(&eps.values));
        let tol = out.param("truncation_tol", cfg.truncation_tol.unwrap_or(DEFAULT_TRUNCATION_TOL));
        let energy = data.dirichlet_energy(&f, alpha);
        out.summary.insert("dirichlet_truth".into(), energy);
        Ok(Self {
            data,
            f,
            alpha,
            eps: eps.values,
            tol,
            energy,
            n_x,
            repeats,
        })
    }

    fn sample_x(&self, r: usize) -> Result<PointCloud> {
        self.data.sample_points(self.n_x, stream_seed(repeat_seed(self.data.seed, r), 0))
    }

    fn exact_field(&self, x: &PointCloud, k: usize, n_ref: usize) -> BandwidthField {
        let t = x.intrinsic().expect("samples carry t");
        BandwidthField::from_rho(t.iter().map(|&s| self.data.eval_barrho(s)).collect(), k, n_ref, 1)
    }

    /// Every metric of [`METRICS`] for one kernel sample, bandwidth and ε.
    fn evaluate(&self, x: &PointCloud, bw: &BandwidthField, eps: f64) -> Result<Vec<f64>> {
        let (values, _) = self.operators(x, bw, eps)?;
        Ok(values)
    }

    fn operators(&self, x: &PointCloud, bw: &BandwidthField, eps: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let d = self.data.intrinsic_dim();
        let t = x.intrinsic().expect("samples carry t");
        let fx: Vec<f64> = t.iter().map(|&s| self.f.value(s)).collect();
        let spec = KernelSpec::selftuned_eps(eps, self.alpha).with_truncation(self.tol);
        let w = build_selftuned(x, bw, &spec)?;
        let mut values = Vec::with_capacity(METRICS.len());
        let energy = dirichlet_form(&w, &fx, &LaplacianConfig::gaussian(LaplacianKind::Un, eps, self.alpha, d))?;
        values.push((energy - self.energy).abs() / self.energy);
        let mut outputs = Vec::new();
        for kind in [LaplacianKind::Un, LaplacianKind::RwPrime] {
            let cfg = LaplacianConfig::gaussian(kind, eps, self.alpha, d);
            let lf = apply(&w, &fx, &cfg)?;
            let truth = self.truth(kind, t);
            let m = error_metrics(&lf, &truth)?;
            values.extend([m.err1, m.err_inf, m.rel1, m.rel_inf]);
            outputs.push(lf);
            outputs.push(truth);
        }
        Ok((values, outputs))
    }

    /// `L_un → p^{2(α-1)/d} 𝓛^(α) f` and `L_rw′ → 𝓛^(α) f`.
    fn truth(&self, kind: LaplacianKind, t: &[f64]) -> Vec<f64> {
        let d = self.data.intrinsic_dim() as f64;
        t.iter()
            .map(|&s| {
                let l = self.data.eval_weighted_laplacian(&self.f, s, self.alpha);
                match kind {
                    LaplacianKind::Un => self.data.eval_density(s).powf(2.0 * (self.alpha - 1.0) / d) * l,
                    LaplacianKind::RwPrime => l,
                }
            })
            .collect()
    }
}

/// `curves[source][eps][metric]` aggregated over repeats.
type Curves = Vec<Vec<Vec<Summary>>>;

fn aggregate(per_repeat: &[Vec<Vec<Vec<f64>>>], sources: usize, eps: usize) -> Curves {
    (0..sources)
        .map(|s| {
            (0..eps)
                .map(|e| {
                    (0..METRICS.len())
                        .map(|m| Summary::of(&per_repeat.iter().map(|rep| rep[s][e][m]).collect::<Vec<_>>()))
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn curve(curves: &Curves, source: usize, metric: &str) -> Vec<f64> {
    let m = metric_index(metric);
    curves[source].iter().map(|row| row[m].mean).collect()
}

/// Stand-alone `Y` against exact `ρ̄`, shared by both sweeps.
fn sweep(cfg: &ExperimentConfig, out: &mut ExperimentOutput) -> Result<(Setup, Vec<&'static str>, Curves)> {
    let setup = Setup::resolve(cfg, out, "1e-5:1e-1:17")?;
    let n_y = out.param("n_y", cfg.n_y.unwrap_or(4000));
    let k = out.param("k", cfg.k.unwrap_or(256));
    let d = setup.data.intrinsic_dim();
    let per_repeat: Vec<Vec<Vec<Vec<f64>>>> = (0..setup.repeats)
        .into_par_iter()
        .map(|r| -> Result<_> {
            let x = setup.sample_x(r)?;
            let y = setup
                .data
                .sample_points(n_y, stream_seed(repeat_seed(setup.data.seed, r), 1))?;
            let est = normalize_bandwidth(knn_distances(&x, &y, k, false)?, d, Window::Indicator)?;
            let exact = setup.exact_field(&x, k, n_y);
            [&est, &exact]
                .iter()
                .map(|bw| setup.eps.iter().map(|&e| setup.evaluate(&x, bw, e)).collect())
                .collect()
        })
        .collect::<Result<_>>()?;
    let sources = vec!["estimated", "exact"];
    let curves = aggregate(&per_repeat, sources.len(), setup.eps.len());
    Ok((setup, sources, curves))
}

fn push_rows(out: &mut ExperimentOutput, setup: &Setup, sources: &[&str], curves: &Curves, metrics: &[&str], extra: &[(&str, String)]) {
    for (s, source) in sources.iter().enumerate() {
        for (e, &eps) in setup.eps.iter().enumerate() {
            for metric in metrics {
                let mut p = params(extra);
                p.push(("eps".into(), eps.to_string()));
                p.push(("bandwidth".into(), source.to_string()));
                out.rows.push(SweepRow::new(p, *metric, curves[s][e][metric_index(metric)]));
            }
        }
    }
}

fn best(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::INFINITY);
    for (&x, &y) in xs.iter().zip(ys) {
        if y < best.1 {
            best = (x, y);
        }
    }
    best
}

pub fn run_dirichlet_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new(Experiment::DirichletSweep);
    let (setup, sources, curves) = sweep(cfg, &mut out)?;
    dirichlet_output(&mut out, &setup, &sources, &curves)?;
    Ok(out)
}

pub fn run_pointwise_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new(Experiment::PointwiseSweep);
    let (setup, sources, curves) = sweep(cfg, &mut out)?;
    pointwise_output(&mut out, &setup, &sources, &curves)?;
    Ok(out)
}

/// Both sweeps from a single pass over the repeats; equal to calling
/// [`run_dirichlet_sweep`] and [`run_pointwise_sweep`] separately.
pub fn run_operator_sweeps(cfg: &ExperimentConfig) -> Result<(ExperimentOutput, ExperimentOutput)> {
    let mut dirichlet = ExperimentOutput::new(Experiment::DirichletSweep);
    let (setup, sources, curves) = sweep(cfg, &mut dirichlet)?;
    let mut pointwise = ExperimentOutput::new(Experiment::PointwiseSweep);
    pointwise.resolved = dirichlet.resolved.clone();
    pointwise.summary = dirichlet.summary.clone();
    dirichlet_output(&mut dirichlet, &setup, &sources, &curves)?;
    pointwise_output(&mut pointwise, &setup, &sources, &curves)?;
    Ok((dirichlet, pointwise))
}

fn dirichlet_output(out: &mut ExperimentOutput, setup: &Setup, sources: &[&str], curves: &Curves) -> Result<()> {
    push_rows(out, setup, sources, curves, &["dirichlet_rel_err", "un_rel_inf"], &[]);
    for (s, source) in sources.iter().enumerate() {
        let (eps, err) = best(&setup.eps, &curve(curves, s, "dirichlet_rel_err"));
        out.summary.insert(format!("best_rel_err.{source}"), err);
        out.summary.insert(format!("best_eps.{source}"), eps);
    }
    let inf = curve(curves, 0, "un_rel_inf");
    if let Some((lo, hi)) = variance_window(&setup.eps, &inf) {
        out.summary.insert("window_lo".into(), lo);
        out.summary.insert("window_hi".into(), hi);
        let en = curve(curves, 0, "dirichlet_rel_err");
        out.summary.insert("slope_dirichlet".into(), loglog_slope(&setup.eps, &en, Some((lo, hi)))?.slope);
        out.summary.insert("slope_err_inf".into(), loglog_slope(&setup.eps, &inf, Some((lo, hi)))?.slope);
    }
    let table = out.sweep_table(&["eps", "bandwidth"]);
    out.tables.push(("dirichlet_sweep.csv".into(), table));
    Ok(())
}

fn pointwise_output(out: &mut ExperimentOutput, setup: &Setup, sources: &[&str], curves: &Curves) -> Result<()> {
    let pointwise: Vec<&str> = METRICS[1..].to_vec();
    for metric in &pointwise {
        let (op, name) = metric.split_at(if metric.starts_with("un_") { 2 } else { 8 });
        for (s, source) in sources.iter().enumerate() {
            for (e, &eps) in setup.eps.iter().enumerate() {
                let p = params(&[
                    ("eps", eps.to_string()),
                    ("operator", op.to_string()),
                    ("bandwidth", source.to_string()),
                ]);
                out.rows.push(SweepRow::new(p, &name[1..], curves[s][e][metric_index(metric)]));
            }
        }
    }
    for op in ["un", "rw_prime"] {
        for (s, source) in sources.iter().enumerate() {
            for rel in ["rel1", "rel_inf"] {
                let ys = curve(curves, s, &format!("{op}_{rel}"));
                let (eps, err) = best(&setup.eps, &ys);
                out.summary.insert(format!("min_{rel}.{op}.{source}"), err);
                out.summary.insert(format!("argmin_{rel}.{op}.{source}"), eps);
            }
        }
        let inf = curve(curves, 0, &format!("{op}_rel_inf"));
        if let Some((lo, hi)) = variance_window(&setup.eps, &inf) {
            out.summary.insert(format!("window_lo.{op}"), lo);
            out.summary.insert(format!("window_hi.{op}"), hi);
            out.summary.insert(format!("slope_rel_inf.{op}"), loglog_slope(&setup.eps, &inf, Some((lo, hi)))?.slope);
            let l1 = curve(curves, 0, &format!("{op}_rel1"));
            out.summary.insert(format!("slope_rel1.{op}"), loglog_slope(&setup.eps, &l1, Some((lo, hi)))?.slope);
        }
    }
    let table = out.sweep_table(&["eps", "operator", "bandwidth"]);
    out.tables.push(("pointwise_sweep.csv".into(), table));

    // Operator values of the first repeat at the best ε, for plotting.
    let (best_eps, _) = best(&setup.eps, &curve(curves, 0, "un_rel_inf"));
    let x = setup.sample_x(0)?;
    let n_y: usize = out.resolved["n_y"].parse().expect("recorded");
    let k: usize = out.resolved["k"].parse().expect("recorded");
    let y = setup.data.sample_points(n_y, stream_seed(repeat_seed(setup.data.seed, 0), 1))?;
    let est = normalize_bandwidth(knn_distances(&x, &y, k, false)?, 1, Window::Indicator)?;
    let (_, ops) = setup.operators(&x, &est, best_eps)?;
    let t = x.intrinsic().expect("samples carry t");
    for (i, op) in ["un", "rw_prime"].iter().enumerate() {
        let mut buf = Vec::new();
        write_operator_csv(Some(t), &ops[2 * i], &ops[2 * i + 1], &mut buf)?;
        out.tables.push((format!("operator_{op}.csv"), Table::read(buf.as_slice())?));
    }
    Ok(())
}

pub fn run_standalone_y_study(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new(Experiment::StandaloneYStudy);
    let setup = Setup::resolve(cfg, &mut out, "1e-5:1e-1:9")?;
    let d = setup.data.intrinsic_dim();
    let k_x = out.param("k_x", cfg.k_x.unwrap_or(32));
    let grid = cfg
        .n_y_grid
        .clone()
        .unwrap_or_else(|| vec![2000, 4000, 8000, 16000, 32000]);
    out.param("n_y_grid", fmt_list(&grid));
    let ks: Vec<usize> = match (&cfg.k_grid, cfg.k_rule) {
        (Some(ks), _) if ks.len() == grid.len() => ks.clone(),
        (Some(_), _) => return Err(Error::config("k_grid and n_y_grid must have the same length")),
        (None, rule) => {
            let rule = rule.map_or_else(|| KRule::parse("0.0845*N^0.8"), Ok)?;
            grid.iter().map(|&n| rule.k_for(n)).collect()
        }
    };
    out.param("k_grid", fmt_list(&ks));

    let mut sources = vec![("x".to_string(), setup.n_x, k_x)];
    sources.extend(grid.iter().zip(&ks).map(|(&n, &k)| (format!("y{n}"), n, k)));
    sources.push(("exact".to_string(), 0, 0));

    // per_repeat[r] = (metrics[source][eps], sup bandwidth error[source])
    let per_repeat: Vec<(Vec<Vec<Vec<f64>>>, Vec<f64>)> = (0..setup.repeats)
        .into_par_iter()
        .map(|r| -> Result<_> {
            let base = repeat_seed(setup.data.seed, r);
            let x = setup.sample_x(r)?;
            let t = x.intrinsic().expect("samples carry t");
            let rho_bar: Vec<f64> = t.iter().map(|&s| setup.data.eval_barrho(s)).collect();
            let mut fields = vec![normalize_bandwidth(knn_distances(&x, &x, k_x, true)?, d, Window::Indicator)?];
            for (g, (&n, &k)) in grid.iter().zip(&ks).enumerate() {
                let y = setup.data.sample_points(n, stream_seed(base, 1 + g as u64))?;
                fields.push(normalize_bandwidth(knn_distances(&x, &y, k, false)?, d, Window::Indicator)?);
            }
            fields.push(setup.exact_field(&x, k_x, setup.n_x));
            let sup = fields
                .iter()
                .map(|f| Ok(relative_error_profile(f.rho()?, &rho_bar, t)?.sup_rel))
                .collect::<Result<Vec<f64>>>()?;
            let metrics = fields
                .iter()
                .map(|bw| setup.eps.iter().map(|&e| setup.evaluate(&x, bw, e)).collect())
                .collect::<Result<_>>()?;
            Ok((metrics, sup))
        })
        .collect::<Result<_>>()?;

    let metrics: Vec<Vec<Vec<Vec<f64>>>> = per_repeat.iter().map(|(m, _)| m.clone()).collect();
    let curves = aggregate(&metrics, sources.len(), setup.eps.len());
    let names: Vec<&str> = sources.iter().map(|(n, _, _)| n.as_str()).collect();
    push_rows(&mut out, &setup, &names, &curves, &["dirichlet_rel_err", "un_rel_inf", "rw_prime_rel_inf"], &[]);
    let table = out.sweep_table(&["eps", "bandwidth"]);
    out.tables.push(("standalone_y.csv".into(), table));

    let mut bw_table = Table::with_columns(&["bandwidth", "n_ref", "k", "metric", "mean", "stderr", "repeats"]);
    for (s, (name, n, k)) in sources.iter().enumerate() {
        let sup = Summary::of(&per_repeat.iter().map(|(_, sup)| sup[s]).collect::<Vec<_>>());
        out.summary.insert(format!("sup_rel_err.{name}"), sup.mean);
        let (_, best_d) = best(&setup.eps, &curve(&curves, s, "dirichlet_rel_err"));
        let (_, best_inf) = best(&setup.eps, &curve(&curves, s, "un_rel_inf"));
        out.summary.insert(format!("best_dirichlet_rel_err.{name}"), best_d);
        out.summary.insert(format!("best_un_rel_inf.{name}"), best_inf);
        let (n, k) = if name == "exact" {
            (String::new(), String::new())
        } else {
            (n.to_string(), k.to_string())
        };
        bw_table.push(vec![
            name.clone(),
            n,
            k,
            "sup_rel_err".into(),
            sup.mean.to_string(),
            sup.stderr.to_string(),
            sup.repeats.to_string(),
        ]);
    }
    out.tables.push(("standalone_y_bandwidth.csv".into(), bw_table));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.n_x = Some(300);
        cfg.n_y = Some(400);
        cfg.k = Some(32);
        cfg.repeats = Some(2);
        cfg.eps_grid = Some(Grid::parse("1e-3:1e-1:5").unwrap());
        cfg
    }

    #[test]
    fn dirichlet_rows_cover_grid() {
        let out = run_dirichlet_sweep(&small()).unwrap();
        assert_eq!(out.rows.len(), 2 * 5 * 2);
        assert!(out.metric("best_rel_err.estimated").unwrap().is_finite());
    }

    #[test]
    fn constant_function_is_rejected() {
        let mut cfg = small();
        cfg.function = Some(TestFunction::new(Vec::new()));
        assert!(matches!(run_dirichlet_sweep(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn pointwise_exports_operator_values() {
        let out = run_pointwise_sweep(&small()).unwrap();
        assert_eq!(out.table("operator_un.csv").unwrap().rows.len(), 300);
        assert_eq!(out.rows.len(), 8 * 5 * 2);
    }

    #[test]
    fn standalone_sources() {
        let mut cfg = small();
        cfg.n_y_grid = Some(vec![300, 600]);
        cfg.k_grid = Some(vec![16, 32]);
        cfg.k_x = Some(16);
        let out = run_standalone_y_study(&cfg).unwrap();
        assert_eq!(out.table("standalone_y_bandwidth.csv").unwrap().rows.len(), 4);
        assert!(out.metric("sup_rel_err.exact").unwrap() == 0.0);
    }

    #[test]
    fn combined_sweeps_match_separate_runs() {
        let cfg = small();
        let (d, p) = run_operator_sweeps(&cfg).unwrap();
        assert_eq!(d.rows, run_dirichlet_sweep(&cfg).unwrap().rows);
        assert_eq!(p.rows, run_pointwise_sweep(&cfg).unwrap().rows);
    }
}
