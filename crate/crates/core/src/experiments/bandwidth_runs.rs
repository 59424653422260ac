//! Bandwidth accuracy experiments: error profile along the manifold and
//! the sup-error rate in `N_y`.

use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig, KRule};
use super::stats::{loglog_slope, Summary, SweepRow};
use super::{fmt_list, params, repeat_seed, resolve_dataset, resolve_dataset_with, resolve_repeats, stream_seed, ExperimentOutput, Table};
use crate::bandwidth::{
    eps_from_sigma0, kde_density, knn_distances_with, normalize_bandwidth, relative_error_profile, Window,
};
use crate::error::{Error, Result};
use crate::spatial::NeighborIndex;

const DEFAULT_K_RULE: &str = "0.0845*N^0.8";

/// Mean of the lowest-density tenth of `err` over the highest-density tenth.
pub(crate) fn decile_ratio(density: &[f64], err: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..density.len()).collect();
    order.sort_by(|&a, &b| density[a].total_cmp(&density[b]).then(a.cmp(&b)));
    let m = density.len().div_ceil(10).max(1);
    let mean = |idx: &[usize]| idx.iter().map(|&i| err[i]).sum::<f64>() / idx.len() as f64;
    mean(&order[..m]) / mean(&order[order.len() - m..])
}

pub fn run_bandwidth_profile(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new(Experiment::BandwidthProfile);
    let data = resolve_dataset(cfg, &mut out)?;
    let d = data.intrinsic_dim();
    let repeats = resolve_repeats(cfg, &mut out);
    let n_y = out.param("n_y", cfg.n_y.unwrap_or(5000));
    let ks = cfg.k_grid.clone().unwrap_or_else(|| vec![8, 16, 32, 64]);
    out.param("k_grid", fmt_list(&ks));
    // KDE at the bandwidth matched to each k unless a grid is given.
    let kde_eps: Vec<f64> = match &cfg.eps_grid {
        Some(g) => g.values.clone(),
        None => ks.iter().map(|&k| eps_from_sigma0(1.0, k, n_y, d)).collect(),
    };
    out.param("eps_grid", fmt_list(&kde_eps));
    let queries = data.grid_points(out.param("queries", cfg.queries.unwrap_or(500)))?;
    let t = queries.intrinsic().expect("grid points carry t").to_vec();
    let density: Vec<f64> = t.iter().map(|&s| data.eval_density(s)).collect();
    let rho_bar: Vec<f64> = t.iter().map(|&s| data.eval_barrho(s)).collect();
    let seed = data.seed;

    // errors[r][param][location]
    let errors: Vec<Vec<Vec<f64>>> = (0..repeats)
        .into_par_iter()
        .map(|r| -> Result<Vec<Vec<f64>>> {
            let y = data.sample_points(n_y, stream_seed(repeat_seed(seed, r), 0))?;
            let index = NeighborIndex::new(&y);
            let mut rows = Vec::with_capacity(ks.len() + kde_eps.len());
            for &k in &ks {
                let field = normalize_bandwidth(knn_distances_with(&index, &queries, k, false)?, d, Window::Indicator)?;
                rows.push(relative_error_profile(field.rho()?, &rho_bar, &t)?.pointwise_rel);
            }
            for &eps in &kde_eps {
                let p_hat = kde_density(&queries, &y, eps, d)?;
                rows.push(relative_error_profile(&p_hat, &density, &t)?.pointwise_rel);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let labels: Vec<(&str, String)> = ks
        .iter()
        .map(|k| ("rho_hat", format!("k={k}")))
        .chain(kde_eps.iter().map(|e| ("kde", format!("eps={e}"))))
        .collect();
    let mut table = Table::with_columns(&[
        "estimator", "param", "index", "t", "density", "mean_rel_err", "stderr", "repeats",
    ]);
    for (p, (estimator, label)) in labels.iter().enumerate() {
        let mut means = Vec::with_capacity(t.len());
        for i in 0..t.len() {
            let sample: Vec<f64> = errors.iter().map(|rep| rep[p][i]).collect();
            let s = Summary::of(&sample);
            means.push(s.mean);
            table.push(vec![
                estimator.to_string(),
                label.clone(),
                i.to_string(),
                t[i].to_string(),
                density[i].to_string(),
                s.mean.to_string(),
                s.stderr.to_string(),
                s.repeats.to_string(),
            ]);
        }
        let ratio = decile_ratio(&density, &means);
        let overall = means.iter().sum::<f64>() / means.len() as f64;
        out.summary.insert(format!("{estimator}.{label}.decile_ratio"), ratio);
        out.summary.insert(format!("{estimator}.{label}.mean_rel_err"), overall);
        let param_pairs = params(&[("estimator", estimator.to_string()), ("param", label.clone())]);
        out.rows.push(SweepRow::new(
            param_pairs.clone(),
            "decile_ratio",
            Summary { mean: ratio, stderr: f64::NAN, repeats },
        ));
    }
    out.tables.push(("bandwidth_profile.csv".into(), table));

    // One realization of the bandwidth field, for plotting.
    let y = data.sample_points(n_y, stream_seed(repeat_seed(seed, 0), 0))?;
    let k0 = ks[0];
    let field = normalize_bandwidth(
        knn_distances_with(&NeighborIndex::new(&y), &queries, k0, false)?,
        d,
        Window::Indicator,
    )?;
    let mut buf = Vec::new();
    field.write_csv(Some(&t), &mut buf)?;
    out.tables.push(("bandwidth_field.csv".into(), Table::read(buf.as_slice())?));
    Ok(out)
}

pub fn run_bandwidth_rate(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new(Experiment::BandwidthRate);
    // The deep minimum of the paper-like profile keeps the sup error
    // bias-dominated over the whole default grid.
    let data = resolve_dataset_with(cfg, &mut out, "moderate")?;
    let d = data.intrinsic_dim();
    let repeats = resolve_repeats(cfg, &mut out);
    let grid = cfg
        .n_y_grid
        .clone()
        .unwrap_or_else(|| vec![2000, 4000, 8000, 16000, 32000]);
    if grid.len() < 3 {
        return Err(Error::config(format!(
            "bandwidth_rate needs at least 3 N_y values, got {}",
            grid.len()
        )));
    }
    out.param("n_y_grid", fmt_list(&grid));
    let ks: Vec<usize> = match (&cfg.k_grid, &cfg.k_rule) {
        (Some(ks), _) => {
            if ks.len() != grid.len() {
                return Err(Error::config("k_grid and n_y_grid must have the same length"));
            }
            ks.clone()
        }
        (None, rule) => {
            let rule = match rule {
                Some(r) => *r,
                None => KRule::parse(DEFAULT_K_RULE)?,
            };
            out.param("k_rule", format!("{}*N^{}", rule.coefficient, rule.exponent));
            grid.iter().map(|&n| rule.k_for(n)).collect()
        }
    };
    out.param("k_grid", fmt_list(&ks));
    let queries = data.grid_points(out.param("queries", cfg.queries.unwrap_or(1000)))?;
    let t = queries.intrinsic().expect("grid points carry t").to_vec();
    let rho_bar: Vec<f64> = t.iter().map(|&s| data.eval_barrho(s)).collect();
    let seed = data.seed;

    // sup[r][g], mean[r][g]
    let per_repeat: Vec<Vec<(f64, f64)>> = (0..repeats)
        .into_par_iter()
        .map(|r| -> Result<Vec<(f64, f64)>> {
            let base = repeat_seed(seed, r);
            grid.iter()
                .zip(&ks)
                .enumerate()
                .map(|(g, (&n, &k))| {
                    let y = data.sample_points(n, stream_seed(base, g as u64))?;
                    let index = NeighborIndex::new(&y);
                    let field = normalize_bandwidth(knn_distances_with(&index, &queries, k, false)?, d, Window::Indicator)?;
                    let prof = relative_error_profile(field.rho()?, &rho_bar, &t)?;
                    let mean = prof.pointwise_rel.iter().sum::<f64>() / t.len() as f64;
                    Ok((prof.sup_rel, mean))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut sup_means = Vec::with_capacity(grid.len());
    for (g, (&n, &k)) in grid.iter().zip(&ks).enumerate() {
        let sup: Vec<f64> = per_repeat.iter().map(|rep| rep[g].0).collect();
        let mean: Vec<f64> = per_repeat.iter().map(|rep| rep[g].1).collect();
        let p = params(&[("n_y", n.to_string()), ("k", k.to_string())]);
        let s = Summary::of(&sup);
        sup_means.push(s.mean);
        out.rows.push(SweepRow::new(p.clone(), "sup_rel_err", s));
        out.rows.push(SweepRow::new(p, "mean_rel_err", Summary::of(&mean)));
    }
    let xs: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    let fit = loglog_slope(&xs, &sup_means, None)?;
    out.summary.insert("slope".into(), fit.slope);
    out.summary.insert("intercept".into(), fit.intercept);
    out.summary.insert("r2".into(), fit.r2);
    let table = out.sweep_table(&["n_y", "k"]);
    out.tables.push(("bandwidth_rate.csv".into(), table));
    Ok(out)
}
