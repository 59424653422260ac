//! Spectral embeddings of synthetic curves and of external point sets.

use super::config::{Experiment, ExperimentConfig, Grid, LaplacianChoice};
use super::csvio::load_csv_dataset;
use super::{fmt_list, resolve_dataset, stream_seed, ExperimentOutput, Table};
use crate::bandwidth::{
    kde_density, knn_distances, median, normalize_bandwidth, sigma0_from_eps, unnormalized_density, BandwidthField,
    Window,
};
use crate::cloud::PointCloud;
use crate::eigen::{eig_generalized, eig_unnormalized, SolverOptions, SpectralResult};
use crate::error::{check_len, Error, Result};
use crate::kernel::{build_affinity, AffinityMatrix, KernelInputs, KernelSpec, KernelVariant, DEFAULT_TRUNCATION_TOL};
use crate::laplacian::LaplacianKind;

/// Fraction of `|v|²` captured by the least-squares projection of `v` onto
/// `span{sin 2πqt, cos 2πqt}`.
pub fn harmonic_energy(t: &[f64], v: &[f64], q: u32) -> Result<f64> {
    check_len(t.len(), v.len())?;
    let w = std::f64::consts::TAU * q as f64;
    let (mut ss, mut sc, mut cc, mut sv, mut cv, mut vv) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &v) in t.iter().zip(v) {
        let (s, c) = (w * t).sin_cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        sv += s * v;
        cv += c * v;
        vv += v * v;
    }
    let det = ss * cc - sc * sc;
    if vv == 0.0 || det <= 0.0 {
        return Err(Error::data("harmonic projection is degenerate"));
    }
    let a = (cc * sv - sc * cv) / det;
    let b = (ss * cv - sc * sv) / det;
    Ok((a * sv + b * cv) / vv)
}

#[derive(Debug, Clone, Copy)]
enum Scale {
    Eps(f64),
    Sigma0(f64),
}

impl Scale {
    fn label(self) -> String {
        match self {
            Scale::Eps(e) => format!("eps={e}"),
            Scale::Sigma0(s) => format!("sigma0={s}"),
        }
    }
}

struct KernelContext<'a> {
    x: &'a PointCloud,
    bw: &'a BandwidthField,
    /// KDE estimate used by the mixed and density-normalized kernels.
    p_hat: &'a [f64],
    mu_hat: &'a [f64],
    alpha: f64,
    beta: f64,
    tol: f64,
}

impl KernelContext<'_> {
    fn build(&self, variant: KernelVariant, scale: Scale) -> Result<AffinityMatrix> {
        let d = self.bw.intrinsic_dim.unwrap_or(1);
        let sigma0 = |s: Scale| match s {
            Scale::Sigma0(s) => s,
            Scale::Eps(e) => sigma0_from_eps(e, self.bw.k, self.bw.n_ref, d),
        };
        let spec = match variant {
            KernelVariant::SelftunedAlpha => match scale {
                Scale::Eps(e) => KernelSpec::selftuned_eps(e, self.alpha),
                Scale::Sigma0(s) => KernelSpec::selftuned_sigma0(s, self.alpha),
            },
            KernelVariant::MixedRhoP => match scale {
                Scale::Eps(e) => KernelSpec::mixed_eps(e),
                Scale::Sigma0(s) => KernelSpec::mixed_sigma0(s),
            },
            KernelVariant::MnistW1 => KernelSpec::mnist_w1(sigma0(scale)),
            KernelVariant::MnistWprime => KernelSpec::mnist_wprime(sigma0(scale)),
            KernelVariant::FixedBeta => {
                let eps = match scale {
                    Scale::Eps(e) => e,
                    Scale::Sigma0(s) => (s * median(&self.bw.knn_dist)).powi(2),
                };
                KernelSpec::fixed(eps, self.beta)
            }
        };
        let inputs = KernelInputs {
            bandwidth: Some(self.bw),
            p_hat: Some(self.p_hat),
            mu_hat: Some(self.mu_hat),
        };
        build_affinity(self.x, inputs, &spec.with_truncation(self.tol))
    }
}

/// `(D - W) v = λ v` or `(D - W) v = λ D diag(c b²) v`.
fn solve(w: &AffinityMatrix, kind: LaplacianKind, m: usize, tol: f64) -> Result<SpectralResult> {
    match kind {
        LaplacianKind::Un => eig_unnormalized(w, m, tol),
        LaplacianKind::RwPrime => {
            let b2 = w
                .bandwidth2
                .as_ref()
                .ok_or_else(|| Error::config("rw_prime needs the kernel's bandwidths"))?;
            let b: Vec<f64> = w.matrix.row_sums().iter().zip(b2).map(|(d, b)| d * b).collect();
            eig_generalized(w, &b, m, &SolverOptions::with_tol(tol))
        }
    }
}

fn kinds(choice: LaplacianChoice) -> Vec<LaplacianKind> {
    match choice {
        LaplacianChoice::Un => vec![LaplacianKind::Un],
        LaplacianChoice::RwPrime => vec![LaplacianKind::RwPrime],
        LaplacianChoice::Both => vec![LaplacianKind::Un, LaplacianKind::RwPrime],
    }
}

fn choice_name(choice: LaplacianChoice) -> &'static str {
    match choice {
        LaplacianChoice::Un => "un",
        LaplacianChoice::RwPrime => "rw_prime",
        LaplacianChoice::Both => "both",
    }
}

fn eigen_tables(x: &PointCloud, result: &SpectralResult) -> (Table, Table) {
    let mut values = Table::with_columns(&["index", "lambda", "residual"]);
    for (i, (l, r)) in result.eigenvalues.iter().zip(&result.residuals).enumerate() {
        values.push(vec![i.to_string(), l.to_string(), r.to_string()]);
    }
    let mut header = vec!["index".to_string()];
    if x.intrinsic().is_some() {
        header.push("t".into());
    }
    if x.labels().is_some() {
        header.push("label".into());
    }
    // The constant vector comes first and is not exported.
    header.extend((1..result.eigenvectors.len()).map(|j| format!("v{j}")));
    let mut vectors = Table::new(header);
    for i in 0..x.len() {
        let mut row = vec![i.to_string()];
        if let Some(t) = x.intrinsic() {
            row.push(t[i].to_string());
        }
        if let Some(l) = x.labels() {
            row.push(l[i].to_string());
        }
        row.extend(result.eigenvectors[1..].iter().map(|v| v[i].to_string()));
        vectors.push(row);
    }
    (values, vectors)
}

fn scales(cfg: &ExperimentConfig, out: &mut ExperimentOutput, default: Scale) -> Result<Vec<Scale>> {
    let s = if let Some(g) = &cfg.sigma0_grid {
        g.values.iter().map(|&s| Scale::Sigma0(s)).collect()
    } else if let Some(s) = cfg.sigma0 {
        vec![Scale::Sigma0(s)]
    } else if let Some(g) = &cfg.eps_grid {
        g.values.iter().map(|&e| Scale::Eps(e)).collect()
    } else if let Some(e) = cfg.eps {
        vec![Scale::Eps(e)]
    } else {
        vec![default]
    };
    let labels: Vec<String> = s.iter().map(|s: &Scale| s.label()).collect();
    out.param("scales", labels.join(","));
    Ok(s)
}

pub fn run_embedding(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new(Experiment::Embedding);
    let data = resolve_dataset(cfg, &mut out)?;
    let d = data.intrinsic_dim();
    let n_x = out.param("n_x", cfg.n_x.unwrap_or(1000));
    let k_x = out.param("k_x", cfg.k_x.unwrap_or(21));
    let variant = cfg.kernel.unwrap_or(KernelVariant::MixedRhoP);
    out.param("kernel", variant.name());
    let alpha = out.param("alpha", cfg.alpha.unwrap_or(1.0 - d as f64 / 2.0));
    let beta = out.param("beta", cfg.beta.unwrap_or(0.0));
    let choice = cfg.laplacian.unwrap_or(LaplacianChoice::Both);
    out.param("laplacian", choice_name(choice));
    let m = out.param("eigs", cfg.eigs.unwrap_or(4));
    let tol = out.param("solver_tol", cfg.solver_tol.unwrap_or(1e-8));
    let trunc = out.param("truncation_tol", cfg.truncation_tol.unwrap_or(DEFAULT_TRUNCATION_TOL));
    let scales = scales(cfg, &mut out, Scale::Eps(1e-4))?;

    let x = data.sample_points(n_x, stream_seed(data.seed, 0))?;
    let bw = normalize_bandwidth(knn_distances(&x, &x, k_x, true)?, d, Window::Indicator)?;
    let eps_kde = median(&bw.knn_dist).powi(2);
    out.param("eps_kde", eps_kde);
    let p_hat = kde_density(&x, &x, eps_kde, d)?;
    let mu_hat = unnormalized_density(&x, &x, eps_kde)?;
    let ctx = KernelContext {
        x: &x,
        bw: &bw,
        p_hat: &p_hat,
        mu_hat: &mu_hat,
        alpha,
        beta,
        tol: trunc,
    };
    let t = x.intrinsic().expect("samples carry t");
    for (p, &scale) in scales.iter().enumerate() {
        let w = ctx.build(variant, scale)?;
        for kind in kinds(choice) {
            let result = solve(&w, kind, m + 1, tol)?;
            for (j, v) in result.eigenvectors.iter().enumerate().skip(1) {
                let q = j.div_ceil(2) as u32;
                let e = harmonic_energy(t, v, q)?;
                out.summary.insert(format!("energy.{}.p{p}.v{j}", kind.name()), e);
            }
            for (j, l) in result.eigenvalues.iter().enumerate() {
                out.summary.insert(format!("lambda.{}.p{p}.{j}", kind.name()), *l);
            }
            let (values, vectors) = eigen_tables(&x, &result);
            let stem = format!("embedding_{}_p{p}", kind.name());
            out.tables.push((format!("{stem}_eigenvalues.csv"), values));
            out.tables.push((format!("{stem}_eigenvectors.csv"), vectors));
        }
    }
    let mut pts = Vec::new();
    super::csvio::write_points_csv(&x, &mut pts)?;
    out.tables.push(("embedding_points.csv".into(), Table::read(pts.as_slice())?));
    Ok(out)
}

/// Degrees without the self-affinity term.
fn offdiag_ratio(w: &AffinityMatrix) -> (f64, f64) {
    let deg = w.matrix.offdiag_row_sums();
    let lo = deg.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = deg.iter().copied().fold(0.0, f64::max);
    (lo, hi)
}

pub fn run_external_embedding(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new(Experiment::ExternalEmbedding);
    let x = match &cfg.input_csv {
        Some(path) => {
            out.param("input_csv", path.display());
            load_csv_dataset(path)?
        }
        None => {
            let data = resolve_dataset(cfg, &mut out)?;
            let n_x = out.param("n_x", cfg.n_x.unwrap_or(1000));
            data.sample_points(n_x, stream_seed(data.seed, 0))?
        }
    };
    let k_x = out.param("k_x", cfg.k_x.unwrap_or(7));
    let beta = out.param("beta", cfg.beta.unwrap_or(0.0));
    let alpha = out.param("alpha", cfg.alpha.unwrap_or(1.0));
    let m = out.param("eigs", cfg.eigs.unwrap_or(3));
    let tol = out.param("solver_tol", cfg.solver_tol.unwrap_or(1e-8));
    let trunc = out.param("truncation_tol", cfg.truncation_tol.unwrap_or(DEFAULT_TRUNCATION_TOL));
    let variants = match cfg.kernel {
        Some(v) => vec![v],
        None => vec![KernelVariant::FixedBeta, KernelVariant::MnistW1, KernelVariant::MnistWprime],
    };
    out.param("kernels", variants.iter().map(|v| v.name()).collect::<Vec<_>>().join(","));
    if cfg.eps.is_some() || cfg.eps_grid.is_some() {
        return Err(Error::config("external_embedding takes sigma0 or sigma0_grid, not eps"));
    }
    let sigma0s = match (&cfg.sigma0_grid, cfg.sigma0) {
        (Some(g), _) => g.values.clone(),
        (None, Some(s)) => vec![s],
        (None, None) => Grid::parse("0.25:2:4")?.values,
    };
    out.param("sigma0_grid", fmt_list(&sigma0s));
    let scales: Vec<Scale> = sigma0s.iter().map(|&s| Scale::Sigma0(s)).collect();

    let bw = knn_distances(&x, &x, k_x, true)?;
    let eps_kde = median(&bw.knn_dist).powi(2);
    out.param("eps_kde", eps_kde);
    let mu_hat = unnormalized_density(&x, &x, eps_kde)?;
    let ctx = KernelContext {
        x: &x,
        bw: &bw,
        p_hat: &mu_hat,
        mu_hat: &mu_hat,
        alpha,
        beta,
        tol: trunc,
    };
    let mut degrees = Table::with_columns(&["kernel", "param", "sigma0", "min_degree", "max_degree", "ratio"]);
    for variant in &variants {
        for (p, &scale) in scales.iter().enumerate() {
            let w = ctx.build(*variant, scale)?;
            let (lo, hi) = offdiag_ratio(&w);
            let ratio = hi / lo;
            let sigma0 = match scale {
                Scale::Sigma0(s) | Scale::Eps(s) => s,
            };
            degrees.push(vec![
                variant.name().into(),
                format!("p{p}"),
                sigma0.to_string(),
                lo.to_string(),
                hi.to_string(),
                ratio.to_string(),
            ]);
            out.summary.insert(format!("degree_ratio.{}.p{p}", variant.name()), ratio);
            let result = solve(&w, LaplacianKind::RwPrime, m + 1, tol)?;
            for (j, l) in result.eigenvalues.iter().enumerate() {
                out.summary.insert(format!("lambda.{}.p{p}.{j}", variant.name()), *l);
            }
            let (values, vectors) = eigen_tables(&x, &result);
            let stem = format!("external_{}_p{p}", variant.name());
            out.tables.push((format!("{stem}_eigenvalues.csv"), values));
            out.tables.push((format!("{stem}_eigenvectors.csv"), vectors));
        }
    }
    out.tables.push(("external_degrees.csv".into(), degrees));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_energy_of_pure_modes() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let v: Vec<f64> = t.iter().map(|t| (std::f64::consts::TAU * t + 0.3).sin()).collect();
        assert!((harmonic_energy(&t, &v, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(harmonic_energy(&t, &v, 2).unwrap() < 1e-12);
        assert!(harmonic_energy(&t, &vec![0.0; 200], 1).is_err());
    }

    #[test]
    fn small_embedding() {
        let mut cfg = ExperimentConfig::default();
        cfg.n_x = Some(300);
        cfg.density = Some("uniform".into());
        cfg.eps = Some(1e-3);
        let out = run_embedding(&cfg).unwrap();
        assert!(out.metric("energy.rw_prime.p0.v1").unwrap() > 0.9);
        let vecs = out.table("embedding_un_p0_eigenvectors.csv").unwrap();
        assert_eq!(vecs.header, ["index", "t", "v1", "v2", "v3", "v4"]);
    }

    #[test]
    fn external_from_samples() {
        let mut cfg = ExperimentConfig::default();
        cfg.n_x = Some(200);
        cfg.sigma0 = Some(1.0);
        let out = run_external_embedding(&cfg).unwrap();
        assert_eq!(out.table("external_degrees.csv").unwrap().rows.len(), 3);
        assert!(out.metric("degree_ratio.mnist_w1.p0").unwrap() >= 1.0);
    }

    #[test]
    fn external_rejects_eps() {
        let mut cfg = ExperimentConfig::default();
        cfg.n_x = Some(100);
        cfg.eps = Some(1e-3);
        assert!(matches!(run_external_embedding(&cfg), Err(Error::Config(_))));
    }
}
