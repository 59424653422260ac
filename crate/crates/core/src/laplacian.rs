//! Graph Laplacian operators, the graph Dirichlet form and error metrics.
//!
//! With `W` the ε-form self-tuned kernel and `D` its degrees,
//!
//! ```text
//! L_un f   = 2 ε^{-d/2-1} / (m2 N) (W f - D f)
//! L_rw′ f  = 2 m0 / (ε m2 ρ̂²) (D⁻¹ W f - f)
//! E_N(f,f) = 1 / (ε m2 N²) Σ_ij ε^{-d/2} W_ij (f_i - f_j)²
//! ```
//!
//! Kernels built in another parametrization are rescaled to the ε-form
//! first, using the factor stored on the [`AffinityMatrix`].

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::experiments::stats::pairwise_sum;
use crate::kernel::AffinityMatrix;
use crate::profile::RadialProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    Un,
    RwPrime,
}

impl LaplacianKind {
    pub fn name(self) -> &'static str {
        match self {
            LaplacianKind::Un => "un",
            LaplacianKind::RwPrime => "rw_prime",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianConfig {
    pub kind: LaplacianKind,
    pub eps: f64,
    pub alpha: f64,
    pub d: usize,
    /// Second moment of `k0`.
    pub m2: f64,
    /// Zeroth moment of `k0`.
    pub m0: f64,
}

impl LaplacianConfig {
    /// Constants of the Gaussian `k0`: `m0 = π^{d/2}`, `m2 = π^{d/2}/2`.
    pub fn gaussian(kind: LaplacianKind, eps: f64, alpha: f64, d: usize) -> Self {
        let k0 = RadialProfile::Gaussian;
        Self {
            kind,
            eps,
            alpha,
            d,
            m2: k0.m2(d),
            m0: k0.m0(d),
        }
    }

    /// Takes `ε` and `α` from the kernel itself.
    pub fn for_matrix(kind: LaplacianKind, w: &AffinityMatrix, d: usize) -> Result<Self> {
        let (eps, _) = w.theory_form()?;
        Ok(Self::gaussian(kind, eps, w.spec.alpha_or_default(), d))
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.d == 0 {
            return Err(Error::config("intrinsic dimension must be at least 1"));
        }
        if !(self.m2 > 0.0 && self.m0 > 0.0) {
            return Err(Error::config("kernel moments must be positive"));
        }
        Ok(())
    }

    /// ε-form scale of `w`, checking that its `ε` agrees with this config.
    fn theory_scale(&self, w: &AffinityMatrix) -> Result<f64> {
        let (eps, scale) = w.theory_form()?;
        if (eps - self.eps).abs() > 1e-9 * eps {
            return Err(Error::config(format!(
                "operator eps {} does not match the kernel's eps {eps}",
                self.eps
            )));
        }
        Ok(scale)
    }
}

/// `Σ_j W_ij (f_j - f_i)` per row; exactly zero for constant `f`.
fn difference_sums(w: &AffinityMatrix, f: &[f64]) -> Vec<f64> {
    let m = &w.matrix;
    (0..m.n())
        .into_par_iter()
        .map(|i| m.row(i).map(|(j, v)| v * (f[j] - f[i])).sum())
        .collect()
}

pub fn apply_l_un(w: &AffinityMatrix, f: &[f64], cfg: &LaplacianConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_len(w.n(), f.len())?;
    let scale = cfg.theory_scale(w)?;
    let n = w.n() as f64;
    let d = cfg.d as f64;
    let c = 2.0 * cfg.eps.powf(-d / 2.0 - 1.0) / (cfg.m2 * n) * scale;
    Ok(difference_sums(w, f).into_iter().map(|s| c * s).collect())
}

pub fn apply_l_rw_prime(w: &AffinityMatrix, f: &[f64], cfg: &LaplacianConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_len(w.n(), f.len())?;
    if w.theory_eps.is_some() {
        cfg.theory_scale(w)?;
    }
    let width2 = w
        .bandwidth2
        .as_ref()
        .ok_or_else(|| Error::config("kernel has no per-node bandwidths"))?;
    let degree = w.matrix.row_sums();
    if let Some(i) = degree.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::data(format!("node {i} has zero degree")));
    }
    let c = 2.0 * cfg.m0 / cfg.m2;
    Ok(difference_sums(w, f)
        .into_iter()
        .enumerate()
        .map(|(i, s)| c / width2[i] * (s / degree[i]))
        .collect())
}

pub fn apply(w: &AffinityMatrix, f: &[f64], cfg: &LaplacianConfig) -> Result<Vec<f64>> {
    match cfg.kind {
        LaplacianKind::Un => apply_l_un(w, f, cfg),
        LaplacianKind::RwPrime => apply_l_rw_prime(w, f, cfg),
    }
}

pub fn dirichlet_form(w: &AffinityMatrix, f: &[f64], cfg: &LaplacianConfig) -> Result<f64> {
    cfg.validate()?;
    check_len(w.n(), f.len())?;
    let scale = cfg.theory_scale(w)?;
    let n = w.n() as f64;
    let d = cfg.d as f64;
    let c = cfg.eps.powf(-d / 2.0) * scale / (cfg.eps * cfg.m2 * n * n);
    Ok(c * w.matrix.quadratic_difference(f)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub err1: f64,
    pub err_inf: f64,
    pub rel1: f64,
    pub rel_inf: f64,
}

pub fn error_metrics(estimate: &[f64], truth: &[f64]) -> Result<ErrorMetrics> {
    check_len(truth.len(), estimate.len())?;
    let abs: Vec<f64> = estimate.iter().zip(truth).map(|(e, t)| (e - t).abs()).collect();
    let truth_abs: Vec<f64> = truth.iter().map(|t| t.abs()).collect();
    let norm1 = pairwise_sum(&truth_abs);
    let norm_inf = truth_abs.iter().copied().fold(0.0, f64::max);
    if !(norm1 > 0.0 && norm_inf > 0.0) {
        return Err(Error::data("truth vector is zero; relative errors are undefined"));
    }
    let err1 = pairwise_sum(&abs);
    let err_inf = abs.iter().copied().fold(0.0, f64::max);
    Ok(ErrorMetrics {
        err1,
        err_inf,
        rel1: err1 / norm1,
        rel_inf: err_inf / norm_inf,
    })
}

/// CSV `index,t,LNf,truth`; `t` left empty when unknown.
pub fn write_operator_csv(t: Option<&[f64]>, lnf: &[f64], truth: &[f64], mut out: impl Write) -> Result<()> {
    check_len(lnf.len(), truth.len())?;
    writeln!(out, "index,t,LNf,truth")?;
    for i in 0..lnf.len() {
        let ti = t.map(|t| t[i].to_string()).unwrap_or_default();
        writeln!(out, "{i},{ti},{},{}", lnf[i], truth[i])?;
    }
    Ok(())
}
