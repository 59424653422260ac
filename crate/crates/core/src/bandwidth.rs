//! kNN bandwidth estimation and fixed-bandwidth density estimates.
//!
//! `R̂(x)` is the distance from `x` to its `k`-th nearest reference point,
//! `R̂(x) = inf { r : #{ j : |y_j - x| < r } >= k }`, and the normalized
//! bandwidth is
//!
//! ```text
//! ρ̂(x) = R̂(x) (k / (m0 N_y))^{-1/d}
//! ```
//!
//! with `m0` the volume of the unit d-ball, so that `ρ̂ → p^{-1/d}`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{dist2, PointCloud};
use crate::error::{check_len, Error, Result};
use crate::profile::RadialProfile;
use crate::spatial::NeighborIndex;

/// kNN window used to define `R̂`; only the indicator is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    Indicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthField {
    /// `R̂_i`, ambient distance units.
    pub knn_dist: Vec<f64>,
    /// `ρ̂_i`, present after [`normalize_bandwidth`].
    pub rho_hat: Option<Vec<f64>>,
    pub k: usize,
    pub n_ref: usize,
    pub intrinsic_dim: Option<usize>,
    /// `m0[h]` of the kNN window; zero until normalized.
    pub m0: f64,
}

impl BandwidthField {
    /// Wraps externally supplied bandwidths, e.g. the population `ρ̄`, as a
    /// field whose `R̂` and `ρ̂` are related by the usual scale factor.
    pub fn from_rho(rho: Vec<f64>, k: usize, n_ref: usize, d: usize) -> Self {
        let m0 = RadialProfile::Indicator.m0(d);
        let scale = rho_scale(k, n_ref, d, m0);
        Self {
            knn_dist: rho.iter().map(|r| r / scale).collect(),
            rho_hat: Some(rho),
            k,
            n_ref,
            intrinsic_dim: Some(d),
            m0,
        }
    }

    pub fn len(&self) -> usize {
        self.knn_dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knn_dist.is_empty()
    }

    /// `ρ̂_i / R̂_i = (k / (m0 N_y))^{-1/d}`.
    pub fn scale(&self) -> Option<f64> {
        self.intrinsic_dim
            .map(|d| rho_scale(self.k, self.n_ref, d, self.m0))
    }

    pub fn rho(&self) -> Result<&[f64]> {
        self.rho_hat
            .as_deref()
            .ok_or_else(|| Error::config("bandwidth field has not been normalized"))
    }

    /// CSV with columns `index,t,knn_dist,rho_hat`; `t` and `rho_hat` are
    /// left empty when unavailable.
    pub fn write_csv(&self, t: Option<&[f64]>, mut out: impl Write) -> Result<()> {
        writeln!(out, "index,t,knn_dist,rho_hat")?;
        for i in 0..self.len() {
            let ti = t.map(|t| t[i].to_string()).unwrap_or_default();
            let rho = self
                .rho_hat
                .as_ref()
                .map(|r| r[i].to_string())
                .unwrap_or_default();
            writeln!(out, "{i},{ti},{},{rho}", self.knn_dist[i])?;
        }
        Ok(())
    }
}

fn rho_scale(k: usize, n_ref: usize, d: usize, m0: f64) -> f64 {
    (k as f64 / (m0 * n_ref as f64)).powf(-1.0 / d as f64)
}

/// `σ₀ ↔ ε` identity: `ε = σ₀² (k / (m0 N_y))^{2/d}`.
pub fn eps_from_sigma0(sigma0: f64, k: usize, n_ref: usize, d: usize) -> f64 {
    let m0 = RadialProfile::Indicator.m0(d);
    sigma0 * sigma0 * (k as f64 / (m0 * n_ref as f64)).powf(2.0 / d as f64)
}

pub fn sigma0_from_eps(eps: f64, k: usize, n_ref: usize, d: usize) -> f64 {
    let m0 = RadialProfile::Indicator.m0(d);
    (eps / (k as f64 / (m0 * n_ref as f64)).powf(2.0 / d as f64)).sqrt()
}

/// `R̂` of every query against `refs`. With `exclude_self`, query `i` and
/// reference `i` are the same point and that pair is skipped.
pub fn knn_distances(
    queries: &PointCloud,
    refs: &PointCloud,
    k: usize,
    exclude_self: bool,
) -> Result<BandwidthField> {
    knn_distances_with(&NeighborIndex::new(refs), queries, k, exclude_self)
}

/// As [`knn_distances`], with a prebuilt reference index.
pub fn knn_distances_with(
    index: &NeighborIndex<'_>,
    queries: &PointCloud,
    k: usize,
    exclude_self: bool,
) -> Result<BandwidthField> {
    let n_ref = index.len();
    if k <= 1 || k >= n_ref {
        return Err(Error::config(format!(
            "k must satisfy 1 < k < N_y, got k = {k} with N_y = {n_ref}"
        )));
    }
    if exclude_self {
        check_len(n_ref, queries.len())?;
    }
    let knn_dist: Vec<f64> = (0..queries.len())
        .into_par_iter()
        .map(|i| {
            let skip = exclude_self.then_some(i);
            index
                .kth_dist2(queries.point(i), k, skip)
                .map(f64::sqrt)
                .unwrap_or(f64::NAN)
        })
        .collect();
    Ok(BandwidthField {
        knn_dist,
        rho_hat: None,
        k,
        n_ref,
        intrinsic_dim: None,
        m0: 0.0,
    })
}

/// Populates `ρ̂` using the volume of the unit d-ball as `m0`.
pub fn normalize_bandwidth(mut field: BandwidthField, d: usize, window: Window) -> Result<BandwidthField> {
    if d == 0 {
        return Err(Error::config("intrinsic dimension must be at least 1"));
    }
    if field.k == 0 || field.n_ref == 0 {
        return Err(Error::config("bandwidth field lacks k or N_y"));
    }
    let m0 = match window {
        Window::Indicator => RadialProfile::Indicator.m0(d),
    };
    let scale = rho_scale(field.k, field.n_ref, d, m0);
    field.rho_hat = Some(field.knn_dist.iter().map(|r| r * scale).collect());
    field.m0 = m0;
    field.intrinsic_dim = Some(d);
    Ok(field)
}

/// Fixed-bandwidth KDE
/// `p̂(x) = ε^{-d/2} / (m0[h_kde] N_y) Σ_j h_kde(|x - y_j|² / ε)` with
/// `h_kde(r) = exp(-r / (4/π))` and `m0[h_kde] = 2^d`.
pub fn kde_density(queries: &PointCloud, refs: &PointCloud, eps: f64, d: usize) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("KDE bandwidth must be positive, got {eps}")));
    }
    check_len(queries.dim(), refs.dim())?;
    if refs.is_empty() {
        return Err(Error::config("KDE needs at least one reference point"));
    }
    let h = RadialProfile::KdeGaussian;
    let prefactor = eps.powf(-(d as f64) / 2.0) / (h.m0(d) * refs.len() as f64);
    Ok(kernel_sums(queries, refs, eps, &h)
        .into_iter()
        .map(|s| prefactor * s)
        .collect())
}

/// `μ̂_i = (1/N_y) Σ_j h_kde(|x_i - y_j|² / ε_kde)`, without the KDE prefactor.
pub fn unnormalized_density(queries: &PointCloud, refs: &PointCloud, eps_kde: f64) -> Result<Vec<f64>> {
    if !(eps_kde > 0.0 && eps_kde.is_finite()) {
        return Err(Error::config(format!("KDE bandwidth must be positive, got {eps_kde}")));
    }
    check_len(queries.dim(), refs.dim())?;
    if refs.is_empty() {
        return Err(Error::config("KDE needs at least one reference point"));
    }
    let n = refs.len() as f64;
    Ok(kernel_sums(queries, refs, eps_kde, &RadialProfile::KdeGaussian)
        .into_iter()
        .map(|s| s / n)
        .collect())
}

/// Terms with `h < 1e-300` are skipped through a radius query; below that the
/// contribution is lost to rounding anyway.
fn kernel_sums(queries: &PointCloud, refs: &PointCloud, eps: f64, h: &RadialProfile) -> Vec<f64> {
    let index = NeighborIndex::new(refs);
    // h_kde(r) < 1e-300 once r (π/4) > 690.
    let radius2 = eps * 690.0 * 4.0 / std::f64::consts::PI;
    (0..queries.len())
        .into_par_iter()
        .map(|i| {
            let q = queries.point(i);
            index
                .within(q, radius2)
                .into_iter()
                .map(|j| h.eval(dist2(q, refs.point(j)) / eps))
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub pointwise_rel: Vec<f64>,
    pub sup_rel: f64,
    pub location: Vec<f64>,
}

/// `|est - truth| / truth` pointwise and its maximum.
pub fn relative_error_profile(estimate: &[f64], truth: &[f64], locations: &[f64]) -> Result<ErrorProfile> {
    check_len(truth.len(), estimate.len())?;
    check_len(truth.len(), locations.len())?;
    if let Some(i) = truth.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::data(format!(
            "truth entry {i} is not positive ({})",
            truth[i]
        )));
    }
    let pointwise_rel: Vec<f64> = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t).abs() / t)
        .collect();
    let sup_rel = pointwise_rel.iter().copied().fold(0.0, f64::max);
    Ok(ErrorProfile {
        pointwise_rel,
        sup_rel,
        location: locations.to_vec(),
    })
}

/// Median of the finite entries (mean of the two middle values for even counts).
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn second_neighbor_on_a_line() {
        let refs = line(&[0.0, 1.0, 3.0]);
        let q = line(&[0.0]);
        let bw = knn_distances(&q, &refs, 2, false).unwrap();
        assert_eq!(bw.knn_dist, vec![1.0]);
    }

    #[test]
    fn k_must_exceed_one() {
        let refs = line(&[0.0, 1.0, 3.0]);
        let q = line(&[0.0]);
        assert!(matches!(knn_distances(&q, &refs, 1, false), Err(Error::Config(_))));
        assert!(matches!(knn_distances(&q, &refs, 3, false), Err(Error::Config(_))));
    }

    #[test]
    fn exclude_self_skips_the_matching_index() {
        let pts = line(&[0.0, 1.0, 3.0, 6.0]);
        let bw = knn_distances(&pts, &pts, 2, true).unwrap();
        assert_eq!(bw.knn_dist, vec![3.0, 2.0, 3.0, 5.0]);
    }

    #[test]
    fn duplicate_references_count_individually() {
        let refs = line(&[0.5, 0.5, 2.0]);
        let bw = knn_distances(&line(&[0.0]), &refs, 2, false).unwrap();
        assert_eq!(bw.knn_dist, vec![0.5]);
    }

    #[test]
    fn normalization_constants() {
        let bw = BandwidthField {
            knn_dist: vec![1.0],
            rho_hat: None,
            k: 2,
            n_ref: 3,
            intrinsic_dim: None,
            m0: 0.0,
        };
        let one = normalize_bandwidth(bw.clone(), 1, Window::Indicator).unwrap();
        assert_eq!(one.m0, 2.0);
        assert!((one.rho_hat.unwrap()[0] - 3.0).abs() < 1e-15);
        let two = normalize_bandwidth(bw, 2, Window::Indicator).unwrap();
        assert!((two.m0 - PI).abs() < 1e-15);
    }

    #[test]
    fn kde_single_point() {
        let p = kde_density(&line(&[0.0]), &line(&[0.0]), 1.0, 1).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!(kde_density(&line(&[0.0]), &line(&[0.0]), 0.0, 1).is_err());
    }

    #[test]
    fn unnormalized_density_examples() {
        let single = unnormalized_density(&line(&[2.0]), &line(&[2.0]), 0.3).unwrap();
        assert_eq!(single, vec![1.0]);
        let pts = line(&[0.0, 1.0, 2.0]);
        let mu = unnormalized_density(&pts, &pts, 1.0).unwrap();
        let expected = ((-PI / 4.0).exp() * 2.0 + 1.0) / 3.0;
        assert!((mu[1] - expected).abs() < 1e-15);
        let far = line(&[0.0, 1e6, 2e6]);
        let mu = unnormalized_density(&far, &far, 1.0).unwrap();
        assert!(mu.iter().all(|&m| (m - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn error_profile_examples() {
        let truth = vec![1.0, 2.0, 4.0];
        let loc = vec![0.0, 0.5, 0.9];
        let same = relative_error_profile(&truth, &truth, &loc).unwrap();
        assert!(same.pointwise_rel.iter().all(|&e| e == 0.0));
        let scaled: Vec<f64> = truth.iter().map(|t| 1.1 * t).collect();
        let prof = relative_error_profile(&scaled, &truth, &loc).unwrap();
        assert!(prof.pointwise_rel.iter().all(|e| (e - 0.1).abs() < 1e-12));
        assert!((prof.sup_rel - 0.1).abs() < 1e-12);
        assert!(matches!(
            relative_error_profile(&truth, &[1.0, 0.0, 1.0], &loc),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn sigma0_eps_round_trip() {
        let eps = eps_from_sigma0(1.3, 21, 1000, 1);
        assert!((sigma0_from_eps(eps, 21, 1000, 1) - 1.3).abs() < 1e-14);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
