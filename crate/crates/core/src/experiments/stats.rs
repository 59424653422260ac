//! Aggregation over repeats and log-log rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, never on thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub repeats: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                repeats: 0,
            };
        }
        let mean = pairwise_sum(values) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            repeats: n,
        }
    }
}

/// One aggregated metric at one parameter setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: Vec<(String, String)>,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub repeats: usize,
}

impl SweepRow {
    pub fn new(params: Vec<(String, String)>, metric: impl Into<String>, summary: Summary) -> Self {
        Self {
            params,
            metric: metric.into(),
            mean: summary.mean,
            stderr: summary.stderr,
            repeats: summary.repeats,
        }
    }

    pub fn param(&self, name: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares slope of `ln y` against `ln x` over `x ∈ [lo, hi]`
/// (all points when `window` is `None`).
pub fn loglog_slope(xs: &[f64], ys: &[f64], window: Option<(f64, f64)>) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&x, &y) in xs.iter().zip(ys) {
        if let Some((lo, hi)) = window {
            if x < lo || x > hi {
                continue;
            }
        }
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(Error::data(format!("log-log fit needs positive values, got ({x}, {y})")));
        }
        lx.push(x.ln());
        ly.push(y.ln());
    }
    let n = lx.len();
    if n < 3 {
        return Err(Error::config(format!("log-log fit needs at least 3 points, got {n}")));
    }
    let mx = pairwise_sum(&lx) / n as f64;
    let my = pairwise_sum(&ly) / n as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::data("log-log fit needs at least two distinct x values"));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r2,
        points: n,
    })
}

/// The first one-decade window `[x_a, 10 x_a]` of the ascending grid `xs`,
/// scanning from the smallest `x`, that holds at least 3 points and over
/// which `ys` decreases (negative fitted slope).
pub fn variance_window(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    for a in 0..xs.len() {
        let lo = xs[a];
        let hi = lo * 10.0 * (1.0 + 1e-9);
        let count = xs.iter().filter(|&&x| x >= lo && x <= hi).count();
        if count < 3 {
            break;
        }
        if let Ok(fit) = loglog_slope(xs, ys, Some((lo, hi))) {
            if fit.slope < 0.0 {
                return Some((lo, hi));
            }
        }
    }
    None
}
