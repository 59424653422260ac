//! Synthetic closed curves of length 1 with analytic ground truth.
//!
//! Both generators are parametrized by arclength `t ∈ [0, 1)`, so the density
//! `p`, the test function `f` and the weighted Laplacian
//! `Δ_p f = f'' + (p'/p) f'` are all written directly in `t`.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::profile;

/// Number of grid nodes used to tabulate CDFs and arclengths.
pub const TABLE_SIZE: usize = 1 << 14;
/// Grid resolution for positivity and normalization checks of a density.
pub const CHECK_GRID: usize = 10_000;

/// `amplitude * cos(2π frequency t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityTerm {
    pub frequency: u32,
    pub amplitude: f64,
    pub phase: f64,
}

/// A positive trigonometric density on the unit circle of parameters,
/// `p(t) = (offset + Σ terms(t)) / normalization`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    terms: Vec<DensityTerm>,
    offset: f64,
    normalization: f64,
    p_min: f64,
    p_max: f64,
}

impl DensityProfile {
    /// Builds a profile and computes the normalization so that `∫₀¹ p = 1`.
    pub fn new(offset: f64, terms: Vec<DensityTerm>) -> Result<Self> {
        let mass = offset
            + terms
                .iter()
                .filter(|t| t.frequency == 0)
                .map(|t| t.amplitude * t.phase.cos())
                .sum::<f64>();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::config(format!(
                "density has nonpositive total mass {mass}"
            )));
        }
        Self::with_normalization(offset, terms, mass)
    }

    /// Builds a profile with an explicit normalization, which must make the
    /// density integrate to one (trapezoid rule on 10⁴ points, to 1e-8).
    pub fn with_normalization(offset: f64, terms: Vec<DensityTerm>, normalization: f64) -> Result<Self> {
        if !(normalization.is_finite() && normalization > 0.0) {
            return Err(Error::config("density normalization must be positive"));
        }
        let mut out = Self {
            terms,
            offset,
            normalization,
            p_min: f64::INFINITY,
            p_max: f64::NEG_INFINITY,
        };
        let mut integral = 0.0;
        // Periodic trapezoid rule: every node has weight 1/n.
        for i in 0..CHECK_GRID.max(TABLE_SIZE) {
            let t = i as f64 / CHECK_GRID.max(TABLE_SIZE) as f64;
            let p = out.eval(t);
            if !(p > 0.0) {
                return Err(Error::config(format!(
                    "density is not positive at t = {t}: p = {p}"
                )));
            }
            out.p_min = out.p_min.min(p);
            out.p_max = out.p_max.max(p);
        }
        for i in 0..CHECK_GRID {
            integral += out.eval(i as f64 / CHECK_GRID as f64);
        }
        integral /= CHECK_GRID as f64;
        if (integral - 1.0).abs() > 1e-8 {
            return Err(Error::config(format!(
                "density integrates to {integral}, not 1"
            )));
        }
        Ok(out)
    }

    pub fn uniform() -> Self {
        Self::new(1.0, Vec::new()).expect("uniform density is valid")
    }

    /// `p(t) = 1 - 0.95 sin(2πt)`: minimum 0.05 at `t = 0.25`, maximum 1.95 at `t = 0.75`.
    pub fn paper_like() -> Self {
        Self::new(
            1.0,
            vec![DensityTerm {
                frequency: 1,
                amplitude: 0.95,
                phase: PI / 2.0,
            }],
        )
        .expect("paper-like density is valid")
    }

    /// `p(t) = 1 - 0.5 sin(2πt)`, ratio 3 between max and min.
    pub fn moderate() -> Self {
        Self::new(
            1.0,
            vec![DensityTerm {
                frequency: 1,
                amplitude: 0.5,
                phase: PI / 2.0,
            }],
        )
        .expect("moderate density is valid")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "uniform" => Ok(Self::uniform()),
            "paper-like" | "paper_like" => Ok(Self::paper_like()),
            "moderate" => Ok(Self::moderate()),
            other => Err(Error::config(format!("unknown density preset '{other}'"))),
        }
    }

    pub fn terms(&self) -> &[DensityTerm] {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Minimum over the check grid.
    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut v = self.offset;
        for term in &self.terms {
            v += term.amplitude * (TAU * term.frequency as f64 * t + term.phase).cos();
        }
        v / self.normalization
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for term in &self.terms {
            let w = TAU * term.frequency as f64;
            v -= term.amplitude * w * (w * t + term.phase).sin();
        }
        v / self.normalization
    }

    /// `∫₀ᵗ p`, in closed form.
    pub fn cdf(&self, t: f64) -> f64 {
        let mut v = self.offset * t;
        for term in &self.terms {
            if term.frequency == 0 {
                v += term.amplitude * term.phase.cos() * t;
            } else {
                let w = TAU * term.frequency as f64;
                v += term.amplitude / w * ((w * t + term.phase).sin() - term.phase.sin());
            }
        }
        v / self.normalization
    }
}

/// `Σ amplitude * sin(2π frequency t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub frequency: u32,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub terms: Vec<SineTerm>,
}

impl Default for TestFunction {
    /// `sin(2πt) + 0.5 cos(6πt)`.
    fn default() -> Self {
        Self {
            terms: vec![
                SineTerm {
                    frequency: 1,
                    amplitude: 1.0,
                    phase: 0.0,
                },
                SineTerm {
                    frequency: 3,
                    amplitude: 0.5,
                    phase: PI / 2.0,
                },
            ],
        }
    }
}

impl TestFunction {
    pub fn new(terms: Vec<SineTerm>) -> Self {
        Self { terms }
    }

    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.frequency == 0 || t.amplitude == 0.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|s| s.amplitude * (TAU * s.frequency as f64 * t + s.phase).sin())
            .sum()
    }

    pub fn d1(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|s| {
                let w = TAU * s.frequency as f64;
                s.amplitude * w * (w * t + s.phase).cos()
            })
            .sum()
    }

    pub fn d2(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|s| {
                let w = TAU * s.frequency as f64;
                -s.amplitude * w * w * (w * t + s.phase).sin()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Circle of circumference 1 in R².
    CircleR2,
    /// Closed curve of length 1 in R⁴.
    CurveR4,
}

impl Generator {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "circle_r2" | "circle" => Ok(Generator::CircleR2),
            "curve_r4" | "curve" => Ok(Generator::CurveR4),
            other => Err(Error::config(format!("unknown dataset generator '{other}'"))),
        }
    }

    pub fn ambient_dim(self) -> usize {
        match self {
            Generator::CircleR2 => 2,
            Generator::CurveR4 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDataset {
    pub generator: Generator,
    pub density: DensityProfile,
    /// Default seed for [`ManifoldDataset::sample_default`].
    pub seed: u64,
}

impl ManifoldDataset {
    pub fn new(generator: Generator, density: DensityProfile, seed: u64) -> Self {
        Self {
            generator,
            density,
            seed,
        }
    }

    /// Intrinsic dimension; both generators are curves.
    pub fn intrinsic_dim(&self) -> usize {
        1
    }

    pub fn ambient_dim(&self) -> usize {
        self.generator.ambient_dim()
    }

    /// Total arclength.
    pub fn length(&self) -> f64 {
        1.0
    }

    /// Point of the curve at arclength `t` (wrapped modulo 1).
    pub fn embed(&self, t: f64) -> Vec<f64> {
        let t = wrap(t);
        match self.generator {
            Generator::CircleR2 => {
                let r = 1.0 / TAU;
                vec![r * (TAU * t).cos(), r * (TAU * t).sin()]
            }
            Generator::CurveR4 => {
                let table = curve_table();
                let s = table.parameter_at(t);
                raw_curve(s).iter().map(|c| c / table.total_length).collect()
            }
        }
    }

    /// `n` i.i.d. samples by inverse-CDF of `p` on a 2¹⁴-cell table with
    /// piecewise-linear interpolation. Intrinsic coordinates are retained.
    pub fn sample_points(&self, n: usize, seed: u64) -> Result<PointCloud> {
        if n == 0 {
            return Err(Error::config("sample size must be at least 1"));
        }
        let cdf = self.cdf_table();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            t.push(invert_table(&cdf, u));
        }
        let mut coords = Vec::with_capacity(n * self.ambient_dim());
        for &ti in &t {
            coords.extend(self.embed(ti));
        }
        PointCloud::new(self.ambient_dim(), coords)?.with_intrinsic(t)
    }

    pub fn sample_default(&self, n: usize) -> Result<PointCloud> {
        self.sample_points(n, self.seed)
    }

    /// Evenly spaced evaluation locations `t_i = i / m` embedded in R^D.
    pub fn grid_points(&self, m: usize) -> Result<PointCloud> {
        let t: Vec<f64> = (0..m).map(|i| i as f64 / m as f64).collect();
        let mut coords = Vec::with_capacity(m * self.ambient_dim());
        for &ti in &t {
            coords.extend(self.embed(ti));
        }
        PointCloud::new(self.ambient_dim(), coords)?.with_intrinsic(t)
    }

    fn cdf_table(&self) -> Vec<f64> {
        let mut table: Vec<f64> = (0..=TABLE_SIZE)
            .map(|i| self.density.cdf(i as f64 / TABLE_SIZE as f64))
            .collect();
        table[0] = 0.0;
        table[TABLE_SIZE] = 1.0;
        table
    }

    pub fn eval_density(&self, t: f64) -> f64 {
        self.density.eval(wrap(t))
    }

    /// Population bandwidth `p^{-1/d}`.
    pub fn eval_barrho(&self, t: f64) -> f64 {
        self.eval_density(t).powf(-1.0 / self.intrinsic_dim() as f64)
    }

    /// `p_α = p^{1 + 2(α-1)/d}`, the density whose Dirichlet form the
    /// α-normalized graph recovers.
    pub fn eval_density_power(&self, t: f64, alpha: f64) -> f64 {
        let d = self.intrinsic_dim() as f64;
        self.eval_density(t).powf(1.0 + 2.0 * (alpha - 1.0) / d)
    }

    /// `𝓛^(α) f = f'' + (1 + 2(α-1)/d) (p'/p) f'`; `α = 1` gives `Δ_p f`.
    pub fn eval_weighted_laplacian(&self, f: &TestFunction, t: f64, alpha: f64) -> f64 {
        let t = wrap(t);
        let d = self.intrinsic_dim() as f64;
        let coeff = 1.0 + 2.0 * (alpha - 1.0) / d;
        if coeff == 0.0 {
            return f.d2(t);
        }
        let drift = self.density.derivative(t) / self.density.eval(t);
        f.d2(t) + coeff * drift * f.d1(t)
    }

    /// `∫₀¹ p_α |f'|²`, periodic trapezoid rule on 2¹⁴ points.
    pub fn dirichlet_energy(&self, f: &TestFunction, alpha: f64) -> f64 {
        let n = TABLE_SIZE;
        let mut acc = 0.0;
        for i in 0..n {
            let t = i as f64 / n as f64;
            let g = f.d1(t);
            acc += self.eval_density_power(t, alpha) * g * g;
        }
        acc / n as f64
    }
}

pub(crate) fn wrap(t: f64) -> f64 {
    let w = t.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Inverts a monotone table sampled at `i / (len - 1)` by linear interpolation.
fn invert_table(table: &[f64], u: f64) -> f64 {
    let cells = table.len() - 1;
    let hi = table.partition_point(|&c| c <= u).clamp(1, cells);
    let lo = hi - 1;
    let (c0, c1) = (table[lo], table[hi]);
    let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
    let t = (lo as f64 + frac.clamp(0.0, 1.0)) / cells as f64;
    wrap(t)
}

/// Raw R⁴ curve in its own parameter `s ∈ [0, 1)`: three Fourier modes per
/// coordinate. The first two coordinates wind once around the origin, which
/// keeps the curve embedded.
fn raw_curve(s: f64) -> [f64; 4] {
    let th = TAU * s;
    [
        th.cos() + 0.1 * (2.0 * th).cos() + 0.05 * (3.0 * th).sin(),
        th.sin() + 0.1 * (2.0 * th).sin() + 0.05 * (3.0 * th).cos(),
        0.2 * th.sin() + 0.5 * (2.0 * th).cos() + 0.1 * (3.0 * th).cos(),
        0.3 * th.cos() + 0.2 * (2.0 * th).sin() + 0.4 * (3.0 * th).sin(),
    ]
}

fn raw_speed(s: f64) -> f64 {
    let th = TAU * s;
    let d = [
        -th.sin() - 0.2 * (2.0 * th).sin() + 0.15 * (3.0 * th).cos(),
        th.cos() + 0.2 * (2.0 * th).cos() - 0.15 * (3.0 * th).sin(),
        0.2 * th.cos() - 1.0 * (2.0 * th).sin() - 0.3 * (3.0 * th).sin(),
        -0.3 * th.sin() + 0.4 * (2.0 * th).cos() + 1.2 * (3.0 * th).cos(),
    ];
    TAU * d.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct CurveTable {
    /// Cumulative raw arclength at `s_i = i / TABLE_SIZE`.
    cumulative: Vec<f64>,
    total_length: f64,
}

impl CurveTable {
    fn build() -> Self {
        let h = 1.0 / TABLE_SIZE as f64;
        let mut cumulative = Vec::with_capacity(TABLE_SIZE + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for i in 0..TABLE_SIZE {
            let a = i as f64 * h;
            acc += profile::integrate(raw_speed, a, a + h, 1);
            cumulative.push(acc);
        }
        Self {
            total_length: acc,
            cumulative,
        }
    }

    /// Raw parameter `s` whose normalized arclength equals `t`, by Newton
    /// iteration inside the bracketing table cell.
    fn parameter_at(&self, t: f64) -> f64 {
        let target = t * self.total_length;
        let h = 1.0 / TABLE_SIZE as f64;
        let hi = self
            .cumulative
            .partition_point(|&c| c <= target)
            .clamp(1, TABLE_SIZE);
        let lo = hi - 1;
        let a = lo as f64 * h;
        let base = self.cumulative[lo];
        let span = self.cumulative[hi] - base;
        let mut s = a + h * ((target - base) / span).clamp(0.0, 1.0);
        for _ in 0..8 {
            let arc = base + profile::integrate(raw_speed, a, s, 1);
            let step = (arc - target) / raw_speed(s);
            s = (s - step).clamp(a, a + h);
            if step.abs() < 1e-15 {
                break;
            }
        }
        s
    }
}

fn curve_table() -> &'static CurveTable {
    static TABLE: OnceLock<CurveTable> = OnceLock::new();
    TABLE.get_or_init(CurveTable::build)
}
