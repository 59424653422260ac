//! Radial kernel profiles `h(r)`, evaluated at squared scaled distances, and
//! their moments
//!
//! ```text
//! m0[h] = ∫_{R^d} h(|u|²) du
//! m2[h] = (1/d) ∫_{R^d} |u|² h(|u|²) du
//! ```
//!
//! Shipped profiles have closed-form moments; `Custom` profiles fall back to
//! composite Gauss-Legendre quadrature of the radial integral.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

/// A radial profile. `eval` takes the squared, bandwidth-scaled distance.
#[derive(Clone)]
pub enum RadialProfile {
    /// `k0(r) = exp(-r)`, the affinity kernel.
    Gaussian,
    /// `h_kde(r) = exp(-r / (4/π))`, the KDE kernel; `m0 = 2^d`.
    KdeGaussian,
    /// `1_[0,1)(r)`, the kNN window.
    Indicator,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialProfile::Gaussian => write!(f, "Gaussian"),
            RadialProfile::KdeGaussian => write!(f, "KdeGaussian"),
            RadialProfile::Indicator => write!(f, "Indicator"),
            RadialProfile::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl RadialProfile {
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Gaussian => (-r).exp(),
            RadialProfile::KdeGaussian => (-r * PI / 4.0).exp(),
            RadialProfile::Indicator => {
                if (0.0..1.0).contains(&r) {
                    1.0
                } else {
                    0.0
                }
            }
            RadialProfile::Custom(h) => h(r),
        }
    }

    pub fn m0(&self, d: usize) -> f64 {
        let d_f = d as f64;
        match self {
            RadialProfile::Gaussian => PI.powf(d_f / 2.0),
            RadialProfile::KdeGaussian => 2f64.powi(d as i32),
            RadialProfile::Indicator => unit_ball_volume(d),
            RadialProfile::Custom(_) => radial_moment(self, d, 0),
        }
    }

    pub fn m2(&self, d: usize) -> f64 {
        let d_f = d as f64;
        match self {
            RadialProfile::Gaussian => PI.powf(d_f / 2.0) / 2.0,
            RadialProfile::KdeGaussian => 2f64.powi(d as i32) * 2.0 / PI,
            RadialProfile::Indicator => unit_ball_volume(d) / (d_f + 2.0),
            RadialProfile::Custom(_) => radial_moment(self, d, 2) / d_f,
        }
    }
}

/// Volume of the unit d-ball, `π^{d/2} / Γ(d/2 + 1)`, via `V_d = V_{d-2} 2π/d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}

/// Surface area of the unit sphere in R^d, `2 π^{d/2} / Γ(d/2)` = `d V_d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// `∫_{R^d} |u|^power h(|u|²) du` by radial quadrature.
pub fn radial_moment(h: &RadialProfile, d: usize, power: i32) -> f64 {
    let exponent = d as i32 - 1 + power;
    let integrand = |r: f64| h.eval(r * r) * r.powi(exponent);
    unit_sphere_area(d) * integrate_half_line(integrand)
}

/// `∫_0^∞ g(r) dr` via `r = u / (1 - u)` and 16 panels of 64-point
/// Gauss-Legendre on `u ∈ [0, 1)`. Panel edges include `u = 1/2` (`r = 1`),
/// the jump of the indicator window.
pub fn integrate_half_line(g: impl Fn(f64) -> f64) -> f64 {
    const PANELS: usize = 16;
    let (nodes, weights) = gauss_legendre_64();
    let width = 1.0 / PANELS as f64;
    let mut total = 0.0;
    for p in 0..PANELS {
        let a = p as f64 * width;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            let u = a + 0.5 * width * (x + 1.0);
            let one_minus = 1.0 - u;
            let r = u / one_minus;
            panel += w * g(r) / (one_minus * one_minus);
        }
        total += 0.5 * width * panel;
    }
    total
}

/// `∫_a^b g` with composite 64-point Gauss-Legendre on `panels` panels.
pub fn integrate(g: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre_64();
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            panel += w * g(lo + 0.5 * width * (x + 1.0));
        }
        total += 0.5 * width * panel;
    }
    total
}

/// 64-point Gauss-Legendre nodes and weights on [-1, 1], computed once by
/// Newton iteration on P_64.
pub fn gauss_legendre_64() -> (&'static [f64], &'static [f64]) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (n, w) = RULE.get_or_init(|| gauss_legendre(64));
    (n, w)
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_64();
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
        let m: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((m - 2.0 / 11.0).abs() < 1e-13);
    }

    #[test]
    fn closed_form_moments_match_quadrature() {
        for profile in [
            RadialProfile::Gaussian,
            RadialProfile::KdeGaussian,
            RadialProfile::Indicator,
        ] {
            for d in 1..=4 {
                let q0 = radial_moment(&profile, d, 0);
                let q2 = radial_moment(&profile, d, 2) / d as f64;
                assert!(
                    (profile.m0(d) - q0).abs() < 1e-10 * q0,
                    "{profile:?} d={d}: {} vs {q0}",
                    profile.m0(d)
                );
                assert!((profile.m2(d) - q2).abs() < 1e-10 * q2, "{profile:?} d={d}");
            }
        }
    }

    #[test]
    fn gaussian_moments_in_one_dimension() {
        let k0 = RadialProfile::Gaussian;
        assert!((k0.m0(1) - PI.sqrt()).abs() < 1e-15);
        assert!((k0.m2(1) - PI.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn custom_profile_uses_quadrature() {
        let custom = RadialProfile::Custom(Arc::new(|r: f64| (-2.0 * r).exp()));
        // ∫ exp(-2u²) du = sqrt(π/2)
        assert!((custom.m0(1) - (PI / 2.0).sqrt()).abs() < 1e-12);
    }
}
