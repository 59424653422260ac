//! Affinity matrices of the self-tuned, fixed-bandwidth, mixed and
//! digit-embedding kernel families.
//!
//! Every variant has the separable form
//!
//! ```text
//! W_ij = k0(|x_i - x_j|² / (c b_i b_j)) g_i g_j
//! ```
//!
//! with a global bandwidth `c`, per-point scales `b` and weights `g`:
//!
//! | variant            | c    | b_i    | g_i                      |
//! |--------------------|------|--------|--------------------------|
//! | self-tuned, ε-form | ε    | ρ̂_i   | ρ̂_i^-α                  |
//! | self-tuned, σ₀-form| σ₀²  | R̂_i   | R̂_i^-α                  |
//! | fixed              | ε    | 1      | p̂_i^-β                  |
//! | mixed              | ε/σ₀²| ρ̂/R̂  | b_i^-1 p̂_i^-1/2         |
//! | digits W⁽¹⁾        | 1    | σ₀R̂_i | (σ₀R̂_i)^-1              |
//! | digits W′          | 1    | σ₀R̂_i | (σ₀R̂_i)^-1 μ̂_i^-1/2    |

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthField;
use crate::cloud::{dist2, PointCloud};
use crate::error::{check_len, Error, Result};
use crate::sparse::SymmetricCsr;
use crate::spatial::NeighborIndex;

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    SelftunedAlpha,
    FixedBeta,
    MixedRhoP,
    MnistW1,
    MnistWprime,
}

impl KernelVariant {
    pub fn name(self) -> &'static str {
        match self {
            KernelVariant::SelftunedAlpha => "selftuned_alpha",
            KernelVariant::FixedBeta => "fixed_beta",
            KernelVariant::MixedRhoP => "mixed_rho_p",
            KernelVariant::MnistW1 => "mnist_w1",
            KernelVariant::MnistWprime => "mnist_wprime",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "selftuned_alpha" => KernelVariant::SelftunedAlpha,
            "fixed_beta" => KernelVariant::FixedBeta,
            "mixed_rho_p" => KernelVariant::MixedRhoP,
            "mnist_w1" => KernelVariant::MnistW1,
            "mnist_wprime" => KernelVariant::MnistWprime,
            other => return Err(Error::config(format!("unknown kernel variant {other:?}"))),
        })
    }
}

/// `k0(r) = e^{-r}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKernel {
    #[default]
    Gaussian,
}

impl BaseKernel {
    #[inline]
    pub fn eval(self, r: f64) -> f64 {
        match self {
            BaseKernel::Gaussian => (-r).exp(),
        }
    }

    /// Largest argument with `k0(r) >= tol`.
    pub fn support(self, tol: f64) -> f64 {
        match self {
            BaseKernel::Gaussian => -tol.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub variant: KernelVariant,
    #[serde(default)]
    pub k0: BaseKernel,
    pub eps: Option<f64>,
    pub sigma0: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub truncation_tol: f64,
}

impl KernelSpec {
    fn base(variant: KernelVariant) -> Self {
        Self {
            variant,
            k0: BaseKernel::Gaussian,
            eps: None,
            sigma0: None,
            alpha: None,
            beta: None,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
        }
    }

    pub fn selftuned_eps(eps: f64, alpha: f64) -> Self {
        Self {
            eps: Some(eps),
            alpha: Some(alpha),
            ..Self::base(KernelVariant::SelftunedAlpha)
        }
    }

    pub fn selftuned_sigma0(sigma0: f64, alpha: f64) -> Self {
        Self {
            sigma0: Some(sigma0),
            alpha: Some(alpha),
            ..Self::base(KernelVariant::SelftunedAlpha)
        }
    }

    pub fn fixed(eps: f64, beta: f64) -> Self {
        Self {
            eps: Some(eps),
            beta: Some(beta),
            ..Self::base(KernelVariant::FixedBeta)
        }
    }

    pub fn mixed_eps(eps: f64) -> Self {
        Self {
            eps: Some(eps),
            ..Self::base(KernelVariant::MixedRhoP)
        }
    }

    pub fn mixed_sigma0(sigma0: f64) -> Self {
        Self {
            sigma0: Some(sigma0),
            ..Self::base(KernelVariant::MixedRhoP)
        }
    }

    pub fn mnist_w1(sigma0: f64) -> Self {
        Self {
            sigma0: Some(sigma0),
            ..Self::base(KernelVariant::MnistW1)
        }
    }

    pub fn mnist_wprime(sigma0: f64) -> Self {
        Self {
            sigma0: Some(sigma0),
            ..Self::base(KernelVariant::MnistWprime)
        }
    }

    pub fn with_truncation(mut self, tol: f64) -> Self {
        self.truncation_tol = tol;
        self
    }

    /// `α` of the self-tuned normalization; 1 unless set.
    pub fn alpha_or_default(&self) -> f64 {
        match self.variant {
            KernelVariant::SelftunedAlpha => self.alpha.unwrap_or(1.0),
            KernelVariant::FixedBeta => 0.0,
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => {
                    Err(Error::config(format!("{name} must be positive and finite, got {x}")))
                }
                _ => Ok(()),
            }
        };
        positive("eps", self.eps)?;
        positive("sigma0", self.sigma0)?;
        if !(self.truncation_tol > 0.0 && self.truncation_tol < 1.0) {
            return Err(Error::config(format!(
                "truncation tolerance must lie in (0, 1), got {}",
                self.truncation_tol
            )));
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return Err(Error::config("alpha must be finite"));
            }
        }
        match self.variant {
            KernelVariant::SelftunedAlpha | KernelVariant::MixedRhoP => {
                if self.eps.is_some() == self.sigma0.is_some() {
                    return Err(Error::config(format!(
                        "{} needs exactly one of eps and sigma0",
                        self.variant.name()
                    )));
                }
            }
            KernelVariant::FixedBeta => {
                if self.eps.is_none() || self.sigma0.is_some() {
                    return Err(Error::config("fixed_beta needs eps and no sigma0"));
                }
                let beta = self.beta.unwrap_or(0.0);
                if !(beta <= 1.0 && beta.is_finite()) {
                    return Err(Error::config(format!("fixed_beta needs beta <= 1, got {beta}")));
                }
            }
            KernelVariant::MnistW1 | KernelVariant::MnistWprime => {
                if self.sigma0.is_none() || self.eps.is_some() {
                    return Err(Error::config(format!(
                        "{} needs sigma0 and no eps",
                        self.variant.name()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sparse symmetric affinity matrix together with what produced it.
#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    pub matrix: SymmetricCsr,
    pub spec: KernelSpec,
    /// `c b_i²`, the squared kernel width at each node (`ε ρ̂_i²` in ε-form).
    pub bandwidth2: Option<Vec<f64>>,
    /// The `ε` of the equivalent ε-form kernel, when it is determined.
    pub theory_eps: Option<f64>,
    /// Factor taking this matrix to the equivalent ε-form kernel.
    pub theory_scale: Option<f64>,
}

impl AffinityMatrix {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// The ε-form kernel and its `ε`, or a configuration error when the
    /// intrinsic dimension needed for the conversion was never supplied.
    pub fn theory_form(&self) -> Result<(f64, f64)> {
        match (self.theory_eps, self.theory_scale) {
            (Some(e), Some(s)) => Ok((e, s)),
            _ => Err(Error::config(
                "kernel built in sigma0 form from an unnormalized bandwidth; \
                 normalize the bandwidth with an intrinsic dimension first",
            )),
        }
    }

    /// Coordinate triplets of the upper triangle after a one-line JSON
    /// header: `# {"n":..,"spec":{..}}`, then `i,j,w`.
    pub fn write_triplets(&self, mut out: impl Write) -> Result<()> {
        let header = TripletHeader {
            n: self.n(),
            spec: self.spec.clone(),
        };
        writeln!(out, "# {}", serde_json::to_string(&header)?)?;
        writeln!(out, "i,j,w")?;
        for (i, j, w) in self.matrix.upper_triplets() {
            writeln!(out, "{i},{j},{w:e}")?;
        }
        Ok(())
    }

    /// Inverse of [`AffinityMatrix::write_triplets`]. Bandwidth metadata is
    /// not stored in the file.
    pub fn read_triplets(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let header_line = match lines.next() {
            Some((_, line)) => line?,
            None => return Err(Error::parse(1, "empty affinity file")),
        };
        let json = header_line
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(1, "missing '#' JSON header"))?;
        let header: TripletHeader =
            serde_json::from_str(json.trim()).map_err(|e| Error::parse(1, e.to_string()))?;
        header
            .spec
            .validate()
            .map_err(|e| Error::parse(1, e.to_string()))?;
        let columns = lines.next().map(|(_, line)| line).transpose()?;
        if columns.as_deref().map(str::trim) != Some("i,j,w") {
            return Err(Error::parse(2, "expected column header i,j,w"));
        }
        let mut triplets = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(lineno, format!("expected 3 fields, found {}", fields.len())));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad row index {:?}", fields[0])))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad column index {:?}", fields[1])))?;
            let w: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad weight {:?}", fields[2])))?;
            if i >= header.n || j >= header.n {
                return Err(Error::parse(lineno, format!("index ({i}, {j}) exceeds n = {}", header.n)));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::parse(lineno, format!("weight {w} is not a finite nonnegative number")));
            }
            triplets.push((i, j, w));
        }
        let matrix = SymmetricCsr::from_triplets(header.n, &triplets)
            .map_err(|e| Error::parse(0, e.to_string()))?;
        Ok(Self {
            matrix,
            spec: header.spec,
            bandwidth2: None,
            theory_eps: None,
            theory_scale: None,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TripletHeader {
    n: usize,
    spec: KernelSpec,
}

/// Per-point auxiliary densities used by some variants.
#[derive(Debug, Clone, Copy, Default)]
pub struct KernelInputs<'a> {
    pub bandwidth: Option<&'a BandwidthField>,
    /// `p̂` for fixed and mixed kernels.
    pub p_hat: Option<&'a [f64]>,
    /// `μ̂` for the `W′` digit kernel.
    pub mu_hat: Option<&'a [f64]>,
}

/// Builds any variant from its spec.
pub fn build_affinity(x: &PointCloud, inputs: KernelInputs<'_>, spec: &KernelSpec) -> Result<AffinityMatrix> {
    spec.validate()?;
    let n = x.len();
    let alpha = spec.alpha_or_default();

    let need_bw = || -> Result<&BandwidthField> {
        let bw = inputs
            .bandwidth
            .ok_or_else(|| Error::config(format!("{} needs a bandwidth field", spec.variant.name())))?;
        check_len(n, bw.len())?;
        if let Some(i) = bw.knn_dist.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::data(format!(
                "kNN distance at point {i} is not positive ({})",
                bw.knn_dist[i]
            )));
        }
        Ok(bw)
    };
    let positive = |name: &str, v: Option<&[f64]>| -> Result<Vec<f64>> {
        let v = v.ok_or_else(|| Error::config(format!("{} needs {name}", spec.variant.name())))?;
        check_len(n, v.len())?;
        if let Some(i) = v.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::data(format!("{name} at point {i} is not positive ({})", v[i])));
        }
        Ok(v.to_vec())
    };

    // (c, b, g, theory_eps, theory_scale)
    let (c, b, g, theory): (f64, Vec<f64>, Vec<f64>, Option<(f64, f64)>) = match spec.variant {
        KernelVariant::SelftunedAlpha | KernelVariant::MixedRhoP => {
            let bw = need_bw()?;
            let (c, b, theory) = if let Some(eps) = spec.eps {
                (eps, bw.rho()?.to_vec(), Some((eps, 1.0)))
            } else {
                let sigma0 = spec.sigma0.expect("validated");
                let theory = bw.scale().map(|s| (sigma0 * sigma0 / (s * s), s.powf(-2.0 * alpha)));
                (sigma0 * sigma0, bw.knn_dist.clone(), theory)
            };
            if let Some(i) = b.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::data(format!("bandwidth at point {i} is not positive ({})", b[i])));
            }
            let mut g: Vec<f64> = b.iter().map(|v| v.powf(-alpha)).collect();
            if spec.variant == KernelVariant::MixedRhoP {
                let p = positive("p_hat", inputs.p_hat)?;
                g.iter_mut().zip(&p).for_each(|(g, p)| *g /= p.sqrt());
            }
            (c, b, g, theory)
        }
        KernelVariant::FixedBeta => {
            let eps = spec.eps.expect("validated");
            let beta = spec.beta.unwrap_or(0.0);
            let g = if beta == 0.0 {
                if let Some(p) = inputs.p_hat {
                    check_len(n, p.len())?;
                }
                vec![1.0; n]
            } else {
                positive("p_hat", inputs.p_hat)?
                    .iter()
                    .map(|p| p.powf(-beta))
                    .collect()
            };
            (eps, vec![1.0; n], g, Some((eps, 1.0)))
        }
        KernelVariant::MnistW1 | KernelVariant::MnistWprime => {
            let bw = need_bw()?;
            let sigma0 = spec.sigma0.expect("validated");
            let b: Vec<f64> = bw.knn_dist.iter().map(|r| sigma0 * r).collect();
            let mut g: Vec<f64> = b.iter().map(|v| 1.0 / v).collect();
            if spec.variant == KernelVariant::MnistWprime {
                let mu = positive("mu_hat", inputs.mu_hat)?;
                g.iter_mut().zip(&mu).for_each(|(g, m)| *g /= m.sqrt());
            }
            let theory = bw.scale().map(|s| {
                let eps = sigma0 * sigma0 / (s * s);
                (eps, eps)
            });
            (1.0, b, g, theory)
        }
    };

    let matrix = assemble(x, spec.k0, c, &b, &g, spec.truncation_tol)?;
    Ok(AffinityMatrix {
        matrix,
        spec: spec.clone(),
        bandwidth2: Some(b.iter().map(|b| c * b * b).collect()),
        theory_eps: theory.map(|t| t.0),
        theory_scale: theory.map(|t| t.1),
    })
}

fn assemble(x: &PointCloud, k0: BaseKernel, c: f64, b: &[f64], g: &[f64], tol: f64) -> Result<SymmetricCsr> {
    let n = x.len();
    let r_max = k0.support(tol);
    let b_max = b.iter().copied().fold(0.0, f64::max);
    let index = NeighborIndex::new(x);
    let mut upper: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.point(i);
            // Strict `<` in the radius query; widen slightly so that pairs
            // at exactly the support bound are still considered.
            let radius2 = r_max * c * b[i] * b_max * (1.0 + 1e-12);
            index
                .within(xi, radius2)
                .into_iter()
                .filter(|&j| j >= i)
                .filter_map(|j| {
                    let r = dist2(xi, x.point(j)) / (c * b[i] * b[j]);
                    (r <= r_max).then(|| (j, k0.eval(r) * g[i] * g[j]))
                })
                .collect()
        })
        .collect();
    let max_entry = upper
        .iter()
        .flatten()
        .map(|&(_, w)| w)
        .fold(0.0, f64::max);
    if !max_entry.is_finite() {
        return Err(Error::data("affinity weights overflowed"));
    }
    let floor = tol * max_entry;
    upper
        .par_iter_mut()
        .for_each(|row| row.retain(|&(_, w)| w >= floor && w > 0.0));
    SymmetricCsr::from_upper_rows(upper)
}

/// Self-tuned `W^(α)` in ε-form (`bw` normalized) or σ₀-form.
pub fn build_selftuned(x: &PointCloud, bw: &BandwidthField, spec: &KernelSpec) -> Result<AffinityMatrix> {
    if spec.variant != KernelVariant::SelftunedAlpha {
        return Err(Error::config("build_selftuned needs a selftuned_alpha spec"));
    }
    build_affinity(
        x,
        KernelInputs {
            bandwidth: Some(bw),
            ..Default::default()
        },
        spec,
    )
}

/// `W^(β)_ij = k0(|x_i - x_j|²/ε) / (p̂_i^β p̂_j^β)`.
pub fn build_fixed(x: &PointCloud, eps: f64, beta: f64, p_hat: &[f64]) -> Result<AffinityMatrix> {
    build_affinity(
        x,
        KernelInputs {
            p_hat: Some(p_hat),
            ..Default::default()
        },
        &KernelSpec::fixed(eps, beta),
    )
}

/// `W^(1)_ij / sqrt(p̂_i p̂_j)`.
pub fn build_mixed(x: &PointCloud, bw: &BandwidthField, p_hat: &[f64], eps: f64) -> Result<AffinityMatrix> {
    build_affinity(
        x,
        KernelInputs {
            bandwidth: Some(bw),
            p_hat: Some(p_hat),
            mu_hat: None,
        },
        &KernelSpec::mixed_eps(eps),
    )
}

/// The two digit-embedding kernels `(W⁽¹⁾, W′)`.
pub fn build_mnist_variants(
    x: &PointCloud,
    bw: &BandwidthField,
    mu_hat: &[f64],
    sigma0: f64,
) -> Result<(AffinityMatrix, AffinityMatrix)> {
    let inputs = KernelInputs {
        bandwidth: Some(bw),
        p_hat: None,
        mu_hat: Some(mu_hat),
    };
    Ok((
        build_affinity(x, inputs, &KernelSpec::mnist_w1(sigma0))?,
        build_affinity(x, inputs, &KernelSpec::mnist_wprime(sigma0))?,
    ))
}

/// `D_ii = Σ_j W_ij`, diagonal included.
pub fn degree(w: &AffinityMatrix) -> Vec<f64> {
    w.matrix.row_sums()
}
