//! Smallest eigenpairs of graph Laplacians.
//!
//! `eig(D - W)` and `eig-gen(D - W, D D_R̂²)`, the latter through the
//! symmetric matrix `S = B^{-1/2} (D - W) B^{-1/2}`. Small problems use a
//! dense symmetric eigensolver; larger ones a thick-restart Lanczos method
//! with full reorthogonalization.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthField;
use crate::error::{check_len, Error, Result};
use crate::kernel::AffinityMatrix;
use crate::sparse::SymmetricCsr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenProblem {
    StandardUnnormalized,
    GeneralizedRwPrime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// One column per eigenvalue, unit norm in the problem's inner product.
    pub eigenvectors: Vec<Vec<f64>>,
    pub problem: EigenProblem,
    /// `|S u - λ u| / |S|` for unit `u` of the symmetrized problem, with
    /// `|S|` the largest absolute row sum.
    pub residuals: Vec<f64>,
}

impl SpectralResult {
    pub fn write_eigenvalues(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "index,lambda")?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "{i},{l}")?;
        }
        Ok(())
    }

    pub fn write_eigenvectors(&self, mut out: impl Write) -> Result<()> {
        let m = self.eigenvectors.len();
        let header: Vec<String> = (1..=m).map(|k| format!("v{k}")).collect();
        writeln!(out, "index,{}", header.join(","))?;
        let n = self.eigenvectors.first().map_or(0, Vec::len);
        for i in 0..n {
            let row: Vec<String> = self.eigenvectors.iter().map(|v| v[i].to_string()).collect();
            writeln!(out, "{i},{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target.
    pub tol: f64,
    /// Problems up to this size are solved densely.
    pub dense_limit: usize,
    /// Krylov basis size before a restart.
    pub max_basis: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            dense_limit: 2000,
            max_basis: 240,
            max_restarts: 400,
            seed: 0x5EED,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// `D - W` as a sparse matrix.
pub fn laplacian_matrix(w: &AffinityMatrix) -> Result<SymmetricCsr> {
    let m = &w.matrix;
    let degree = m.row_sums();
    let upper: Vec<Vec<(usize, f64)>> = (0..m.n())
        .map(|i| {
            let mut row: Vec<(usize, f64)> = m
                .row(i)
                .filter(|&(j, _)| j > i)
                .map(|(j, v)| (j, -v))
                .collect();
            row.insert(0, (i, degree[i] - m.get(i, i)));
            row
        })
        .collect();
    SymmetricCsr::from_upper_rows(upper)
}

/// The `m` smallest eigenpairs of `D - W`.
pub fn eig_unnormalized(w: &AffinityMatrix, m: usize, tol: f64) -> Result<SpectralResult> {
    let l = laplacian_matrix(w)?;
    let (values, vectors, residuals) = smallest_eigenpairs(&l, m, &SolverOptions::with_tol(tol))?;
    Ok(SpectralResult {
        eigenvalues: values,
        eigenvectors: vectors.into_iter().map(fix_sign).collect(),
        problem: EigenProblem::StandardUnnormalized,
        residuals,
    })
}

/// The `m` smallest pairs of `(D - W) v = λ D D_R̂² v`, B-orthonormal.
pub fn eig_rw_prime(w: &AffinityMatrix, bw: &BandwidthField, m: usize, tol: f64) -> Result<SpectralResult> {
    check_len(w.n(), bw.len())?;
    let degree = w.matrix.row_sums();
    let b: Vec<f64> = degree
        .iter()
        .zip(&bw.knn_dist)
        .map(|(d, r)| d * r * r)
        .collect();
    eig_generalized(w, &b, m, &SolverOptions::with_tol(tol))
}

/// The `m` smallest pairs of `(D - W) v = λ diag(b) v`.
pub fn eig_generalized(w: &AffinityMatrix, b: &[f64], m: usize, opts: &SolverOptions) -> Result<SpectralResult> {
    check_len(w.n(), b.len())?;
    if let Some(i) = b.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::data(format!("generalized weight at node {i} is not positive ({})", b[i])));
    }
    let s: Vec<f64> = b.iter().map(|v| 1.0 / v.sqrt()).collect();
    let l = laplacian_matrix(w)?;
    let upper: Vec<Vec<(usize, f64)>> = (0..l.n())
        .map(|i| {
            l.row(i)
                .filter(|&(j, _)| j >= i)
                .map(|(j, v)| (j, v * (s[i] * s[j])))
                .collect()
        })
        .collect();
    let sym = SymmetricCsr::from_upper_rows(upper)?;
    let (values, vectors, residuals) = smallest_eigenpairs(&sym, m, opts)?;
    let vectors = vectors
        .into_iter()
        .map(|u| fix_sign(u.iter().zip(&s).map(|(u, s)| u * s).collect()))
        .collect();
    Ok(SpectralResult {
        eigenvalues: values,
        eigenvectors: vectors,
        problem: EigenProblem::GeneralizedRwPrime,
        residuals,
    })
}

/// Makes the largest-magnitude entry positive.
fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

fn gershgorin(a: &SymmetricCsr) -> f64 {
    (0..a.n())
        .map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

type Pairs = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

fn smallest_eigenpairs(a: &SymmetricCsr, m: usize, opts: &SolverOptions) -> Result<Pairs> {
    let n = a.n();
    if m == 0 || m >= n {
        return Err(Error::config(format!("number of eigenpairs must satisfy 0 < m < N, got m = {m}, N = {n}")));
    }
    let scale = gershgorin(a).max(f64::MIN_POSITIVE);
    if n <= opts.dense_limit {
        dense_eigenpairs(a, m, scale)
    } else {
        lanczos(a, m, scale, opts)
    }
}

fn residual(a: &SymmetricCsr, lambda: f64, u: &[f64], scale: f64) -> Result<f64> {
    let au = a.matvec(u)?;
    let r: f64 = au
        .iter()
        .zip(u)
        .map(|(x, y)| (x - lambda * y).powi(2))
        .sum();
    Ok(r.sqrt() / (norm(u) * scale))
}

fn dense_eigenpairs(a: &SymmetricCsr, m: usize, scale: f64) -> Result<Pairs> {
    let n = a.n();
    let dense = DMatrix::from_row_slice(n, n, &a.to_dense());
    let eig = SymmetricEigen::new(dense);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut values = Vec::with_capacity(m);
    let mut vectors = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    for &k in order.iter().take(m) {
        let lambda = eig.eigenvalues[k];
        let u: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        residuals.push(residual(a, lambda, &u, scale)?);
        values.push(lambda);
        vectors.push(u);
    }
    Ok((values, vectors, residuals))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormalizes `q` against `basis` (two Gram-Schmidt passes). Returns
/// `None` if `q` lies in the span.
fn orthonormalize(mut q: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let start = norm(&q);
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for v in basis {
            let c = dot(&q, v);
            q.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
        }
    }
    let r = norm(&q);
    if r <= 1e-10 * start {
        return None;
    }
    q.iter_mut().for_each(|x| *x /= r);
    Some(q)
}

fn lanczos(a: &SymmetricCsr, m: usize, scale: f64, opts: &SolverOptions) -> Result<Pairs> {
    let n = a.n();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_vector = |basis: &[Vec<f64>]| -> Vec<f64> {
        loop {
            let q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            if let Some(q) = orthonormalize(q, basis) {
                return q;
            }
        }
    };
    let p = opts.max_basis.clamp(m + 2, n);
    let keep = (m + (p - m) / 3).min(p - 1).max(m);

    let mut v: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut av: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut next = random_vector(&v);
    let mut best = Vec::new();
    for restart in 0..=opts.max_restarts {
        while v.len() < p {
            let q = match orthonormalize(next.clone(), &v) {
                Some(q) => q,
                None => random_vector(&v),
            };
            let aq = a.matvec(&q)?;
            next = aq.clone();
            v.push(q);
            av.push(aq);
        }
        let k = v.len();
        let mut h = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let x = 0.5 * (dot(&v[i], &av[j]) + dot(&v[j], &av[i]));
                h[(i, j)] = x;
                h[(j, i)] = x;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

        let ritz = |c: usize, src: &[Vec<f64>]| -> Vec<f64> {
            let y = eig.eigenvectors.column(c);
            let mut out = vec![0.0; n];
            for (coef, col) in y.iter().zip(src) {
                out.iter_mut().zip(col).for_each(|(o, x)| *o += coef * x);
            }
            out
        };
        let mut new_v = Vec::with_capacity(keep + 1);
        let mut new_av = Vec::with_capacity(keep + 1);
        let mut values = Vec::with_capacity(m);
        let mut residuals = Vec::with_capacity(m);
        let mut first_unconverged: Option<Vec<f64>> = None;
        for (rank, &c) in order.iter().take(keep).enumerate() {
            let x = ritz(c, &v);
            let ax = ritz(c, &av);
            let lambda = eig.eigenvalues[c];
            if rank < m {
                let r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - lambda * b).collect();
                let res = norm(&r) / scale;
                if res > opts.tol && first_unconverged.is_none() {
                    first_unconverged = Some(r);
                }
                values.push(lambda);
                residuals.push(res);
            }
            new_v.push(x);
            new_av.push(ax);
        }
        best = residuals.clone();
        match first_unconverged {
            None => {
                let vectors = new_v.into_iter().take(m).collect();
                return Ok((values, vectors, residuals));
            }
            Some(r) if restart < opts.max_restarts => {
                v = new_v;
                av = new_av;
                next = r;
            }
            Some(_) => break,
        }
    }
    let worst = best.iter().copied().fold(0.0, f64::max);
    Err(Error::Solver {
        iterations: opts.max_restarts,
        worst,
        residuals: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;
    use crate::kernel::{build_fixed, KernelSpec};
    use crate::sparse::SymmetricCsr;

    fn from_dense(n: usize, entries: &[(usize, usize, f64)]) -> AffinityMatrix {
        AffinityMatrix {
            matrix: SymmetricCsr::from_triplets(n, entries).unwrap(),
            spec: KernelSpec::fixed(1.0, 0.0),
            bandwidth2: None,
            theory_eps: None,
            theory_scale: None,
        }
    }

    fn ones2() -> AffinityMatrix {
        from_dense(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)])
    }

    #[test]
    fn two_by_two_all_ones() {
        let r = eig_unnormalized(&ones2(), 1, 1e-10).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-14);
        let l = laplacian_matrix(&ones2()).unwrap();
        let (vals, _, _) = dense_eigenpairs(&l, 2, 2.0).unwrap();
        assert!((vals[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn generalized_two_by_two() {
        let w = ones2();
        let degree = w.matrix.row_sums();
        let l = laplacian_matrix(&w).unwrap();
        let s: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        let upper = (0..2)
            .map(|i| l.row(i).filter(|&(j, _)| j >= i).map(|(j, v)| (j, v * s[i] * s[j])).collect())
            .collect();
        let sym = SymmetricCsr::from_upper_rows(upper).unwrap();
        let (vals, _, _) = dense_eigenpairs(&sym, 2, 1.0).unwrap();
        assert!(vals[0].abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let r = eig_generalized(&w, &degree, 1, &SolverOptions::default()).unwrap();
        let v = &r.eigenvectors[0];
        assert!((v[0] - v[1]).abs() < 1e-14);
        let bnorm: f64 = v.iter().zip(&degree).map(|(x, d)| x * x * d).sum();
        assert!((bnorm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn path_graph() {
        let w = from_dense(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let l = laplacian_matrix(&w).unwrap();
        let (vals, _, _) = dense_eigenpairs(&l, 3, 1.0).unwrap();
        for (v, e) in vals.iter().zip([0.0, 1.0, 3.0]) {
            assert!((v - e).abs() < 1e-14);
        }
    }

    #[test]
    fn disconnected_components() {
        let w = from_dense(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        let r = eig_unnormalized(&w, 3, 1e-10).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-14 && r.eigenvalues[1].abs() < 1e-14);
        assert!((r.eigenvalues[2] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lanczos_matches_dense() {
        let n = 300;
        let t: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64 * 7.3).sin() * 3.0 + i as f64 * 0.01).collect();
        let x = PointCloud::new(1, t).unwrap();
        let w = build_fixed(&x, 0.05, 0.0, &vec![1.0; n]).unwrap();
        let l = laplacian_matrix(&w).unwrap();
        let scale = gershgorin(&l);
        let (dense, _, _) = dense_eigenpairs(&l, 5, scale).unwrap();
        let opts = SolverOptions {
            dense_limit: 0,
            max_basis: 60,
            tol: 1e-10,
            ..SolverOptions::default()
        };
        let (vals, vecs, res) = lanczos(&l, 5, scale, &opts).unwrap();
        for k in 0..5 {
            assert!((vals[k] - dense[k]).abs() < 1e-8 * scale, "{k}: {} vs {}", vals[k], dense[k]);
            assert!(res[k] <= 1e-10);
            assert!((norm(&vecs[k]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_convention() {
        assert_eq!(fix_sign(vec![0.1, -0.5, 0.2]), vec![-0.1, 0.5, -0.2]);
    }

    #[test]
    fn rejects_nonpositive_weights() {
        assert!(matches!(
            eig_generalized(&ones2(), &[1.0, 0.0], 1, &SolverOptions::default()),
            Err(Error::Data(_))
        ));
    }
}
