//! Symmetric sparse matrices in compressed-row form.
//!
//! Both triangles are stored so that row operations need no transposition;
//! the constructors guarantee `a_ij == a_ji` bit for bit.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::experiments::stats::pairwise_sum;

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCsr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymmetricCsr {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from upper-triangle rows: `upper[i]` lists `(j, a_ij)` with
    /// `j >= i`, sorted by `j`, without duplicates. Entries are mirrored.
    pub fn from_upper_rows(upper: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = upper.len();
        let mut counts = vec![0usize; n];
        for (i, row) in upper.iter().enumerate() {
            let mut prev = None;
            for &(j, _) in row {
                if j < i || j >= n || prev.is_some_and(|p| p >= j) {
                    return Err(Error::data(format!(
                        "row {i}: column {j} is out of order or outside the upper triangle"
                    )));
                }
                prev = Some(j);
                counts[i] += 1;
                if j != i {
                    counts[j] += 1;
                }
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut fill = row_ptr[..n].to_vec();
        // Row j first receives its lower entries from rows i < j in ascending
        // i, then its own upper entries, so every row ends up sorted.
        for (i, row) in upper.iter().enumerate() {
            for &(j, v) in row {
                col_idx[fill[i]] = j;
                values[fill[i]] = v;
                fill[i] += 1;
                if j != i {
                    col_idx[fill[j]] = i;
                    values[fill[j]] = v;
                    fill[j] += 1;
                }
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from `(i, j, a)` triplets of either triangle; each unordered
    /// pair may appear at most once.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut upper = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::data(format!("index ({i}, {j}) outside a {n} x {n} matrix")));
            }
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            upper[a].push((b, v));
        }
        for (i, row) in upper.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::data(format!("duplicate entry in row {i}")));
            }
        }
        Self::from_upper_rows(upper)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[a..b].binary_search(&j) {
            Ok(k) => self.values[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `y = A x`, rows in parallel with a fixed per-row order.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok((0..self.n)
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect())
    }

    /// Row sums including the diagonal.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| self.row(i).fold(0.0, |acc, (_, v)| acc + v))
            .collect()
    }

    /// Row sums excluding the diagonal.
    pub fn offdiag_row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| self.row(i).filter(|&(j, _)| j != i).fold(0.0, |acc, (_, v)| acc + v))
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `Σ_ij a_ij (x_i - x_j)²`; nonnegative whenever `A` is.
    pub fn quadratic_difference(&self, x: &[f64]) -> Result<f64> {
        check_len(self.n, x.len())?;
        let rows: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                self.row(i)
                    .map(|(j, v)| {
                        let d = x[i] - x[j];
                        v * d * d
                    })
                    .sum()
            })
            .collect();
        Ok(pairwise_sum(&rows))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= c);
        m
    }

    /// Upper-triangle triplets `(i, j, a_ij)` with `i <= j`.
    pub fn upper_triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n)
            .flat_map(|i| self.row(i).filter(move |&(j, _)| j >= i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    /// Dense row-major copy; for tests and small problems.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out[i * self.n + j] = v;
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }
}
