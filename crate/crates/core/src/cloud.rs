use crate::error::{Error, Result};

/// `n` points in ambient R^D, stored row-major, with optional intrinsic
/// coordinates (synthetic manifolds) and integer labels (external data).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    intrinsic: Option<Vec<f64>>,
    labels: Option<Vec<i64>>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("point cloud dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::data(format!(
                "coordinate buffer of length {} is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite coordinate in point {}",
                bad / dim
            )));
        }
        Ok(Self {
            dim,
            coords,
            intrinsic: None,
            labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::data("rows of unequal length"));
        }
        Self::new(dim, rows.concat())
    }

    pub fn with_intrinsic(mut self, t: Vec<f64>) -> Result<Self> {
        crate::error::check_len(self.len(), t.len())?;
        self.intrinsic = Some(t);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        crate::error::check_len(self.len(), labels.len())?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn intrinsic(&self) -> Option<&[f64]> {
        self.intrinsic.as_deref()
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Applies `x -> R x + b` to every point; `rotation` is row-major D x D.
    pub fn transformed(&self, rotation: &[f64], shift: &[f64]) -> Result<Self> {
        crate::error::check_len(self.dim * self.dim, rotation.len())?;
        crate::error::check_len(self.dim, shift.len())?;
        let d = self.dim;
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.iter() {
            for r in 0..d {
                let row = &rotation[r * d..(r + 1) * d];
                coords.push(row.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + shift[r]);
            }
        }
        Ok(Self {
            dim: d,
            coords,
            intrinsic: self.intrinsic.clone(),
            labels: self.labels.clone(),
        })
    }

    /// Subset of points in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Self {
            dim: self.dim,
            coords,
            intrinsic: self
                .intrinsic
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// Squared Euclidean distance. Every distance in the crate goes through this
/// function so that spatial-index and brute-force paths round identically.
#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}
