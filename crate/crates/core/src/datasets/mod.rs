//! Point clouds, synthetic manifolds of known intrinsic dimension, and file I/O.

mod generate;
mod io;

pub use generate::{generate, Embedding, Family, ManifoldSpec};
pub use io::{load_points, save_points, Format};

use crate::error::{Error, Result};

/// N points in R^D stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
    labels: Option<Vec<i64>>,
    provenance: String,
}

impl PointCloud {
    /// Builds a cloud from row-major coordinates. Rejects empty clouds and
    /// non-finite coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyInput("points must have at least one coordinate".into()));
        }
        if coords.is_empty() {
            return Err(Error::EmptyInput("cloud has no points".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidConfig(format!(
                "{} coordinates do not form rows of length {dim}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: pos / dim + 1,
                column: pos % dim + 1,
                message: format!("non-finite coordinate {}", coords[pos]),
            });
        }
        Ok(Self {
            n: coords.len() / dim,
            dim,
            coords,
            labels: None,
            provenance: provenance.into(),
        })
    }

    /// Builds a cloud from a list of rows, all of the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Parse {
                    row: i + 1,
                    column: r.len().min(dim) + 1,
                    message: format!("expected {dim} coordinates, found {}", r.len()),
                });
            }
            coords.extend_from_slice(r);
        }
        Self::from_flat(dim, coords, "in-memory")
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidConfig(format!(
                "{} labels for {} points",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Row-major coordinate buffer.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Squared Euclidean distance between points `i` and `j`.
    #[inline]
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.point(i), self.point(j))
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.sq_dist(i, j).sqrt()
    }

    /// Multiplies every coordinate by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coords.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Applies `x -> M x` to every point; `matrix` is D×D row-major.
    pub fn transformed(&self, matrix: &[f64]) -> Self {
        assert_eq!(matrix.len(), self.dim * self.dim);
        let mut out = self.clone();
        for (dst, src) in out.coords.chunks_exact_mut(self.dim).zip(self.coords.chunks_exact(self.dim)) {
            for (r, d) in dst.iter_mut().enumerate() {
                *d = matrix[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .zip(src)
                    .map(|(m, x)| m * x)
                    .sum();
            }
        }
        out
    }

    /// Reorders rows so that row `k` of the result is row `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let mut coords = Vec::with_capacity(self.coords.len());
        for &p in perm {
            coords.extend_from_slice(self.point(p));
        }
        Self {
            n: self.n,
            dim: self.dim,
            coords,
            labels: self.labels.as_ref().map(|l| perm.iter().map(|&p| l[p]).collect()),
            provenance: self.provenance.clone(),
        }
    }
}

/// Squared Euclidean distance; the summation order is fixed by coordinate index.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
