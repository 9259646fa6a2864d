use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::datasets::PointCloud;
use crate::error::{Error, Result};

/// Where the local PCA is centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// Difference vectors from the query point to its neighbors.
    #[default]
    Query,
    /// Deviations of the neighborhood and query from their mean.
    Mean,
}

/// Default eigenvalue ratio: λ_j counts when λ_j ≥ λ_max / 10.
pub const DEFAULT_EIGEN_RATIO: f64 = 0.1;

/// Local tangent estimate at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub center: usize,
    /// D × p, orthonormal columns for the significant eigenvalues.
    pub basis: DMatrix<f64>,
    /// Descending, nonnegative; length min(#vectors, D).
    pub eigenvalues: Vec<f64>,
    pub significant_count: usize,
}

/// Number of eigenvalues (sorted descending) with λ ≥ ratio · λ_max.
pub fn significant_count(eigenvalues: &[f64], ratio: f64) -> usize {
    let Some(&max) = eigenvalues.first() else { return 0 };
    if max <= 0.0 {
        return 0;
    }
    let threshold = ratio * max;
    eigenvalues.iter().take_while(|&&l| l >= threshold).count()
}

/// Local PCA of the neighborhood of `center`.
pub fn local_subspace(
    cloud: &PointCloud,
    center: usize,
    neighborhood: &[usize],
    centering: Centering,
    eigen_ratio: f64,
) -> Result<SubspaceBasis> {
    if neighborhood.is_empty() {
        return Err(Error::DegenerateNeighborhood(format!("node {center} has no neighbors")));
    }
    let vectors = difference_vectors(cloud, center, neighborhood, centering);
    let (eigenvalues, eigenvectors) = if vectors.nrows() >= vectors.ncols() {
        covariance_route(&vectors)
    } else {
        gram_route(&vectors)
    };
    build_basis(center, eigenvalues, eigenvectors, eigen_ratio)
}

/// Rows are the vectors whose (1/m)-scaled scatter is decomposed.
fn difference_vectors(cloud: &PointCloud, center: usize, nbhd: &[usize], centering: Centering) -> DMatrix<f64> {
    let dim = cloud.dim();
    match centering {
        Centering::Query => {
            let xc = cloud.point(center);
            DMatrix::from_fn(nbhd.len(), dim, |r, c| cloud.point(nbhd[r])[c] - xc[c])
        }
        Centering::Mean => {
            let members: Vec<usize> = nbhd.iter().copied().chain(std::iter::once(center)).collect();
            let mut mean = vec![0.0; dim];
            for &m in &members {
                for (acc, v) in mean.iter_mut().zip(cloud.point(m)) {
                    *acc += v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= members.len() as f64);
            DMatrix::from_fn(members.len(), dim, |r, c| cloud.point(members[r])[c] - mean[c])
        }
    }
}

/// Eigendecomposition of the D × D scatter (1/m) Vᵀ V.
fn covariance_route(v: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = v.nrows() as f64;
    let scatter = v.transpose() * v / m;
    sorted_eigen(scatter, v.nrows().min(v.ncols()))
        .into_iter()
        .unzip()
}

/// Eigendecomposition of the m × m Gram (1/m) V Vᵀ; eigenvectors are mapped
/// back through Vᵀ. Used when there are fewer vectors than dimensions.
pub(crate) fn gram_route(v: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = v.nrows() as f64;
    let gram = v * v.transpose() / m;
    sorted_eigen(gram, v.nrows().min(v.ncols()))
        .into_iter()
        .map(|(l, a)| {
            let mut u: Vec<f64> = (0..v.ncols())
                .map(|c| (0..v.nrows()).map(|r| v[(r, c)] * a[r]).sum())
                .collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                u.iter_mut().for_each(|x| *x /= norm);
            }
            (l, u)
        })
        .unzip()
}

/// Eigenpairs sorted by descending eigenvalue, clamped to be nonnegative,
/// truncated to `keep`.
fn sorted_eigen(sym: DMatrix<f64>, keep: usize) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(sym);
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &l)| (l.max(0.0), eig.eigenvectors.column(k).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.truncate(keep);
    pairs
}

fn build_basis(center: usize, eigenvalues: Vec<f64>, vectors: Vec<Vec<f64>>, ratio: f64) -> Result<SubspaceBasis> {
    if eigenvalues.first().is_none_or(|&l| l <= 0.0) {
        return Err(Error::ZeroScatter(center));
    }
    let p = significant_count(&eigenvalues, ratio);
    let dim = vectors[0].len();
    let basis = DMatrix::from_fn(dim, p, |r, c| vectors[c][r]);
    Ok(SubspaceBasis {
        center,
        basis,
        eigenvalues,
        significant_count: p,
    })
}
