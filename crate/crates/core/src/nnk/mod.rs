//! Non-negative kernel regression neighborhoods and the sparse NNK graph.
//!
//! Each node keeps the neighbors of its initial KNN set that receive a
//! positive weight in the kernelized non-negative regression of the node onto
//! its neighbors. Neighbors that are redundant given a closer neighbor in the
//! same direction receive weight zero and are dropped.

mod oracle;
mod solver;

pub use oracle::{nnk_brute_force_oracle, ORACLE_MAX_DIM};
pub use solver::{
    kkt_violation, nnk_solve, NnkSolution, DIAGONAL_REGULARIZATION, KKT_TOLERANCE, PSD_TOLERANCE,
};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::PointCloud;
use crate::error::Result;
use crate::kernelgraph::{kernel_submatrices_by, KnnNeighborhood};
use crate::stats::{self, Quantile};

/// Weights at or below this are treated as zero and not stored.
pub const PRUNE_THRESHOLD: f64 = 1e-8;

/// One row of the NNK adjacency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnkNeighborhood {
    pub center: usize,
    /// Retained neighbors in initial-neighborhood order (ascending distance).
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
    pub residual: f64,
}

impl NnkNeighborhood {
    pub fn weight_to(&self, j: usize) -> f64 {
        self.support
            .iter()
            .position(|&s| s == j)
            .map_or(0.0, |p| self.weights[p])
    }
}

/// Directed sparse graph: row `i` holds the NNK weights of node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NnkGraph {
    pub rows: Vec<NnkNeighborhood>,
    pub sigma: f64,
    pub initial_k: usize,
}

/// Solves the NNK problem of `center` over the candidate set `set`.
pub fn nnk_row(cloud: &PointCloud, center: usize, set: &[usize], sigma: f64) -> Result<NnkNeighborhood> {
    nnk_row_by(|i| cloud.point(i), center, set, sigma)
}

pub(crate) fn nnk_row_by<'a, P>(point: P, center: usize, set: &[usize], sigma: f64) -> Result<NnkNeighborhood>
where
    P: Fn(usize) -> &'a [f64],
{
    let (kss, ksi) = kernel_submatrices_by(point, center, set, sigma);
    let sol = nnk_solve(&kss, &ksi).map_err(|e| e.at_node(center))?;
    let (support, weights) = set
        .iter()
        .zip(&sol.theta)
        .filter(|(_, &w)| w > PRUNE_THRESHOLD)
        .map(|(&j, &w)| (j, w))
        .unzip();
    Ok(NnkNeighborhood {
        center,
        support,
        weights,
        residual: sol.residual,
    })
}

/// Runs the NNK optimization at every node over its KNN set.
pub fn nnk_graph(cloud: &PointCloud, knn: &KnnNeighborhood, sigma: f64) -> Result<NnkGraph> {
    let rows = (0..cloud.len())
        .into_par_iter()
        .map(|i| nnk_row(cloud, i, knn.neighbors(i), sigma))
        .collect::<Result<Vec<_>>>()?;
    Ok(NnkGraph {
        rows,
        sigma,
        initial_k: knn.k(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnkSummary {
    pub n_nodes: usize,
    pub sigma: f64,
    #[serde(rename = "initial_K")]
    pub initial_k: usize,
    pub mean_support_size: f64,
    pub residual_quantiles: Vec<Quantile>,
}

impl NnkGraph {
    pub fn n_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn n_edges(&self) -> usize {
        self.rows.iter().map(|r| r.support.len()).sum()
    }

    /// Directed edges `(src, dst, weight)` sorted by (src, dst).
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for row in &self.rows {
            let start = out.len();
            out.extend(row.support.iter().zip(&row.weights).map(|(&j, &w)| (row.center, j, w)));
            out[start..].sort_by_key(|e| e.1);
        }
        out
    }

    /// CSV edge list `src,dst,weight` sorted by (src, dst).
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("src,dst,weight\n");
        for (i, j, w) in self.edges() {
            writeln!(out, "{i},{j},{w:.17e}").unwrap();
        }
        out
    }

    pub fn summary(&self) -> NnkSummary {
        let sizes: Vec<f64> = self.rows.iter().map(|r| r.support.len() as f64).collect();
        let residuals: Vec<f64> = self.rows.iter().map(|r| r.residual).collect();
        NnkSummary {
            n_nodes: self.n_nodes(),
            sigma: self.sigma,
            initial_k: self.initial_k,
            mean_support_size: stats::mean(&sizes).unwrap_or(0.0),
            residual_quantiles: stats::summary_quantiles(&residuals),
        }
    }
}
