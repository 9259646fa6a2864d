use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::PointCloud;
use crate::error::{Error, Result};
use crate::nnk::NnkGraph;
use crate::stats::{self, Histogram, Quantile};

/// Largest pairwise distance among the neighborhood points, optionally
/// including the center itself.
pub fn polytope_diameter(cloud: &PointCloud, center: usize, neighborhood: &[usize], include_center: bool) -> Result<f64> {
    if neighborhood.is_empty() {
        return Err(Error::DegenerateNeighborhood(format!("node {center} has no neighbors")));
    }
    let mut pts: Vec<usize> = neighborhood.to_vec();
    if include_center {
        pts.push(center);
    }
    let mut best: f64 = 0.0;
    for a in 0..pts.len() {
        for b in (a + 1)..pts.len() {
            best = best.max(cloud.sq_dist(pts[a], pts[b]));
        }
    }
    Ok(best.sqrt())
}

/// Per-node NNK polytope diameters; `None` where the support is empty.
pub fn nnk_diameters(cloud: &PointCloud, graph: &NnkGraph, include_center: bool) -> Vec<Option<f64>> {
    graph
        .rows
        .par_iter()
        .map(|row| polytope_diameter(cloud, row.center, &row.support, include_center).ok())
        .collect()
}

const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiameterStats {
    #[serde(skip)]
    pub per_node: Vec<Option<f64>>,
    pub n_nodes: usize,
    pub n_defined: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub quantiles: Vec<Quantile>,
    pub histogram: Option<Histogram>,
}

impl DiameterStats {
    pub fn from_per_node(per_node: Vec<Option<f64>>) -> Self {
        let values = defined(&per_node);
        Self {
            n_nodes: per_node.len(),
            n_defined: values.len(),
            mean: stats::mean(&values),
            median: stats::median(&values),
            quantiles: stats::summary_quantiles(&values),
            histogram: Histogram::new(&values, HISTOGRAM_BINS),
            per_node,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        defined(&self.per_node)
    }

    pub fn max(&self) -> Option<f64> {
        self.values().into_iter().reduce(f64::max)
    }
}

fn defined(per_node: &[Option<f64>]) -> Vec<f64> {
    per_node.iter().flatten().copied().collect()
}

/// CSV `node,value` over nodes with a defined value.
pub fn node_values_csv<T: std::fmt::Display>(values: &[Option<T>]) -> String {
    let mut out = String::from("node,value\n");
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            writeln!(out, "{i},{v}").unwrap();
        }
    }
    out
}
