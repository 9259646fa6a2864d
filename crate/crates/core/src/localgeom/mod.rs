//! Local geometry of neighborhoods: polytope diameters, tangent subspaces,
//! eigenvalue-count intrinsic dimension, and principal angles.

mod angles;
mod diameter;
mod subspace;

pub use angles::{
    angle_distributions, principal_angles, AngleDistributions, AngleSample, AngleSummary, PairKind,
    ANGLE_RESOLUTION, ORTHONORMAL_TOLERANCE,
};
pub use diameter::{nnk_diameters, node_values_csv, polytope_diameter, DiameterStats};
pub use subspace::{local_subspace, significant_count, Centering, SubspaceBasis, DEFAULT_EIGEN_RATIO};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::PointCloud;
use crate::error::{Error, Result};
use crate::kernelgraph::{knn_graph, GraphConfig, KnnNeighborhood};
use crate::nnk::{nnk_graph, NnkGraph};
use crate::stats::{self, Quantile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomConfig {
    pub eigen_ratio: f64,
    pub centering: Centering,
    /// Include the center node when measuring polytope diameters.
    pub diameter_includes_center: bool,
}

impl Default for GeomConfig {
    fn default() -> Self {
        Self {
            eigen_ratio: DEFAULT_EIGEN_RATIO,
            centering: Centering::Query,
            diameter_includes_center: true,
        }
    }
}

impl GeomConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eigen_ratio > 0.0 && self.eigen_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eigen ratio must lie in (0, 1], got {}",
                self.eigen_ratio
            )));
        }
        Ok(())
    }
}

/// Which neighborhoods the local PCA runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Knn,
    Nnk,
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(GraphKind::Knn),
            "nnk" => Ok(GraphKind::Nnk),
            other => Err(Error::InvalidConfig(format!("unknown graph kind '{other}'"))),
        }
    }
}

/// Local subspace at every node; `None` for zero-scatter or empty neighborhoods.
pub fn node_subspaces<'a, F>(cloud: &PointCloud, neighborhood: F, cfg: &GeomConfig) -> Vec<Option<SubspaceBasis>>
where
    F: Fn(usize) -> &'a [usize] + Sync,
{
    (0..cloud.len())
        .into_par_iter()
        .map(|i| local_subspace(cloud, i, neighborhood(i), cfg.centering, cfg.eigen_ratio).ok())
        .collect()
}

/// Share of zero-scatter nodes above which an estimate is flagged.
pub const DEGENERATE_WARNING_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdEstimate {
    pub mean_id: f64,
    pub median_id: f64,
    #[serde(skip)]
    pub per_node: Vec<Option<usize>>,
    pub n_nodes: usize,
    pub n_degenerate: usize,
    pub id_histogram: BTreeMap<usize, usize>,
    pub warning: Option<String>,
}

impl IdEstimate {
    /// Aggregates per-node significant counts; fails if no node has a subspace.
    pub fn from_per_node(per_node: Vec<Option<usize>>) -> Result<Self> {
        let counts: Vec<f64> = per_node.iter().flatten().map(|&p| p as f64).collect();
        let n_degenerate = per_node.len() - counts.len();
        let (Some(mean_id), Some(median_id)) = (stats::mean(&counts), stats::median(&counts)) else {
            return Err(Error::DegenerateNeighborhood("every node has zero scatter".into()));
        };
        let mut id_histogram = BTreeMap::new();
        for &p in per_node.iter().flatten() {
            *id_histogram.entry(p).or_insert(0) += 1;
        }
        let fraction = n_degenerate as f64 / per_node.len() as f64;
        let warning = (fraction > DEGENERATE_WARNING_FRACTION).then(|| {
            format!(
                "unreliable estimate: {n_degenerate} of {} nodes have zero scatter",
                per_node.len()
            )
        });
        Ok(Self {
            mean_id,
            median_id,
            n_nodes: per_node.len(),
            n_degenerate,
            id_histogram,
            warning,
            per_node,
        })
    }

    pub fn from_bases(bases: &[Option<SubspaceBasis>]) -> Result<Self> {
        Self::from_per_node(bases.iter().map(|b| b.as_ref().map(|b| b.significant_count)).collect())
    }
}

/// Graphs of one cloud at one bandwidth.
#[derive(Debug, Clone)]
pub struct Graphs {
    pub knn: KnnNeighborhood,
    pub sigma: f64,
    pub nnk: NnkGraph,
}

impl Graphs {
    pub fn build(cloud: &PointCloud, cfg: &GraphConfig) -> Result<Self> {
        let knn = knn_graph(cloud, cfg.k)?;
        let sigma = cfg.sigma.resolve(&knn)?;
        let nnk = nnk_graph(cloud, &knn, sigma)?;
        Ok(Self { knn, sigma, nnk })
    }

    pub fn subspaces(&self, cloud: &PointCloud, kind: GraphKind, cfg: &GeomConfig) -> Vec<Option<SubspaceBasis>> {
        match kind {
            GraphKind::Knn => node_subspaces(cloud, |i| self.knn.neighbors(i), cfg),
            GraphKind::Nnk => node_subspaces(cloud, |i| &self.nnk.rows[i].support, cfg),
        }
    }
}

/// Intrinsic dimension as the mean count of significant local principal
/// components over KNN or NNK neighborhoods.
pub fn estimate_id(cloud: &PointCloud, kind: GraphKind, graph_cfg: &GraphConfig, geom: &GeomConfig) -> Result<IdEstimate> {
    geom.validate()?;
    let bases = match kind {
        GraphKind::Knn => {
            let knn = knn_graph(cloud, graph_cfg.k)?;
            node_subspaces(cloud, |i| knn.neighbors(i), geom)
        }
        GraphKind::Nnk => Graphs::build(cloud, graph_cfg)?.subspaces(cloud, kind, geom),
    };
    IdEstimate::from_bases(&bases)
}

/// Combined summary written by the metric commands; absent metrics are null.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub mean_id: Option<f64>,
    pub median_id: Option<f64>,
    pub id_histogram: Option<BTreeMap<usize, usize>>,
    pub diameter_quantiles: Option<Vec<Quantile>>,
    pub ks_adjacent_vs_random: Option<f64>,
}
