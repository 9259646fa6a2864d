//! Local geometry of point-cloud manifolds from non-negative kernel (NNK)
//! regression graphs.
//!
//! The crate builds exact KNN graphs and their NNK sparsifications, measures
//! intrinsic dimension, polytope diameters and principal angles between local
//! tangent subspaces, and tracks these quantities while points are merged
//! pairwise into coarser clouds.

pub mod datasets;
pub mod error;
pub mod kernelgraph;
pub mod localgeom;
pub mod multiscale;
pub mod nnk;
pub mod rng;
pub mod stats;

pub use datasets::{generate, load_points, save_points, Embedding, Family, Format, ManifoldSpec, PointCloud};
pub use error::{Error, Result};
pub use kernelgraph::{estimate_sigma, gaussian_kernel, knn_graph, GraphConfig, KnnNeighborhood, SigmaRule};
pub use localgeom::{
    estimate_id, principal_angles, DiameterStats, GeomConfig, GraphKind, Graphs, IdEstimate, SubspaceBasis,
};
pub use multiscale::{
    compare_merge_policies, merge_step, run_multiscale, MergeConfig, MergePolicy, MergedPair, ScaleRecord,
    ScaleTrace,
};
pub use nnk::{nnk_graph, nnk_solve, NnkGraph, NnkNeighborhood, NnkSolution};

/// Version string written into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
