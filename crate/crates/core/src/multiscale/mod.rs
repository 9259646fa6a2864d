//! Two-closest merging and the multiscale analysis loop.
//!
//! Each iteration merges the pair joined by the strongest edge of the chosen
//! similarity graph into its midpoint. Graphs are rebuilt after every merge,
//! with the bandwidth re-estimated once per scale; metrics are measured at the
//! end of each scale.

mod engine;

use std::fmt::Write as _;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::datasets::PointCloud;
use crate::error::{Error, Result};
use crate::kernelgraph::{knn_graph, GraphConfig, KnnNeighborhood};
use crate::localgeom::{
    angle_distributions, nnk_diameters, node_subspaces, AngleSummary, DiameterStats, GeomConfig, IdEstimate,
};
use crate::nnk::{nnk_graph, NnkGraph};
use crate::rng::{component_rng, stream};
use crate::stats;

pub(crate) use engine::MergeEngine;

/// Which graph's weights pick the pair to merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergePolicy {
    /// Shortest KNN edge.
    Knn,
    /// Largest directed NNK weight.
    Nnk,
}

impl MergePolicy {
    pub fn name(self) -> &'static str {
        match self {
            MergePolicy::Knn => "knn",
            MergePolicy::Nnk => "nnk",
        }
    }
}

impl std::str::FromStr for MergePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(MergePolicy::Knn),
            "nnk" => Ok(MergePolicy::Nnk),
            other => Err(Error::InvalidConfig(format!("unknown merge policy '{other}'"))),
        }
    }
}

/// Metrics recorded at every scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSelection {
    pub id: bool,
    pub diameters: bool,
    pub angles: bool,
}

impl Default for MetricSelection {
    fn default() -> Self {
        Self {
            id: true,
            diameters: true,
            angles: true,
        }
    }
}

pub const DEFAULT_RANDOM_PAIRS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeConfig {
    pub similarity: MergePolicy,
    pub steps_per_scale: usize,
    pub n_scales: usize,
    pub graph: GraphConfig,
    pub geom: GeomConfig,
    pub metrics: MetricSelection,
    pub n_random_pairs: usize,
    pub seed: u64,
}

impl MergeConfig {
    pub fn new(similarity: MergePolicy, steps_per_scale: usize, n_scales: usize) -> Self {
        Self {
            similarity,
            steps_per_scale,
            n_scales,
            graph: GraphConfig::default(),
            geom: GeomConfig::default(),
            metrics: MetricSelection::default(),
            n_random_pairs: DEFAULT_RANDOM_PAIRS,
            seed: 0,
        }
    }

    pub fn total_merges(&self) -> usize {
        self.steps_per_scale.saturating_mul(self.n_scales)
    }

    pub fn validate(&self, n_points: usize) -> Result<()> {
        if self.steps_per_scale == 0 {
            return Err(Error::InvalidConfig("steps per scale must be positive".into()));
        }
        if self.n_scales == 0 {
            return Err(Error::InvalidConfig("number of scales must be positive".into()));
        }
        if self.total_merges() >= n_points {
            return Err(Error::InvalidConfig(format!(
                "{} scales of {} merges need more than {n_points} points",
                self.n_scales, self.steps_per_scale
            )));
        }
        if self.graph.k == 0 {
            return Err(Error::InvalidConfig("K must be positive".into()));
        }
        self.graph.sigma.validate()?;
        self.geom.validate()
    }
}

/// One merge: compacted indices of the pair before the merge, and the index
/// of the midpoint after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedPair {
    pub i: usize,
    pub j: usize,
    pub new_index: usize,
}

/// Graph whose edges are searched by [`merge_step`].
#[derive(Debug, Clone, Copy)]
pub enum SimilarityGraph<'a> {
    Knn(&'a KnnNeighborhood),
    Nnk(&'a NnkGraph),
}

/// Merges the endpoints of the strongest edge of `graph` into their midpoint.
///
/// Ties go to the lexicographically smallest directed pair. The midpoint takes
/// the smaller of the two indices; the larger index is removed and later
/// points shift down by one.
pub fn merge_step(cloud: &PointCloud, graph: SimilarityGraph<'_>) -> Result<(PointCloud, MergedPair)> {
    let n = cloud.len();
    if n < 2 {
        return Err(Error::CannotMerge(n));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    let mut offer = |key: f64, i: usize, j: usize| {
        let better = match best {
            None => true,
            Some((bk, bi, bj)) => key > bk || (key == bk && (i, j) < (bi, bj)),
        };
        if better {
            best = Some((key, i, j));
        }
    };
    match graph {
        SimilarityGraph::Knn(knn) => {
            for i in 0..knn.n_nodes() {
                for (&j, &d) in knn.neighbors(i).iter().zip(knn.distances(i)) {
                    offer(-d, i, j);
                }
            }
        }
        SimilarityGraph::Nnk(g) => {
            for row in &g.rows {
                for (&j, &w) in row.support.iter().zip(&row.weights) {
                    offer(w, row.center, j);
                }
            }
        }
    }
    let (_, i, j) = best.ok_or_else(|| Error::DegenerateNeighborhood("graph has no edges".into()))?;
    let (keep, drop) = (i.min(j), i.max(j));
    let dim = cloud.dim();
    let mut coords = Vec::with_capacity((n - 1) * dim);
    for p in 0..n {
        if p == keep {
            coords.extend(cloud.point(i).iter().zip(cloud.point(j)).map(|(a, b)| (a + b) / 2.0));
        } else if p != drop {
            coords.extend_from_slice(cloud.point(p));
        }
    }
    let mut merged = PointCloud::from_flat(dim, coords, cloud.provenance())?;
    if let Some(labels) = cloud.labels() {
        let kept = labels.iter().enumerate().filter(|&(p, _)| p != drop).map(|(_, &l)| l).collect();
        merged = merged.with_labels(kept)?;
    }
    Ok((merged, MergedPair { i, j, new_index: keep }))
}

/// Metrics of the cloud at the end of one scale. Scale 0 is the input cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub scale: usize,
    pub n_points: usize,
    pub sigma: Option<f64>,
    pub mean_id_knn: Option<f64>,
    pub mean_id_nnk: Option<f64>,
    pub diameter_summary: Option<DiameterStats>,
    pub angle_summary: Option<AngleSummary>,
    pub merged_pairs: Vec<MergedPair>,
    /// Selected metrics that could not be computed at this scale.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScaleTrace {
    pub records: Vec<ScaleRecord>,
}

impl ScaleTrace {
    pub fn last(&self) -> Option<&ScaleRecord> {
        self.records.last()
    }

    /// CSV `scale,i,j,new_index` over every merge in order.
    pub fn merged_pairs_csv(&self) -> String {
        let mut out = String::from("scale,i,j,new_index\n");
        for r in &self.records {
            for p in &r.merged_pairs {
                writeln!(out, "{},{},{},{}", r.scale, p.i, p.j, p.new_index).unwrap();
            }
        }
        out
    }
}

fn scale_seed(seed: u64, scale: usize) -> u64 {
    component_rng(seed, stream::SCALE_BASE + scale as u64).next_u64()
}

fn measure(
    cloud: &PointCloud,
    knn: &KnnNeighborhood,
    scale: usize,
    merged_pairs: Vec<MergedPair>,
    cfg: &MergeConfig,
) -> ScaleRecord {
    let mut missing = Vec::new();
    let sigma = cfg.graph.sigma.resolve(knn).ok();
    if sigma.is_none() {
        missing.push("sigma".to_string());
    }
    let nnk = sigma.and_then(|s| nnk_graph(cloud, knn, s).ok());
    let metrics = cfg.metrics;

    let mut mean_id_knn = None;
    let mut mean_id_nnk = None;
    let mut nnk_bases = None;
    if metrics.id || metrics.angles {
        let knn_bases = node_subspaces(cloud, |i| knn.neighbors(i), &cfg.geom);
        if metrics.id {
            mean_id_knn = IdEstimate::from_bases(&knn_bases).ok().map(|e| e.mean_id);
        }
        if let Some(g) = &nnk {
            let bases = node_subspaces(cloud, |i| &g.rows[i].support, &cfg.geom);
            if metrics.id {
                mean_id_nnk = IdEstimate::from_bases(&bases).ok().map(|e| e.mean_id);
            }
            nnk_bases = Some(bases);
        }
    }
    if metrics.id {
        if mean_id_knn.is_none() {
            missing.push("mean_id_knn".to_string());
        }
        if mean_id_nnk.is_none() {
            missing.push("mean_id_nnk".to_string());
        }
    }

    let diameter_summary = if metrics.diameters {
        let d = nnk
            .as_ref()
            .map(|g| DiameterStats::from_per_node(nnk_diameters(cloud, g, cfg.geom.diameter_includes_center)))
            .filter(|d| d.n_defined > 0);
        if d.is_none() {
            missing.push("diameter_summary".to_string());
        }
        d
    } else {
        None
    };

    let angle_summary = if metrics.angles {
        let a = match (&nnk, &nnk_bases) {
            (Some(g), Some(bases)) => {
                angle_distributions(g, bases, cfg.n_random_pairs, scale_seed(cfg.seed, scale))
                    .ok()
                    .map(|d| d.summary())
            }
            _ => None,
        };
        if a.is_none() {
            missing.push("angle_summary".to_string());
        }
        a
    } else {
        None
    };

    ScaleRecord {
        scale,
        n_points: cloud.len(),
        sigma,
        mean_id_knn,
        mean_id_nnk,
        diameter_summary,
        angle_summary,
        merged_pairs,
        missing,
    }
}

/// Runs the merge schedule `steps[t]` (merges before measuring scale t + 1).
fn run_schedule(cloud: &PointCloud, steps: &[usize], cfg: &MergeConfig) -> Result<ScaleTrace> {
    let k = cfg.graph.k.min(cloud.len().saturating_sub(1));
    let knn = knn_graph(cloud, k)?;
    let mut records = vec![measure(cloud, &knn, 0, Vec::new(), cfg)];
    if steps.iter().all(|&s| s == 0) {
        return Ok(ScaleTrace { records });
    }
    let mut engine = MergeEngine::new(cloud, cfg.graph.k, cfg.similarity)?;
    for (t, &n_merges) in steps.iter().enumerate() {
        let sigma = records[t].sigma;
        engine.begin_scale(sigma)?;
        let pairs = (0..n_merges).map(|_| engine.merge_one()).collect::<Result<Vec<_>>>()?;
        let (current, knn) = engine.snapshot()?;
        records.push(measure(&current, &knn, t + 1, pairs, cfg));
    }
    Ok(ScaleTrace { records })
}

/// Merges `steps_per_scale` pairs per scale for `n_scales` scales, recording
/// metrics on the input cloud and after every scale.
pub fn run_multiscale(cloud: &PointCloud, cfg: &MergeConfig) -> Result<ScaleTrace> {
    cfg.validate(cloud.len())?;
    run_schedule(cloud, &vec![cfg.steps_per_scale; cfg.n_scales], cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterShift {
    pub knn: f64,
    pub nnk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub total_merges: usize,
    pub knn_trace: ScaleTrace,
    pub nnk_trace: ScaleTrace,
    pub diameter_shift: DiameterShift,
}

/// Wasserstein-1 distance between the median-normalized diameter
/// distributions of the first and last scale.
pub fn diameter_shift(trace: &ScaleTrace) -> Result<f64> {
    let values = |r: &ScaleRecord| -> Result<Vec<f64>> {
        let d = r.diameter_summary.as_ref().ok_or_else(|| {
            Error::DegenerateNeighborhood(format!("no diameters at scale {}", r.scale))
        })?;
        stats::median_normalized(&d.values())
            .ok_or_else(|| Error::DegenerateNeighborhood(format!("zero median diameter at scale {}", r.scale)))
    };
    let (first, last) = match (trace.records.first(), trace.records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyInput("empty scale trace".into())),
    };
    if first.scale == last.scale {
        return Ok(0.0);
    }
    let shift = stats::wasserstein1(&values(first)?, &values(last)?);
    shift.ok_or_else(|| Error::DegenerateNeighborhood("empty diameter distribution".into()))
}

/// Merges `⌊fraction·N⌋` points under each policy and compares how far the
/// shape of the diameter distribution moves.
///
/// Merges are grouped into scales of `cfg.steps_per_scale`, the last one
/// possibly shorter; `cfg.n_scales` and `cfg.similarity` are ignored.
pub fn compare_merge_policies(cloud: &PointCloud, fraction: f64, cfg: &MergeConfig) -> Result<PolicyComparison> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("merge fraction must lie in (0, 1), got {fraction}")));
    }
    let total = (fraction * cloud.len() as f64).floor() as usize;
    let probe = MergeConfig {
        n_scales: 1,
        steps_per_scale: cfg.steps_per_scale.max(1),
        ..*cfg
    };
    probe.validate(cloud.len().max(probe.steps_per_scale + 1))?;
    let mut steps = vec![probe.steps_per_scale; total / probe.steps_per_scale];
    if !total.is_multiple_of(probe.steps_per_scale) {
        steps.push(total % probe.steps_per_scale);
    }
    let mut metrics = cfg.metrics;
    metrics.diameters = true;
    let run = |policy| {
        run_schedule(
            cloud,
            &steps,
            &MergeConfig {
                similarity: policy,
                metrics,
                ..*cfg
            },
        )
    };
    let knn_trace = run(MergePolicy::Knn)?;
    let nnk_trace = run(MergePolicy::Nnk)?;
    Ok(PolicyComparison {
        total_merges: total,
        diameter_shift: DiameterShift {
            knn: diameter_shift(&knn_trace)?,
            nnk: diameter_shift(&nnk_trace)?,
        },
        knn_trace,
        nnk_trace,
    })
}
