//! Incremental two-closest merging.
//!
//! Points live in fixed slots; a merge writes the midpoint into the lower
//! slot and retires the upper one, so the order of live slots is exactly the
//! compacted point order. Neighbor lists are repaired only where a merge can
//! change them, and a lazily invalidated max-heap holds each row's best
//! candidate edge. The result is identical to rebuilding every graph after
//! every merge.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::{MergePolicy, MergedPair};
use crate::datasets::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use crate::kernelgraph::{by_dist_then_index, select_nearest, KnnNeighborhood};
use crate::nnk::{nnk_row_by, NnkNeighborhood};

/// Best edge of one row. Larger `key` wins; ties go to the smaller (u, v).
#[derive(Debug, Clone, Copy)]
struct Candidate {
    key: f64,
    u: usize,
    v: usize,
    version: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.u.cmp(&self.u))
            .then_with(|| other.v.cmp(&self.v))
            .then_with(|| self.version.cmp(&other.version))
    }
}

pub(crate) struct MergeEngine {
    dim: usize,
    coords: Vec<f64>,
    labels: Option<Vec<i64>>,
    provenance: String,
    alive: Vec<bool>,
    n_alive: usize,
    k: usize,
    policy: MergePolicy,
    sigma: Option<f64>,
    /// Per slot: `(squared distance, slot)` sorted with index tie-breaks.
    knn: Vec<Vec<(f64, usize)>>,
    nnk: Vec<Option<NnkNeighborhood>>,
    version: Vec<u64>,
    heap: BinaryHeap<Candidate>,
}

impl MergeEngine {
    pub fn new(cloud: &PointCloud, k: usize, policy: MergePolicy) -> Result<Self> {
        let n = cloud.len();
        if n < 2 {
            return Err(Error::CannotMerge(n));
        }
        let mut engine = Self {
            dim: cloud.dim(),
            coords: cloud.coords().to_vec(),
            labels: cloud.labels().map(<[i64]>::to_vec),
            provenance: cloud.provenance().to_string(),
            alive: vec![true; n],
            n_alive: n,
            k: k.min(n - 1),
            policy,
            sigma: None,
            knn: vec![Vec::new(); n],
            nnk: vec![None; n],
            version: vec![0; n],
            heap: BinaryHeap::new(),
        };
        let all: Vec<usize> = (0..n).collect();
        engine.rebuild_knn_rows(&all);
        Ok(engine)
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.n_alive
    }

    #[cfg(test)]
    pub fn k(&self) -> usize {
        self.k
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.coords[slot * self.dim..(slot + 1) * self.dim]
    }

    fn live_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.alive.len()).filter(|&s| self.alive[s])
    }

    fn compact_index(&self, slot: usize) -> usize {
        self.alive[..slot].iter().filter(|&&a| a).count()
    }

    fn rebuild_knn_rows(&mut self, slots: &[usize]) {
        let rows: Vec<Vec<(f64, usize)>> = slots
            .par_iter()
            .map(|&s| {
                let xs = self.point(s);
                let cands = self
                    .live_slots()
                    .filter(|&t| t != s)
                    .map(|t| (sq_dist(xs, self.point(t)), t))
                    .collect();
                select_nearest(cands, self.k)
            })
            .collect();
        for (&s, row) in slots.iter().zip(rows) {
            self.knn[s] = row;
        }
    }

    /// Fixes the bandwidth for the coming merges and rebuilds every row's
    /// similarity and the candidate heap.
    pub fn begin_scale(&mut self, sigma: Option<f64>) -> Result<()> {
        if self.policy == MergePolicy::Nnk && sigma.is_none() {
            return Err(Error::DegenerateBandwidth);
        }
        self.sigma = sigma;
        let live: Vec<usize> = self.live_slots().collect();
        self.refresh_rows(&live)
    }

    /// Recomputes the similarity rows of `slots` and pushes their best edges.
    fn refresh_rows(&mut self, slots: &[usize]) -> Result<()> {
        if self.policy == MergePolicy::Nnk {
            let sigma = self.sigma.expect("bandwidth is set by begin_scale");
            let rows = slots
                .par_iter()
                .map(|&s| {
                    let set: Vec<usize> = self.knn[s].iter().map(|&(_, t)| t).collect();
                    nnk_row_by(|t| self.point(t), s, &set, sigma)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    Error::AtNode { node, source } => Error::AtNode {
                        node: self.compact_index(node),
                        source,
                    },
                    other => other,
                })?;
            for (&s, row) in slots.iter().zip(rows) {
                self.nnk[s] = Some(row);
            }
        }
        for &s in slots {
            self.version[s] += 1;
            if let Some(c) = self.row_best(s) {
                self.heap.push(c);
            }
        }
        Ok(())
    }

    fn row_best(&self, s: usize) -> Option<Candidate> {
        let version = self.version[s];
        match self.policy {
            MergePolicy::Knn => self
                .knn[s]
                .iter()
                .map(|&(sq, t)| (sq.sqrt(), t))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(d, t)| Candidate {
                    key: -d,
                    u: s,
                    v: t,
                    version,
                }),
            MergePolicy::Nnk => {
                let row = self.nnk[s].as_ref()?;
                row.support
                    .iter()
                    .zip(&row.weights)
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(&t, &w)| Candidate {
                        key: w,
                        u: s,
                        v: t,
                        version,
                    })
            }
        }
    }

    fn pop_best(&mut self) -> Option<Candidate> {
        while let Some(c) = self.heap.pop() {
            if self.alive[c.u] && self.version[c.u] == c.version {
                return Some(c);
            }
        }
        None
    }

    /// Merges the most similar pair and repairs the affected rows.
    pub fn merge_one(&mut self) -> Result<MergedPair> {
        if self.n_alive < 2 {
            return Err(Error::CannotMerge(self.n_alive));
        }
        let best = self
            .pop_best()
            .ok_or_else(|| Error::DegenerateNeighborhood("no candidate edge left to merge".into()))?;
        let (u, v) = (best.u, best.v);
        let pair = MergedPair {
            i: self.compact_index(u),
            j: self.compact_index(v),
            new_index: self.compact_index(u.min(v)),
        };

        let (keep, drop) = (u.min(v), u.max(v));
        let mid: Vec<f64> = self
            .point(u)
            .iter()
            .zip(self.point(v))
            .map(|(a, b)| (a + b) / 2.0)
            .collect();
        self.coords[keep * self.dim..(keep + 1) * self.dim].copy_from_slice(&mid);
        self.alive[drop] = false;
        self.knn[drop].clear();
        self.nnk[drop] = None;
        self.n_alive -= 1;

        let changed: Vec<usize> = if self.k > self.n_alive - 1 {
            self.k = self.n_alive - 1;
            let live: Vec<usize> = self.live_slots().collect();
            self.rebuild_knn_rows(&live);
            live
        } else {
            self.repair_knn(keep, drop)
        };
        if self.n_alive >= 2 {
            self.refresh_rows(&changed)?;
        }
        Ok(pair)
    }

    /// Updates neighbor lists after `keep` moved and `drop` vanished; returns
    /// the slots whose lists changed.
    fn repair_knn(&mut self, keep: usize, drop: usize) -> Vec<usize> {
        let xm = self.point(keep).to_vec();
        let mut full = vec![keep];
        let mut changed = vec![keep];
        for w in 0..self.alive.len() {
            if !self.alive[w] || w == keep {
                continue;
            }
            let row = &mut self.knn[w];
            if row.iter().any(|&(_, t)| t == keep || t == drop) {
                full.push(w);
                changed.push(w);
                continue;
            }
            let cand = (sq_dist(&self.coords[w * self.dim..(w + 1) * self.dim], &xm), keep);
            if row.last().is_some_and(|last| by_dist_then_index(&cand, last) == Ordering::Less) {
                let pos = row.partition_point(|e| by_dist_then_index(e, &cand) == Ordering::Less);
                row.insert(pos, cand);
                row.pop();
                changed.push(w);
            }
        }
        self.rebuild_knn_rows(&full);
        changed.sort_unstable();
        changed
    }

    /// Current cloud and its exact KNN graph in compacted indices.
    pub fn snapshot(&self) -> Result<(PointCloud, KnnNeighborhood)> {
        let live: Vec<usize> = self.live_slots().collect();
        let mut compact = vec![usize::MAX; self.alive.len()];
        for (c, &s) in live.iter().enumerate() {
            compact[s] = c;
        }
        let mut coords = Vec::with_capacity(live.len() * self.dim);
        for &s in &live {
            coords.extend_from_slice(self.point(s));
        }
        let mut cloud = PointCloud::from_flat(self.dim, coords, self.provenance.clone())?;
        if let Some(labels) = &self.labels {
            cloud = cloud.with_labels(live.iter().map(|&s| labels[s]).collect())?;
        }
        let rows = live
            .iter()
            .map(|&s| self.knn[s].iter().map(|&(sq, t)| (sq, compact[t])).collect())
            .collect();
        Ok((cloud, KnnNeighborhood::from_rows(self.k, rows)))
    }
}
