use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SubspaceBasis;
use crate::error::{Error, Result};
use crate::nnk::NnkGraph;
use crate::rng::{component_rng, stream};
use crate::stats::{self, Quantile};

/// Orthonormality tolerance for inputs to [`principal_angles`].
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-8;
/// Angles below this are rounding noise and reported as exactly zero.
pub const ANGLE_RESOLUTION: f64 = 1e-10;

fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    (gram - DMatrix::identity(m.ncols(), m.ncols())).amax()
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Principal angles between span(U) and span(V), ascending, length min(p, q).
///
/// Cosines come from the singular values of UᵀV and sines from those of
/// V − U(UᵀV); each angle is recovered from whichever is better conditioned.
pub fn principal_angles(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Vec<f64>> {
    if u.nrows() != v.nrows() {
        return Err(Error::InvalidConfig(format!(
            "bases live in R^{} and R^{}",
            u.nrows(),
            v.nrows()
        )));
    }
    for m in [u, v] {
        let deviation = orthonormality_defect(m);
        if deviation > ORTHONORMAL_TOLERANCE {
            return Err(Error::InvalidBasis { deviation });
        }
    }
    // Ensure q ≤ p so the sines of V's residual are exactly the principal sines.
    let (u, v) = if u.ncols() >= v.ncols() { (u, v) } else { (v, u) };
    let q = v.ncols();
    if q == 0 {
        return Ok(Vec::new());
    }
    let c = u.transpose() * v;
    let mut cosines = singular_values(&c);
    cosines.sort_by(|a, b| b.total_cmp(a));
    let mut sines = singular_values(&(v - u * &c));
    sines.sort_by(f64::total_cmp);

    let mut angles: Vec<f64> = cosines
        .iter()
        .zip(&sines)
        .map(|(&cs, &sn)| {
            let angle = if cs * cs >= 0.5 {
                sn.clamp(0.0, 1.0).asin()
            } else {
                cs.clamp(0.0, 1.0).acos()
            };
            if angle < ANGLE_RESOLUTION {
                0.0
            } else {
                angle
            }
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Adjacent,
    Random,
}

impl PairKind {
    pub fn name(self) -> &'static str {
        match self {
            PairKind::Adjacent => "adjacent",
            PairKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSample {
    pub kind: PairKind,
    pub i: usize,
    pub j: usize,
    pub angles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AngleDistributions {
    pub adjacent: Vec<AngleSample>,
    pub random: Vec<AngleSample>,
    /// The graph had no edges between nodes with a basis.
    pub no_adjacent_pairs: bool,
}

/// Angles between bases of NNK-adjacent nodes and of `n_random_pairs`
/// uniformly drawn distinct node pairs. Nodes without a basis are skipped.
pub fn angle_distributions(
    graph: &NnkGraph,
    bases: &[Option<SubspaceBasis>],
    n_random_pairs: usize,
    seed: u64,
) -> Result<AngleDistributions> {
    let adjacent_pairs: Vec<(usize, usize)> = graph
        .edges()
        .into_iter()
        .map(|(i, j, _)| (i, j))
        .filter(|&(i, j)| bases[i].is_some() && bases[j].is_some())
        .collect();

    let usable: Vec<usize> = (0..bases.len()).filter(|&i| bases[i].is_some()).collect();
    let mut random_pairs = Vec::with_capacity(n_random_pairs);
    if usable.len() >= 2 {
        let mut rng = component_rng(seed, stream::RANDOM_PAIRS);
        while random_pairs.len() < n_random_pairs {
            let a = usable[rng.random_range(0..usable.len())];
            let b = usable[rng.random_range(0..usable.len())];
            if a != b {
                random_pairs.push((a, b));
            }
        }
    }

    let measure = |kind: PairKind, pairs: &[(usize, usize)]| -> Result<Vec<AngleSample>> {
        pairs
            .par_iter()
            .map(|&(i, j)| {
                let (bi, bj) = (bases[i].as_ref().unwrap(), bases[j].as_ref().unwrap());
                Ok(AngleSample {
                    kind,
                    i,
                    j,
                    angles: principal_angles(&bi.basis, &bj.basis)?,
                })
            })
            .collect()
    };

    Ok(AngleDistributions {
        no_adjacent_pairs: adjacent_pairs.is_empty(),
        adjacent: measure(PairKind::Adjacent, &adjacent_pairs)?,
        random: measure(PairKind::Random, &random_pairs)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSummary {
    pub n_adjacent_pairs: usize,
    pub n_random_pairs: usize,
    pub mean_adjacent: Option<f64>,
    pub mean_random: Option<f64>,
    pub adjacent_quantiles: Vec<Quantile>,
    pub random_quantiles: Vec<Quantile>,
    pub ks_adjacent_vs_random: Option<f64>,
}

impl AngleDistributions {
    pub fn flat_angles(&self, kind: PairKind) -> Vec<f64> {
        let samples = match kind {
            PairKind::Adjacent => &self.adjacent,
            PairKind::Random => &self.random,
        };
        samples.iter().flat_map(|s| s.angles.iter().copied()).collect()
    }

    pub fn summary(&self) -> AngleSummary {
        let adj = self.flat_angles(PairKind::Adjacent);
        let rnd = self.flat_angles(PairKind::Random);
        AngleSummary {
            n_adjacent_pairs: self.adjacent.len(),
            n_random_pairs: self.random.len(),
            mean_adjacent: stats::mean(&adj),
            mean_random: stats::mean(&rnd),
            adjacent_quantiles: stats::summary_quantiles(&adj),
            random_quantiles: stats::summary_quantiles(&rnd),
            ks_adjacent_vs_random: stats::ks_statistic(&adj, &rnd),
        }
    }

    /// CSV `kind,i,j,angle_index,angle_radians`; angle_index is 0-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,i,j,angle_index,angle_radians\n");
        for s in self.adjacent.iter().chain(&self.random) {
            for (k, a) in s.angles.iter().enumerate() {
                writeln!(out, "{},{},{},{k},{a:.17e}", s.kind.name(), s.i, s.j).unwrap();
            }
        }
        out
    }
}
