//! Gaussian kernel, bandwidth selection and exact K-nearest-neighbor graphs.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use crate::stats;

/// Default size of the initial neighborhood.
pub const DEFAULT_K: usize = 30;

/// `exp(-‖a - b‖² / (2σ²))`.
#[inline]
pub fn gaussian_kernel(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    kernel_from_sq_dist(sq_dist(a, b), sigma)
}

#[inline]
pub fn kernel_from_sq_dist(sq: f64, sigma: f64) -> f64 {
    (-sq / (2.0 * sigma * sigma)).exp()
}

/// How the kernel bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum SigmaRule {
    Fixed { sigma: f64 },
    /// Median over nodes of the distance to the `rank`-th nearest neighbor.
    KnnMedian { rank: usize },
}

impl SigmaRule {
    /// `KnnMedian` at rank ⌈K/2⌉.
    pub fn default_for_k(k: usize) -> Self {
        SigmaRule::KnnMedian { rank: k.div_ceil(2).max(1) }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SigmaRule::Fixed { sigma } if !(sigma.is_finite() && sigma > 0.0) => {
                Err(Error::InvalidConfig(format!("fixed sigma must be positive, got {sigma}")))
            }
            SigmaRule::KnnMedian { rank: 0 } => Err(Error::InvalidConfig("knn-median rank must be >= 1".into())),
            _ => Ok(()),
        }
    }

    /// Resolves the bandwidth for a cloud whose neighborhood is `knn`.
    /// A rank above the neighborhood size is clamped to K.
    pub fn resolve(&self, knn: &KnnNeighborhood) -> Result<f64> {
        self.validate()?;
        match *self {
            SigmaRule::Fixed { sigma } => Ok(sigma),
            SigmaRule::KnnMedian { rank } => estimate_sigma(knn, rank.min(knn.k())),
        }
    }
}

impl std::str::FromStr for SigmaRule {
    type Err = Error;

    /// Parses `fixed:<v>` or `knn-median:<rank>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("expected fixed:<v> or knn-median:<rank>, got '{s}'"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let rule = match kind {
            "fixed" => SigmaRule::Fixed {
                sigma: value.parse().map_err(|_| bad())?,
            },
            "knn-median" => SigmaRule::KnnMedian {
                rank: value.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl std::fmt::Display for SigmaRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SigmaRule::Fixed { sigma } => write!(f, "fixed:{sigma}"),
            SigmaRule::KnnMedian { rank } => write!(f, "knn-median:{rank}"),
        }
    }
}

/// Initial-neighborhood size and bandwidth rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub k: usize,
    pub sigma: SigmaRule,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self::with_k(DEFAULT_K)
    }
}

impl GraphConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            sigma: SigmaRule::default_for_k(k),
        }
    }
}

/// Per-node neighbor lists sorted by ascending distance, ties by node index.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnNeighborhood {
    k: usize,
    ids: Vec<usize>,
    dists: Vec<f64>,
}

impl KnnNeighborhood {
    /// Assembles a neighborhood from per-node `(squared distance, id)` lists
    /// that are already in order.
    pub(crate) fn from_rows(k: usize, rows: Vec<Vec<(f64, usize)>>) -> Self {
        let mut ids = Vec::with_capacity(rows.len() * k);
        let mut dists = Vec::with_capacity(rows.len() * k);
        for row in rows {
            debug_assert_eq!(row.len(), k);
            for (sq, j) in row {
                ids.push(j);
                dists.push(sq.sqrt());
            }
        }
        Self { k, ids, dists }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_nodes(&self) -> usize {
        self.ids.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.ids[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.dists[i * self.k..(i + 1) * self.k]
    }

    /// CSV edge list `src,dst,rank,distance` sorted by (src, rank); rank is 1-based.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("src,dst,rank,distance\n");
        for i in 0..self.n_nodes() {
            for (r, (&j, &d)) in self.neighbors(i).iter().zip(self.distances(i)).enumerate() {
                writeln!(out, "{i},{j},{},{d:.17e}", r + 1).unwrap();
            }
        }
        out
    }
}

#[inline]
pub(crate) fn by_dist_then_index(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Keeps the `k` smallest `(squared distance, id)` candidates in order.
pub(crate) fn select_nearest(mut cands: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    if k < cands.len() {
        cands.select_nth_unstable_by(k, by_dist_then_index);
        cands.truncate(k);
    }
    cands.sort_unstable_by(by_dist_then_index);
    cands
}

/// Exact K-nearest-neighbor graph by brute force.
pub fn knn_graph(cloud: &PointCloud, k: usize) -> Result<KnnNeighborhood> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    let rows: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = cloud.point(i);
            let cands = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(xi, cloud.point(j)), j))
                .collect();
            select_nearest(cands, k)
        })
        .collect();
    Ok(KnnNeighborhood::from_rows(k, rows))
}

/// Median over nodes of the distance to the `rank`-th nearest neighbor (1-based).
pub fn estimate_sigma(knn: &KnnNeighborhood, rank: usize) -> Result<f64> {
    if rank == 0 || rank > knn.k() {
        return Err(Error::InvalidConfig(format!(
            "bandwidth rank {rank} outside 1..={}",
            knn.k()
        )));
    }
    let at_rank: Vec<f64> = (0..knn.n_nodes()).map(|i| knn.distances(i)[rank - 1]).collect();
    match stats::median(&at_rank) {
        Some(s) if s > 0.0 => Ok(s),
        _ => Err(Error::DegenerateBandwidth),
    }
}

/// Kernel matrix among the neighbors `set` and kernel vector to `center`.
pub fn kernel_submatrices(
    cloud: &PointCloud,
    center: usize,
    set: &[usize],
    sigma: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    kernel_submatrices_by(|i| cloud.point(i), center, set, sigma)
}

/// [`kernel_submatrices`] over an arbitrary point accessor.
pub(crate) fn kernel_submatrices_by<'a, P>(point: P, center: usize, set: &[usize], sigma: f64) -> (DMatrix<f64>, DVector<f64>)
where
    P: Fn(usize) -> &'a [f64],
{
    let m = set.len();
    let mut kss = DMatrix::from_element(m, m, 1.0);
    for a in 0..m {
        for b in (a + 1)..m {
            let v = gaussian_kernel(point(set[a]), point(set[b]), sigma);
            kss[(a, b)] = v;
            kss[(b, a)] = v;
        }
    }
    let xc = point(center);
    let ksi = DVector::from_iterator(m, set.iter().map(|&s| gaussian_kernel(point(s), xc, sigma)));
    (kss, ksi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> PointCloud {
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(gaussian_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.7), 1.0);
        let s: f64 = 0.8;
        let v = gaussian_kernel(&[0.0], &[s * 2f64.sqrt()], s);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((gaussian_kernel(&[0.0, 0.0], &[0.6, 0.8], 1.0) - 0.6065306597126334).abs() < 1e-15);
    }

    #[test]
    fn collinear_knn() {
        let knn = knn_graph(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(knn.neighbors(0), &[1]);
        assert_eq!(knn.neighbors(1), &[0]);
        assert_eq!(knn.neighbors(2), &[1]);
    }

    #[test]
    fn full_neighborhood() {
        let knn = knn_graph(&line(&[0.0, 5.0, 1.0, 2.0]), 3).unwrap();
        for i in 0..4 {
            let mut ids = knn.neighbors(i).to_vec();
            ids.sort();
            let expect: Vec<usize> = (0..4).filter(|&j| j != i).collect();
            assert_eq!(ids, expect);
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        // Node 0 at the origin; nodes 2 and 7 both at distance 1.
        let mut xs = vec![0.0, 9.0, 1.0, 8.5, 7.0, 6.0, 5.0, -1.0];
        xs[0] = 0.0;
        let knn = knn_graph(&line(&xs), 1).unwrap();
        assert_eq!(knn.neighbors(0), &[2]);
        let knn = knn_graph(&line(&xs), 2).unwrap();
        assert_eq!(knn.neighbors(0), &[2, 7]);
    }

    #[test]
    fn invalid_k() {
        assert!(matches!(knn_graph(&line(&[0.0, 1.0]), 2), Err(Error::InvalidK { .. })));
        assert!(matches!(knn_graph(&line(&[0.0, 1.0]), 0), Err(Error::InvalidK { .. })));
    }

    #[test]
    fn sigma_from_collinear_points() {
        // First-neighbor distances by enumeration: 0 -> 1, 1 -> 1, 3 -> 2.
        let knn = knn_graph(&line(&[0.0, 1.0, 3.0]), 2).unwrap();
        assert_eq!(estimate_sigma(&knn, 1).unwrap(), 1.0);
    }

    #[test]
    fn sigma_on_grid_is_spacing() {
        let h = 0.25;
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * h).collect();
        let knn = knn_graph(&line(&xs), 4).unwrap();
        assert_eq!(estimate_sigma(&knn, 1).unwrap(), h);
    }

    #[test]
    fn sigma_degenerate() {
        let knn = knn_graph(&line(&[2.0; 5]), 2).unwrap();
        assert!(matches!(estimate_sigma(&knn, 1), Err(Error::DegenerateBandwidth)));
    }

    #[test]
    fn sigma_rule_parsing() {
        assert_eq!("fixed:0.5".parse::<SigmaRule>().unwrap(), SigmaRule::Fixed { sigma: 0.5 });
        assert_eq!("knn-median:7".parse::<SigmaRule>().unwrap(), SigmaRule::KnnMedian { rank: 7 });
        assert!("fixed:-1".parse::<SigmaRule>().is_err());
        assert!("knn-median:0".parse::<SigmaRule>().is_err());
        assert!("median".parse::<SigmaRule>().is_err());
        assert_eq!(SigmaRule::default_for_k(30), SigmaRule::KnnMedian { rank: 15 });
        assert_eq!(SigmaRule::default_for_k(15), SigmaRule::KnnMedian { rank: 8 });
    }

    #[test]
    fn submatrices_single_neighbor() {
        let c = line(&[0.0, 1.0]);
        let (kss, ksi) = kernel_submatrices(&c, 0, &[1], 1.0);
        assert_eq!(kss.as_slice(), &[1.0]);
        assert!((ksi[0] - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn submatrices_two_neighbors_on_a_line() {
        // i at 0, a at 1, b at 2; entries straight from the kernel formula.
        let c = line(&[0.0, 1.0, 2.0]);
        let (kss, ksi) = kernel_submatrices(&c, 0, &[1, 2], 1.0);
        let e = (-0.5f64).exp();
        assert_eq!(kss[(0, 0)], 1.0);
        assert!((kss[(0, 1)] - e).abs() < 1e-15 && (kss[(1, 0)] - e).abs() < 1e-15);
        assert!((ksi[0] - e).abs() < 1e-15);
        assert!((ksi[1] - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn coincident_neighbors_give_unit_off_diagonal() {
        let c = line(&[0.0, 1.0, 1.0]);
        let (kss, _) = kernel_submatrices(&c, 0, &[1, 2], 0.3);
        assert_eq!(kss[(0, 1)], 1.0);
    }

    #[test]
    fn edge_csv_format() {
        let knn = knn_graph(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        let csv = knn.to_edge_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "src,dst,rank,distance");
        assert!(lines[3].starts_with("2,1,1,2.0"));
    }

    fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
        (2usize..4).prop_flat_map(|d| {
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), 6..20)
                .prop_map(|rows| PointCloud::from_rows(&rows).unwrap())
        })
    }

    proptest! {
        #[test]
        fn kernel_symmetric_in_unit_interval(a in prop::collection::vec(-10.0f64..10.0, 3), b in prop::collection::vec(-10.0f64..10.0, 3), s in 0.1f64..5.0) {
            let k = gaussian_kernel(&a, &b, s);
            prop_assert_eq!(k, gaussian_kernel(&b, &a, s));
            prop_assert!(k > 0.0 || sq_dist(&a, &b) / (2.0 * s * s) > 700.0);
            prop_assert!(k <= 1.0);
        }

        #[test]
        fn kernel_submatrix_is_psd(cloud in cloud_strategy(), s in 0.2f64..3.0) {
            let set: Vec<usize> = (1..cloud.len()).collect();
            let (kss, _) = kernel_submatrices(&cloud, 0, &set, s);
            let eig = kss.symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&l| l >= -1e-10), "{eig:?}");
        }

        #[test]
        fn knn_permutation_equivariant(cloud in cloud_strategy(), seed in 0u64..1000) {
            let n = cloud.len();
            let mut perm: Vec<usize> = (0..n).collect();
            // Deterministic shuffle from the seed.
            for i in (1..n).rev() {
                let j = ((seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407))) >> 33) as usize % (i + 1);
                perm.swap(i, j);
            }
            let k = 3;
            let a = knn_graph(&cloud, k).unwrap();
            let b = knn_graph(&cloud.permuted(&perm), k).unwrap();
            // Random real coordinates have no distance ties, so neighbor sets map exactly.
            for new_i in 0..n {
                let old_i = perm[new_i];
                let mapped: Vec<usize> = b.neighbors(new_i).iter().map(|&j| perm[j]).collect();
                prop_assert_eq!(mapped, a.neighbors(old_i).to_vec());
            }
        }

        #[test]
        fn sigma_scales_linearly(cloud in cloud_strategy(), e in -3i32..4) {
            let c = 2f64.powi(e);
            let k = 3;
            let s0 = estimate_sigma(&knn_graph(&cloud, k).unwrap(), 2);
            let s1 = estimate_sigma(&knn_graph(&cloud.scaled(c), k).unwrap(), 2);
            if let (Ok(s0), Ok(s1)) = (s0, s1) {
                prop_assert_eq!(s1, c * s0);
            }
        }
    }
}
