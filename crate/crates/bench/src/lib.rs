//! Shared fixtures for the criterion benches.

use mfscope::{generate, Family, ManifoldSpec, PointCloud};

/// Uniform 2-flat in R^5.
pub fn flat_cloud(n: usize) -> PointCloud {
    generate(&ManifoldSpec::new(Family::Flat, 2, 5, n, 11)).expect("valid flat spec")
}

/// Swiss roll in R^3.
pub fn swiss_roll(n: usize) -> PointCloud {
    generate(&ManifoldSpec::new(Family::SwissRoll, 2, 3, n, 11)).expect("valid swiss-roll spec")
}
