use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::rng::{component_rng, stream};

/// Manifold families with known intrinsic dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Uniform sample of the unit cube [0,1]^d.
    Flat,
    /// Surface of the unit (d+1)-cube: a piecewise-flat d-manifold with creases.
    Hypercube,
    /// Unit d-sphere in R^(d+1).
    Sphere,
    /// (t cos t, h, t sin t) for t in [1.5π, 4.5π], h in [0, 21].
    SwissRoll,
    /// (cos t, sin t, t) for t in [0, 4π].
    Helix,
    /// Unit d-cube where the half with first coordinate < 1/2 is five times denser.
    TwoDensityFlat,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Flat => "flat",
            Family::Hypercube => "hypercube",
            Family::Sphere => "sphere",
            Family::SwissRoll => "swiss-roll",
            Family::Helix => "helix",
            Family::TwoDensityFlat => "two-density-flat",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "flat" => Family::Flat,
            "hypercube" => Family::Hypercube,
            "sphere" => Family::Sphere,
            "swiss-roll" => Family::SwissRoll,
            "helix" => Family::Helix,
            "two-density-flat" => Family::TwoDensityFlat,
            other => return Err(Error::InvalidSpec(format!("unknown family '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Embedding {
    /// Natural coordinates padded with zeros.
    LinearIsometric,
    /// Padded coordinates multiplied by a seeded random orthogonal matrix.
    RandomRotation,
}

impl std::str::FromStr for Embedding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-isometric" => Ok(Embedding::LinearIsometric),
            "random-rotation" => Ok(Embedding::RandomRotation),
            other => Err(Error::InvalidSpec(format!("unknown embedding '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub family: Family,
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub embed: Embedding,
    pub rng_seed: u64,
}

const SWISS_T_MIN: f64 = 1.5 * PI;
const SWISS_T_MAX: f64 = 4.5 * PI;
const SWISS_HEIGHT: f64 = 21.0;
const HELIX_T_MAX: f64 = 4.0 * PI;
const DENSE_FRACTION: f64 = 5.0 / 6.0;

impl ManifoldSpec {
    pub fn new(family: Family, intrinsic_dim: usize, ambient_dim: usize, n_points: usize, rng_seed: u64) -> Self {
        Self {
            family,
            intrinsic_dim,
            ambient_dim,
            n_points,
            noise_sigma: 0.0,
            embed: Embedding::LinearIsometric,
            rng_seed,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_embedding(mut self, embed: Embedding) -> Self {
        self.embed = embed;
        self
    }

    /// Number of coordinates of the natural (unpadded) parametrization.
    pub fn natural_dim(&self) -> usize {
        match self.family {
            Family::Flat | Family::TwoDensityFlat => self.intrinsic_dim,
            Family::Hypercube | Family::Sphere => self.intrinsic_dim + 1,
            Family::SwissRoll | Family::Helix => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        let (d, amb) = (self.intrinsic_dim, self.ambient_dim);
        if self.n_points == 0 {
            return bad("n_points must be positive".into());
        }
        if d == 0 {
            return bad("intrinsic_dim must be positive".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be finite and nonnegative, got {}", self.noise_sigma));
        }
        match self.family {
            Family::SwissRoll if d != 2 => return bad("swiss-roll has intrinsic_dim 2".into()),
            Family::Helix if d != 1 => return bad("helix has intrinsic_dim 1".into()),
            _ => {}
        }
        if amb < self.natural_dim() {
            return bad(format!(
                "{} with intrinsic_dim {d} needs ambient_dim >= {}, got {amb}",
                self.family.name(),
                self.natural_dim()
            ));
        }
        Ok(())
    }
}

/// Samples the manifold described by `spec`.
pub fn generate(spec: &ManifoldSpec) -> Result<PointCloud> {
    spec.validate()?;
    let n = spec.n_points;
    let d = spec.intrinsic_dim;
    let amb = spec.ambient_dim;
    let nat = spec.natural_dim();

    let mut rng = component_rng(spec.rng_seed, stream::SAMPLE);
    let mut coords = vec![0.0; n * amb];
    for row in coords.chunks_exact_mut(amb) {
        let x = &mut row[..nat];
        match spec.family {
            Family::Flat => x.iter_mut().for_each(|v| *v = rng.random()),
            Family::TwoDensityFlat => {
                x.iter_mut().for_each(|v| *v = rng.random());
                x[0] = if rng.random::<f64>() < DENSE_FRACTION {
                    0.5 * x[0]
                } else {
                    0.5 + 0.5 * x[0]
                };
            }
            Family::Hypercube => {
                // All 2(d+1) faces have unit area: pick one uniformly, then a point on it.
                x.iter_mut().for_each(|v| *v = rng.random());
                let face = rng.random_range(0..2 * nat);
                x[face / 2] = (face % 2) as f64;
            }
            Family::Sphere => loop {
                x.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    x.iter_mut().for_each(|v| *v /= norm);
                    break;
                }
            },
            Family::SwissRoll => {
                let t = SWISS_T_MIN + (SWISS_T_MAX - SWISS_T_MIN) * rng.random::<f64>();
                let h = SWISS_HEIGHT * rng.random::<f64>();
                x.copy_from_slice(&[t * t.cos(), h, t * t.sin()]);
            }
            Family::Helix => {
                let t = HELIX_T_MAX * rng.random::<f64>();
                x.copy_from_slice(&[t.cos(), t.sin(), t]);
            }
        }
    }

    if spec.embed == Embedding::RandomRotation {
        let q = random_orthogonal(amb, spec.rng_seed);
        let mut rotated = vec![0.0; amb];
        for row in coords.chunks_exact_mut(amb) {
            for (r, out) in rotated.iter_mut().enumerate() {
                *out = (0..nat).map(|c| q[(r, c)] * row[c]).sum();
            }
            row.copy_from_slice(&rotated);
        }
    }

    if spec.noise_sigma > 0.0 {
        let mut rng = component_rng(spec.rng_seed, stream::NOISE);
        for v in coords.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += spec.noise_sigma * z;
        }
    }

    let provenance = format!(
        "{} d={d} D={amb} n={n} noise={} embed={:?} seed={}",
        spec.family.name(),
        spec.noise_sigma,
        spec.embed,
        spec.rng_seed
    );
    PointCloud::from_flat(amb, coords, provenance)
}

/// Orthogonal matrix from the QR factorization of a seeded Gaussian matrix,
/// with column signs fixed so that R has a positive diagonal.
pub(crate) fn random_orthogonal(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = component_rng(seed, stream::ROTATION);
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..dim {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}
