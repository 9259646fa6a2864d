use std::path::{Path, PathBuf};

use clap::Args;
use mfscope::datasets::{Embedding, Family, Format, ManifoldSpec};
use mfscope::kernelgraph::{GraphConfig, SigmaRule, DEFAULT_K};
use mfscope::localgeom::{Centering, GeomConfig, GraphKind, DEFAULT_EIGEN_RATIO};
use mfscope::multiscale::{MergeConfig, MergePolicy, MetricSelection, DEFAULT_RANDOM_PAIRS};
use mfscope::Error;
use serde::{Deserialize, Serialize};

/// Flags shared by every subcommand. Unset flags fall back to `--config`,
/// then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with any of the settings below; flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Input point file
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Output point file (generate)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Point file format: csv or bin (default: from the file extension)
    #[arg(long)]
    pub format: Option<String>,
    /// Skip one header line when reading CSV input
    #[arg(long)]
    pub header: bool,

    /// Synthetic manifold family, used when no --in is given
    #[arg(long)]
    pub family: Option<String>,
    /// Intrinsic dimension
    #[arg(long)]
    pub d: Option<usize>,
    /// Ambient dimension
    #[arg(long)]
    pub ambient: Option<usize>,
    /// Number of points
    #[arg(long)]
    pub n: Option<usize>,
    /// Standard deviation of additive Gaussian noise
    #[arg(long)]
    pub noise: Option<f64>,
    /// linear-isometric or random-rotation
    #[arg(long)]
    pub embed: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// Initial neighborhood size
    #[arg(long)]
    pub k: Option<usize>,
    /// fixed:<v> or knn-median:<rank>
    #[arg(long)]
    pub sigma: Option<String>,
    /// Neighborhoods used by id: knn or nnk
    #[arg(long)]
    pub graph: Option<String>,
    /// Similarity that picks the pair to merge: knn or nnk
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub scales: Option<usize>,
    /// Merges per scale
    #[arg(long)]
    pub steps: Option<usize>,
    /// Eigenvalue ratio for counting significant components
    #[arg(long)]
    pub eigen_ratio: Option<f64>,
    /// Center local PCA on the neighborhood mean instead of the node
    #[arg(long)]
    pub mean_centering: bool,
    /// Leave the center node out of polytope diameters
    #[arg(long)]
    pub exclude_center: bool,
    /// Number of random node pairs for angle distributions
    #[arg(long)]
    pub random_pairs: Option<usize>,
}

/// Fully resolved settings of one run, echoed into `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub format: Option<Format>,
    pub header: bool,
    pub family: Option<Family>,
    pub d: usize,
    pub ambient: Option<usize>,
    pub n: usize,
    pub noise: f64,
    pub embed: Embedding,
    pub seed: u64,
    pub k: usize,
    pub sigma: Option<String>,
    pub graph: GraphKind,
    pub policy: MergePolicy,
    pub scales: usize,
    pub steps: usize,
    pub eigen_ratio: f64,
    pub centering: Centering,
    pub include_center: bool,
    pub random_pairs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            out: None,
            out_dir: PathBuf::from("."),
            format: None,
            header: false,
            family: None,
            d: 2,
            ambient: None,
            n: 1000,
            noise: 0.0,
            embed: Embedding::LinearIsometric,
            seed: 0,
            k: DEFAULT_K,
            sigma: None,
            graph: GraphKind::Nnk,
            policy: MergePolicy::Nnk,
            scales: 10,
            steps: 100,
            eigen_ratio: DEFAULT_EIGEN_RATIO,
            centering: Centering::Query,
            include_center: true,
            random_pairs: DEFAULT_RANDOM_PAIRS,
        }
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(v: Option<String>) -> Result<Option<T>, Error> {
    v.map(|s| s.parse()).transpose()
}

impl RunConfig {
    /// Reads `--config` if given, then overlays the flags.
    pub fn resolve(args: RunArgs) -> Result<Self, Error> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("bad config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = args.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(d, n, noise, seed, k, scales, steps, eigen_ratio, random_pairs, out_dir);
        if args.input.is_some() {
            cfg.input = args.input;
        }
        if args.out.is_some() {
            cfg.out = args.out;
        }
        if args.ambient.is_some() {
            cfg.ambient = args.ambient;
        }
        if args.sigma.is_some() {
            cfg.sigma = args.sigma;
        }
        if let Some(f) = parse(args.format)? {
            cfg.format = Some(f);
        }
        if let Some(f) = parse(args.family)? {
            cfg.family = Some(f);
        }
        if let Some(e) = parse(args.embed)? {
            cfg.embed = e;
        }
        if let Some(g) = parse(args.graph)? {
            cfg.graph = g;
        }
        if let Some(p) = parse(args.policy)? {
            cfg.policy = p;
        }
        cfg.header |= args.header;
        if args.mean_centering {
            cfg.centering = Centering::Mean;
        }
        if args.exclude_center {
            cfg.include_center = false;
        }
        // Materialize defaults so the manifest shows what ran.
        if cfg.ambient.is_none() {
            cfg.ambient = cfg.manifold_spec().map(|s| s.ambient_dim);
        }
        let rule = self::sigma_rule(&cfg)?;
        cfg.sigma = Some(rule.to_string());
        Ok(cfg)
    }

    pub fn graph_config(&self) -> Result<GraphConfig, Error> {
        Ok(GraphConfig {
            k: self.k,
            sigma: sigma_rule(self)?,
        })
    }

    pub fn geom_config(&self) -> GeomConfig {
        GeomConfig {
            eigen_ratio: self.eigen_ratio,
            centering: self.centering,
            diameter_includes_center: self.include_center,
        }
    }

    pub fn merge_config(&self) -> Result<MergeConfig, Error> {
        Ok(MergeConfig {
            similarity: self.policy,
            steps_per_scale: self.steps,
            n_scales: self.scales,
            graph: self.graph_config()?,
            geom: self.geom_config(),
            metrics: MetricSelection::default(),
            n_random_pairs: self.random_pairs,
            seed: self.seed,
        })
    }

    /// Generator settings, if a family was given.
    pub fn manifold_spec(&self) -> Option<ManifoldSpec> {
        let family = self.family?;
        let mut spec = ManifoldSpec::new(family, self.d, self.d, self.n, self.seed)
            .with_noise(self.noise)
            .with_embedding(self.embed);
        spec.ambient_dim = self.ambient.unwrap_or_else(|| spec.natural_dim());
        Some(spec)
    }

    pub fn format_for(&self, path: &Path) -> Format {
        self.format.unwrap_or_else(|| Format::from_path(path))
    }
}

fn sigma_rule(cfg: &RunConfig) -> Result<SigmaRule, Error> {
    match &cfg.sigma {
        Some(s) => s.parse(),
        None => Ok(SigmaRule::default_for_k(cfg.k)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"k": 12, "policy": "knn", "steps": 7}"#).unwrap();
        let args = RunArgs {
            config: Some(path),
            k: Some(20),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(args).unwrap();
        assert_eq!(cfg.k, 20);
        assert_eq!(cfg.steps, 7);
        assert_eq!(cfg.policy, MergePolicy::Knn);
        assert_eq!(cfg.sigma.as_deref(), Some("knn-median:10"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"kay": 12}"#).unwrap();
        let args = RunArgs {
            config: Some(path),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(args), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn manifest_round_trips() {
        let cfg = RunConfig::resolve(RunArgs::default()).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), cfg);
    }
}
