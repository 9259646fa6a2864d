use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mfscope::datasets::{generate, load_points, save_points, Format, PointCloud};
use mfscope::kernelgraph::knn_graph;
use mfscope::localgeom::{
    angle_distributions, nnk_diameters, node_values_csv, DiameterStats, GeometryReport, GraphKind, Graphs,
    IdEstimate,
};
use mfscope::multiscale::{diameter_shift, run_multiscale};
use mfscope::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out_dir).map_err(|source| Error::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;
    Ok(cfg.out_dir.clone())
}

pub fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let manifest = json!({
        "tool": "mfscope",
        "version": mfscope::VERSION,
        "command": command,
        "config": cfg,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

/// Loads `--in`, or generates the configured manifold when no input is given.
fn input_cloud(cfg: &RunConfig) -> Result<PointCloud> {
    if let Some(path) = &cfg.input {
        return load_points(path, cfg.format_for(path), cfg.header).map_err(|e| match e {
            // An unreadable input file is the caller's mistake, not ours.
            Error::Io { path, source } => {
                Error::InvalidConfig(format!("cannot read {}: {source}", path.display())).into()
            }
            other => other.into(),
        });
    }
    let spec = cfg
        .manifold_spec()
        .ok_or_else(|| Error::InvalidConfig("give --in or a generator --family".into()))?;
    Ok(generate(&spec)?)
}

pub fn generate_cmd(cfg: &RunConfig) -> Result<()> {
    let spec = cfg
        .manifold_spec()
        .ok_or_else(|| Error::InvalidConfig("generate needs --family".into()))?;
    let cloud = generate(&spec)?;
    let (path, dir) = match &cfg.out {
        Some(out) => {
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            fs::create_dir_all(&dir).map_err(|source| Error::Io {
                path: dir.clone(),
                source,
            })?;
            (out.clone(), dir)
        }
        None => {
            let dir = out_dir(cfg)?;
            let ext = match cfg.format.unwrap_or(Format::Csv) {
                Format::Csv => "csv",
                Format::Binary => "bin",
            };
            (dir.join(format!("points.{ext}")), dir)
        }
    };
    save_points(&cloud, &path, cfg.format_for(&path))?;
    write_manifest(&dir, "generate", cfg)?;
    println!("{}", path.display());
    Ok(())
}

pub fn graph_cmd(cfg: &RunConfig) -> Result<()> {
    let cloud = input_cloud(cfg)?;
    let dir = out_dir(cfg)?;
    let graph_cfg = cfg.graph_config()?;
    match cfg.graph {
        GraphKind::Knn => {
            let knn = knn_graph(&cloud, graph_cfg.k)?;
            write(&dir.join("knn_edges.csv"), knn.to_edge_csv())?;
            let summary = json!({
                "n_nodes": knn.n_nodes(),
                "K": knn.k(),
                "n_edges": knn.n_nodes() * knn.k(),
                "sigma": graph_cfg.sigma.resolve(&knn).ok(),
            });
            write_json(&dir.join("knn_summary.json"), &summary)?;
        }
        GraphKind::Nnk => {
            let graphs = Graphs::build(&cloud, &graph_cfg)?;
            write(&dir.join("nnk_edges.csv"), graphs.nnk.to_edge_csv())?;
            write_json(&dir.join("nnk_summary.json"), &graphs.nnk.summary())?;
        }
    }
    write_manifest(&dir, "graph", cfg)
}

pub fn id_cmd(cfg: &RunConfig) -> Result<()> {
    let cloud = input_cloud(cfg)?;
    let dir = out_dir(cfg)?;
    let geom = cfg.geom_config();
    geom.validate()?;
    let graph_cfg = cfg.graph_config()?;
    let bases = match cfg.graph {
        GraphKind::Knn => {
            let knn = knn_graph(&cloud, graph_cfg.k)?;
            mfscope::localgeom::node_subspaces(&cloud, |i| knn.neighbors(i), &geom)
        }
        GraphKind::Nnk => Graphs::build(&cloud, &graph_cfg)?.subspaces(&cloud, GraphKind::Nnk, &geom),
    };
    let est = IdEstimate::from_bases(&bases)?;
    if let Some(w) = &est.warning {
        eprintln!("warning: {w}");
    }
    let per_node = dir.join("id_per_node.csv");
    write(&per_node, node_values_csv(&est.per_node))?;
    let report = json!({
        "graph": cfg.graph,
        "mean_id": est.mean_id,
        "median_id": est.median_id,
        "n_nodes": est.n_nodes,
        "n_degenerate": est.n_degenerate,
        "id_histogram": est.id_histogram,
        "warning": est.warning,
        "per_node_csv": per_node,
    });
    write_json(&dir.join("id_report.json"), &report)?;
    let summary = GeometryReport {
        mean_id: Some(est.mean_id),
        median_id: Some(est.median_id),
        id_histogram: Some(est.id_histogram.clone()),
        ..Default::default()
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_manifest(&dir, "id", cfg)
}

pub fn diameters_cmd(cfg: &RunConfig) -> Result<()> {
    let cloud = input_cloud(cfg)?;
    let dir = out_dir(cfg)?;
    let graphs = Graphs::build(&cloud, &cfg.graph_config()?)?;
    let per_node = nnk_diameters(&cloud, &graphs.nnk, cfg.include_center);
    write(&dir.join("diameters.csv"), node_values_csv(&per_node))?;
    let stats = DiameterStats::from_per_node(per_node);
    if stats.n_defined < stats.n_nodes {
        eprintln!("warning: {} nodes have an empty NNK support", stats.n_nodes - stats.n_defined);
    }
    write_json(&dir.join("diameter_summary.json"), &stats)?;
    let summary = GeometryReport {
        diameter_quantiles: Some(stats.quantiles.clone()),
        ..Default::default()
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_manifest(&dir, "diameters", cfg)
}

pub fn angles_cmd(cfg: &RunConfig) -> Result<()> {
    let cloud = input_cloud(cfg)?;
    let dir = out_dir(cfg)?;
    let geom = cfg.geom_config();
    geom.validate()?;
    let graphs = Graphs::build(&cloud, &cfg.graph_config()?)?;
    let bases = graphs.subspaces(&cloud, GraphKind::Nnk, &geom);
    let dist = angle_distributions(&graphs.nnk, &bases, cfg.random_pairs, cfg.seed)?;
    if dist.no_adjacent_pairs {
        eprintln!("warning: no adjacent pairs with a local subspace");
    }
    write(&dir.join("angles.csv"), dist.to_csv())?;
    let summary = dist.summary();
    write_json(&dir.join("angle_summary.json"), &summary)?;
    let report = GeometryReport {
        ks_adjacent_vs_random: summary.ks_adjacent_vs_random,
        ..Default::default()
    };
    write_json(&dir.join("summary.json"), &report)?;
    write_manifest(&dir, "angles", cfg)
}

pub fn multiscale_cmd(cfg: &RunConfig) -> Result<()> {
    let cloud = input_cloud(cfg)?;
    let dir = out_dir(cfg)?;
    let trace = run_multiscale(&cloud, &cfg.merge_config()?)?;
    write_json(&dir.join("scale_trace.json"), &trace)?;
    write(&dir.join("merged_pairs.csv"), trace.merged_pairs_csv())?;
    for r in &trace.records {
        if !r.missing.is_empty() {
            eprintln!("warning: scale {} is missing {}", r.scale, r.missing.join(", "));
        }
        if let Some(d) = &r.diameter_summary {
            write(&dir.join(format!("diameters_scale_{:03}.csv", r.scale)), node_values_csv(&d.per_node))?;
        }
    }
    let shift = diameter_shift(&trace)
        .map_err(|e| eprintln!("warning: diameter shift unavailable: {e}"))
        .ok();
    let last = trace.last().context("empty scale trace")?;
    let summary = json!({
        "policy": cfg.policy,
        "n_scales": cfg.scales,
        "steps_per_scale": cfg.steps,
        "initial_n_points": cloud.len(),
        "final_n_points": last.n_points,
        "final_mean_id_knn": last.mean_id_knn,
        "final_mean_id_nnk": last.mean_id_nnk,
        "diameter_shift": shift,
    });
    write_json(&dir.join("multiscale_summary.json"), &summary)?;
    write_manifest(&dir, "multiscale", cfg)
}
