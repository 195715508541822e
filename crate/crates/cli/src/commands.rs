use std::path::{Path, PathBuf};

use disctree::eval::{convergence_slope, draw_samples, hellinger_sweep, rect_error_sweep, ExperimentConfig, SweepReport};
use disctree::{
    build_level_set_tree, detect_modes, estimate_density, EstimatorConfig, MixtureSpec, PartitionDoc, PartitionTree,
    ReferenceFunction, RunReport,
};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::ingest::ingest_csv;
use crate::{DataArgs, EvalArgs, Experiment, Mixture, SampleArgs};

/// Any JSON body with the run seed in front.
#[derive(Serialize)]
struct Seeded<T: Serialize> {
    seed: u64,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    config: &'a EstimatorConfig,
    samples: usize,
    sweeps: usize,
    leaves: usize,
    decisions: &'a [disctree::estimator::DecisionRecord],
    decisions_omitted: usize,
}

#[derive(Serialize)]
struct ModeDoc {
    cell: usize,
    density: f64,
    mass: f64,
    center: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

struct Loaded {
    tree: PartitionTree,
    report: Option<RunReport>,
    metadata: serde_json::Value,
    seed: u64,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output documents always serialize");
    text.push('\n');
    text
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn load(args: &DataArgs) -> CliResult<Loaded> {
    if let Some(path) = &args.partition {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let doc = PartitionDoc::from_json(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let tree = doc.to_tree()?;
        let metadata = doc.metadata.unwrap_or_else(|| json!({}));
        let seed = metadata.get("seed").and_then(serde_json::Value::as_u64).unwrap_or(args.estimator.seed);
        return Ok(Loaded { tree, report: None, metadata, seed });
    }
    let input = args.input.as_ref().ok_or_else(|| CliError::input("--input or --partition is required"))?;
    let cfg = args.estimator.config()?;
    let data = ingest_csv(input, args.rescale)?;
    log::info!("read {} points in {} dimensions", data.samples.len(), data.samples.dim());
    let est = estimate_density(&data.samples, &cfg)?;
    est.tree.validate(1e-12)?;
    log::info!("{} leaves after {} sweeps", est.report.leaves, est.report.sweeps);
    let metadata = json!({
        "seed": cfg.seed,
        "input": input.display().to_string(),
        "samples": data.samples.len(),
        "header": data.header,
        "rescale": data.rescale,
        "config": cfg,
    });
    Ok(Loaded { tree: est.tree, report: Some(est.report), metadata, seed: cfg.seed })
}

pub fn estimate(args: &DataArgs) -> CliResult<()> {
    let loaded = load(args)?;
    let mut doc = PartitionDoc::from_tree(&loaded.tree);
    doc.metadata = Some(loaded.metadata);
    write(&args.out, "partition.json", &doc.to_json())?;
    if let Some(report) = &loaded.report {
        let keep = args.max_leaves_report.unwrap_or(usize::MAX).min(report.decisions.len());
        let body = ReportDoc {
            config: &report.config,
            samples: report.samples,
            sweeps: report.sweeps,
            leaves: report.leaves,
            decisions: &report.decisions[..keep],
            decisions_omitted: report.decisions.len() - keep,
        };
        write(&args.out, "report.json", &to_json(&Seeded { seed: loaded.seed, body }))?;
    }
    Ok(())
}

pub fn modes(args: &DataArgs) -> CliResult<()> {
    let loaded = load(args)?;
    let pd = loaded.tree.to_density();
    let modes: Vec<ModeDoc> = detect_modes(&pd)
        .into_iter()
        .map(|i| {
            let c = &pd.cells()[i];
            ModeDoc {
                cell: i,
                density: c.density,
                mass: c.mass,
                center: c.rect.center(),
                lower: c.rect.lower().to_vec(),
                upper: c.rect.upper().to_vec(),
            }
        })
        .collect();
    log::info!("{} modes among {} cells", modes.len(), pd.len());
    let body = json!({ "cells": pd.len(), "modes": modes });
    write(&args.out, "modes.json", &to_json(&Seeded { seed: loaded.seed, body }))?;
    Ok(())
}

pub fn tree(args: &DataArgs) -> CliResult<()> {
    let loaded = load(args)?;
    let lst = build_level_set_tree(&loaded.tree.to_density());
    let dot = format!("// seed: {}\n{}", loaded.seed, lst.to_dot());
    write(&args.out, "levelset.dot", &dot)?;
    write(&args.out, "levelset.json", &to_json(&Seeded { seed: loaded.seed, body: lst.to_doc() }))?;
    Ok(())
}

fn mixture(kind: Mixture, dim: usize) -> CliResult<MixtureSpec> {
    let need = |want: usize| {
        if dim == want {
            Ok(())
        } else {
            Err(CliError::input(format!("mixture {kind:?} is defined in {want} dimensions, got --dim {dim}")))
        }
    };
    if dim == 0 {
        return Err(CliError::input("--dim must be positive"));
    }
    Ok(match kind {
        Mixture::FourCorners if dim < 2 => return Err(CliError::input("four-corners needs --dim of at least 2")),
        Mixture::FourCorners => MixtureSpec::four_corners(dim),
        Mixture::BetaBimodal => MixtureSpec::beta_bimodal(dim),
        Mixture::Uniform => MixtureSpec::uniform(dim),
        Mixture::TiltedGaussian => need(2).map(|_| MixtureSpec::tilted_gaussian())?,
        Mixture::TwinGaussians => need(2).map(|_| MixtureSpec::twin_gaussians())?,
        Mixture::BetaTriple => need(2).map(|_| MixtureSpec::beta_triple())?,
    })
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let estimator = args.estimator.config()?;
    let kind = args.mixture.unwrap_or(match args.experiment {
        Experiment::Slope => Mixture::BetaBimodal,
        _ => Mixture::FourCorners,
    });
    let spec = mixture(kind, args.dim)?;
    let cfg = ExperimentConfig {
        sizes: args.sizes.clone(),
        replicas: args.replicas,
        seed: estimator.seed,
        estimator,
        ..ExperimentConfig::default()
    };
    let report: SweepReport = match args.experiment {
        Experiment::Slope => convergence_slope(&spec, &ReferenceFunction::LinearSum, &cfg),
        Experiment::Hellinger => hellinger_sweep(&spec, &cfg),
        Experiment::Rect => rect_error_sweep(&spec, &cfg),
    }?;
    if let Some(fit) = report.fit {
        log::info!("log-log slope {:.3}", fit.slope);
    } else {
        log::warn!("slope undefined: some mean error is zero");
    }
    write(&args.out, "results.csv", &format!("# seed={}\n{}", cfg.seed, report.to_csv()))?;
    let mut summary = report.summary_json();
    summary.push('\n');
    write(&args.out, "summary.json", &summary)?;
    Ok(())
}

pub fn sample(args: &SampleArgs) -> CliResult<()> {
    let spec = mixture(args.mixture, args.dim)?;
    if args.count == 0 {
        return Err(CliError::input("--count must be positive"));
    }
    let points = draw_samples(&spec, args.count, args.seed, disctree::Parallelism::default())?;
    let mut text = format!("# seed={}\n", args.seed);
    let header: Vec<String> = (1..=points.dim()).map(|j| format!("x{j}")).collect();
    text.push_str(&header.join(","));
    text.push('\n');
    for p in points.iter() {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write(&args.out, "samples.csv", &text)?;
    Ok(())
}
