//! `prunelab`: train, visualize, prune, retrain and compare from the
//! command line.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O or data
//! error, 4 numeric failure (divergence, non-finite values).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prunelab::am::{activation_maximize_many, export_grid_ppm, export_pattern_ppm};
use prunelab::data::Dataset;
use prunelab::harness::{
    self, evaluate_full, retrain_with_snapshots, write_metrics_csv, Analyzer, ExperimentConfig, LayerSelection,
    MetricsRecord, RecordKind,
};
use prunelab::model::{load_checkpoint, save_checkpoint};
use prunelab::prune::{apply_prune, PruneMethod, ReportWriter};
use prunelab::{Error, Model32, Result};

#[derive(Parser)]
#[command(name = "prunelab", version, about = "Filter pruning lab for small CNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// cifar10, mnist or shapes.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a baseline model.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        architecture: Option<String>,
    },
    /// Activation-maximization patterns for filters of one conv layer.
    Visualize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        layer: usize,
        /// `all` or a comma-separated list of filter indices.
        #[arg(long, default_value = "all")]
        filters: String,
        #[arg(long)]
        columns: Option<usize>,
    },
    /// Prune one layer (or all conv layers) and report accuracy before and after.
    Prune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// l1 or functional.
        #[arg(long)]
        method: Option<String>,
        /// Conv layer id, `last` or `all`.
        #[arg(long)]
        layer: Option<String>,
        #[arg(long)]
        ratio: f64,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Retrain a (pruned) model, taking periodic snapshots.
    Retrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        interval: Option<u64>,
    },
    /// Both methods over several ratios: prune, retrain, drift.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        baseline: PathBuf,
        /// Comma-separated ratios.
        #[arg(long)]
        ratios: Option<String>,
        /// Comma-separated methods.
        #[arg(long)]
        methods: Option<String>,
        /// Conv layer ids, `last` or `all`.
        #[arg(long)]
        layers: Option<String>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite { .. } | Error::Diverged { .. } => 4,
        Error::Io { .. }
        | Error::Data { .. }
        | Error::BadMagic { .. }
        | Error::VersionMismatch { .. }
        | Error::Truncated { .. }
        | Error::SizeDisagreement { .. }
        | Error::Header(_)
        | Error::LabelOutOfRange { .. }
        | Error::DataLength { .. } => 3,
        _ => 2,
    }
}

/// Defaults, then the config file, then `--set`, then dedicated flags.
fn resolve(common: &Common, flags: &[(&str, Option<String>)]) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k, v)?;
    }
    let mut all: Vec<(&str, Option<String>)> = vec![
        ("data_dir", common.data_dir.as_ref().map(|p| p.display().to_string())),
        ("dataset", common.dataset.clone()),
        ("seed", common.seed.map(|s| s.to_string())),
        ("out_dir", common.out.as_ref().map(|p| p.display().to_string())),
    ];
    all.extend(flags.iter().cloned());
    for (k, v) in all {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let out = cfg.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    write_text(&out.join("config.txt"), &cfg.to_text())?;
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_data(cfg: &ExperimentConfig, model: Option<&Model32>) -> Result<(Dataset<f32>, Dataset<f32>)> {
    let (train, test) = cfg.load_datasets::<f32>()?;
    if let Some(m) = model {
        if train.image_shape() != m.input_shape() || train.class_count != m.class_count() {
            return Err(Error::Config(format!(
                "dataset {} has images {:?} and {} classes, model expects {:?} and {}",
                train.source,
                train.image_shape(),
                train.class_count,
                m.input_shape(),
                m.class_count()
            )));
        }
    }
    Ok((train, test))
}

fn conv_layer(model: &Model32, layer: usize) -> Result<()> {
    let convs = model.conv_layer_ids();
    if convs.contains(&layer) {
        Ok(())
    } else {
        Err(Error::Config(format!("layer {layer} is not a conv layer; valid conv layer ids are {convs:?}")))
    }
}

fn cmd_train(common: &Common, steps: Option<u64>, architecture: Option<String>) -> Result<()> {
    let cfg = resolve(
        common,
        &[("steps", steps.map(|s| s.to_string())), ("architecture", architecture)],
    )?;
    let (train, test) = load_data(&cfg, None)?;
    let out = prepare_out(&cfg)?;
    let outcome = harness::train(&cfg, &train, Some(&test), Some(&out))?;
    write_metrics_csv(out.join("history.csv"), &outcome.history)?;
    let acc = outcome.history.last().and_then(|r| r.accuracy).unwrap_or(f64::NAN);
    println!("trained {} steps, test accuracy {acc:.4}", cfg.steps);
    Ok(())
}

fn cmd_visualize(common: &Common, checkpoint: &Path, layer: usize, filters: &str, columns: Option<usize>) -> Result<()> {
    let cfg = resolve(common, &[("grid_columns", columns.map(|c| c.to_string()))])?;
    let model = load_checkpoint(checkpoint)?;
    conv_layer(&model, layer)?;
    let count = model.filter_count(layer)?;
    let ids: Vec<usize> = if filters == "all" {
        (0..count).collect()
    } else {
        filters
            .split(',')
            .map(|f| {
                let i: usize = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("--filters: cannot parse {f:?}")))?;
                if i >= count {
                    return Err(Error::Config(format!("filter {i} out of range; layer {layer} has {count} filters")));
                }
                Ok(i)
            })
            .collect::<Result<_>>()?
    };
    let out = prepare_out(&cfg)?;
    let patterns = activation_maximize_many(&model, layer, &ids, &cfg.am)?;
    let mut csv = String::from("layer,filter,initial_activation,final_activation\n");
    for p in &patterns {
        export_pattern_ppm(p, out.join(format!("pattern_l{layer}_f{:03}.ppm", p.filter_id)))?;
        csv.push_str(&format!(
            "{layer},{},{:.6},{:.6}\n",
            p.filter_id,
            p.initial_activation(),
            p.final_activation()
        ));
    }
    export_grid_ppm(&patterns, cfg.grid_columns, out.join(format!("grid_l{layer}.ppm")))?;
    write_text(&out.join("activations.csv"), &csv)?;
    println!("wrote {} patterns for layer {layer}", patterns.len());
    Ok(())
}

fn cmd_prune(
    common: &Common,
    checkpoint: &Path,
    method: Option<String>,
    layer: Option<String>,
    ratio: f64,
    k: Option<usize>,
) -> Result<()> {
    let cfg = resolve(
        common,
        &[
            ("method", method),
            ("layers", layer),
            ("k", k.map(|k| k.to_string())),
            ("ratios", Some(ratio.to_string())),
        ],
    )?;
    let model = load_checkpoint(checkpoint)?;
    if let LayerSelection::Ids(ids) = &cfg.layers {
        for &l in ids {
            conv_layer(&model, l)?;
        }
    }
    let targets = cfg.layers.resolve(&model)?;
    let (train, test) = load_data(&cfg, Some(&model))?;
    let out = prepare_out(&cfg)?;
    let mut analyzer = Analyzer::new(&model, &train, &cfg);
    let selection = analyzer.select(cfg.method, &targets, ratio)?;
    let pruned = apply_prune(&model, &selection.plan)?;
    save_checkpoint(&pruned, out.join("pruned.ckpt"))?;

    let mut plan = ReportWriter::new();
    plan.field("method", cfg.method).field("ratio", ratio);
    plan.plan(&model, &selection.plan)?;
    write_text(&out.join("report.txt"), plan.as_str())?;
    if cfg.method == PruneMethod::Functional {
        let mut clusters = ReportWriter::new();
        for l in &selection.layers {
            if let Some(c) = &l.clusters {
                clusters.clusters(l.layer_id, c);
                clusters.contributions(&analyzer.layer(l.layer_id)?.contributions.clone());
                clusters.quotas(l.layer_id, &l.quotas);
            }
        }
        write_text(&out.join("clusters.txt"), clusters.as_str())?;
    }

    let before = evaluate_full(&model, &test)?;
    let after = evaluate_full(&pruned, &test)?;
    let csv = format!(
        "model,parameters,accuracy,loss\noriginal,{},{:.6},{:.6}\npruned,{},{:.6},{:.6}\n",
        model.parameter_count(),
        before.accuracy,
        before.loss,
        pruned.parameter_count(),
        after.accuracy,
        after.loss
    );
    write_text(&out.join("accuracy.csv"), &csv)?;
    println!(
        "removed {} filters; accuracy {:.4} -> {:.4}",
        selection.plan.len(),
        before.accuracy,
        after.accuracy
    );
    Ok(())
}

fn cmd_retrain(common: &Common, checkpoint: &Path, steps: Option<u64>, interval: Option<u64>) -> Result<()> {
    let cfg = resolve(
        common,
        &[
            ("retrain_steps", steps.map(|s| s.to_string())),
            ("snapshot_interval", interval.map(|s| s.to_string())),
        ],
    )?;
    let model = load_checkpoint(checkpoint)?;
    let (train, test) = load_data(&cfg, Some(&model))?;
    let out = prepare_out(&cfg)?;
    let outcome = retrain_with_snapshots(&model, &train, &test, &cfg, Some(&out))?;
    let mut records = outcome.records.clone();
    let last = outcome.snapshots.last().map_or(0, |s| s.step);
    if last != cfg.retrain_steps {
        // off-grid final step gets its own snapshot
        let p = out.join(format!("snapshot_{:06}.ckpt", cfg.retrain_steps));
        save_checkpoint(&outcome.final_model, &p)?;
        let eval = evaluate_full(&outcome.final_model, &test)?;
        let tail = &outcome.losses[last as usize..];
        let mut r = MetricsRecord::new(RecordKind::Recovery);
        r.step = Some(cfg.retrain_steps);
        r.accuracy = Some(eval.accuracy);
        r.loss = Some(tail.iter().sum::<f64>() / tail.len() as f64);
        records.push(r);
    }
    save_checkpoint(&outcome.final_model, out.join("final.ckpt"))?;
    write_metrics_csv(out.join("recovery.csv"), &records)?;
    println!(
        "retrained {} steps, {} snapshots, final accuracy {:.4}",
        cfg.retrain_steps,
        records.len(),
        records.last().and_then(|r| r.accuracy).unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_compare(
    common: &Common,
    baseline: &Path,
    ratios: Option<String>,
    methods: Option<String>,
    layers: Option<String>,
) -> Result<()> {
    let cfg = resolve(common, &[("ratios", ratios), ("methods", methods), ("layers", layers)])?;
    let model = load_checkpoint(baseline)?;
    let (train, test) = load_data(&cfg, Some(&model))?;
    let out = prepare_out(&cfg)?;
    let outcome = harness::compare(&model, &cfg, &train, &test, Some(&out))?;
    println!("baseline accuracy {:.4}", outcome.baseline_accuracy);
    for r in &outcome.rows {
        println!(
            "{} ratio {}: accuracy {:.4}, median drift {:.4}",
            r.method.map_or(String::new(), |m| m.to_string()),
            r.ratio.unwrap_or(f64::NAN),
            r.accuracy.unwrap_or(f64::NAN),
            r.median_drift().unwrap_or(f64::NAN)
        );
    }
    for s in &outcome.skipped {
        eprintln!("skipped ratio {}: {}", s.ratio, s.reason);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            common,
            steps,
            architecture,
        } => cmd_train(&common, steps, architecture),
        Command::Visualize {
            common,
            checkpoint,
            layer,
            filters,
            columns,
        } => cmd_visualize(&common, &checkpoint, layer, &filters, columns),
        Command::Prune {
            common,
            checkpoint,
            method,
            layer,
            ratio,
            k,
        } => cmd_prune(&common, &checkpoint, method, layer, ratio, k),
        Command::Retrain {
            common,
            checkpoint,
            steps,
            interval,
        } => cmd_retrain(&common, &checkpoint, steps, interval),
        Command::Compare {
            common,
            baseline,
            ratios,
            methods,
            layers,
        } => cmd_compare(&common, &baseline, ratios, methods, layers),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
