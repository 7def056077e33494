use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::ExperimentConfig;
use super::drift::pattern_drift_from;
use super::metrics::{write_metrics_csv, MetricsRecord, RecordKind};
use super::retrain::retrain_with_snapshots;
use super::sweep::{Analyzer, Selection, SkippedPoint};
use super::train::{evaluate, evaluate_full};
use crate::am::{activation_maximize_many, export_grid_ppm};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{checkpoint_digest, save_checkpoint, Model};
use crate::prune::{apply_prune, ReportWriter};

/// Report text for one selection: plan, and per functional layer its
/// clusters, contributions and quotas.
pub fn selection_report(analyzer: &mut Analyzer<'_, f32>, selection: &Selection) -> Result<String> {
    let mut w = ReportWriter::new();
    w.plan(analyzer.model(), &selection.plan)?;
    for l in &selection.layers {
        if let Some(c) = &l.clusters {
            w.clusters(l.layer_id, c);
            let table = analyzer.layer(l.layer_id)?.contributions.clone();
            w.contributions(&table);
            w.quotas(l.layer_id, &l.quotas);
        }
    }
    Ok(w.finish())
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub baseline_accuracy: f64,
    /// One [`RecordKind::Compare`] row per feasible (method, ratio) pair.
    pub rows: Vec<MetricsRecord>,
    /// Every record of the run: post-prune, recovery and compare rows.
    pub records: Vec<MetricsRecord>,
    pub skipped: Vec<SkippedPoint>,
    /// `(relative path, sha256)` of every checkpoint written, in write order.
    pub digests: Vec<(String, String)>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// For each method and ratio: prune the target layers of `baseline`,
/// measure post-prune accuracy, retrain with snapshots, and measure the
/// pattern drift of surviving filters after retraining.
///
/// With `out_dir`, writes `manifest.txt`, `compare.csv`, `metrics.csv`,
/// `digests.txt`, and per run `<method>_r<ratio>/` holding `pruned.ckpt`,
/// `report.txt`, `snapshots/` and `grids/`.
pub fn compare(
    baseline: &Model<f32>,
    config: &ExperimentConfig,
    train_data: &Dataset<f32>,
    test_data: &Dataset<f32>,
    out_dir: Option<&Path>,
) -> Result<CompareOutcome> {
    config.validate()?;
    let targets = config.layers.resolve(baseline)?;
    if let Some(dir) = out_dir {
        mkdir(dir)?;
        write(&dir.join("manifest.txt"), &config.to_text())?;
    }
    let mut analyzer = Analyzer::new(baseline, train_data, config);
    let baseline_accuracy = evaluate(baseline, test_data)?;
    let mut ratios = config.ratios.clone();
    ratios.sort_by(f64::total_cmp);
    let single = (targets.len() == 1).then(|| targets[0]);

    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut digests = Vec::new();
    let mut digest = |dir: &Path, path: &Path, model: &Model<f32>| {
        let rel = path.strip_prefix(dir).unwrap_or(path).display().to_string();
        digests.push((rel, checkpoint_digest(model)));
    };

    for &method in &config.methods {
        for &ratio in &ratios {
            let start = Instant::now();
            let selection = match analyzer.select(method, &targets, ratio) {
                Ok(s) => s,
                Err(e @ Error::Infeasible { .. }) => {
                    skipped.push(SkippedPoint {
                        layer: single,
                        ratio,
                        reason: format!("{method}: {e}"),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let run_dir: Option<PathBuf> = out_dir.map(|d| d.join(format!("{method}_r{ratio}")));
            let pruned = apply_prune(baseline, &selection.plan)?;
            let tag = |mut r: MetricsRecord| {
                r.layer = single;
                r.method = Some(method);
                r.ratio = Some(ratio);
                r
            };
            let post = evaluate_full(&pruned, test_data)?;
            let mut r = MetricsRecord::new(RecordKind::LayerSweep);
            r.step = Some(0);
            r.accuracy = Some(post.accuracy);
            r.loss = Some(post.loss);
            r.wall_ms = start.elapsed().as_millis() as u64;
            records.push(tag(r));

            let snap_dir = run_dir.as_ref().map(|d| d.join("snapshots"));
            if let (Some(dir), Some(run), Some(snaps)) = (out_dir, &run_dir, &snap_dir) {
                mkdir(snaps)?;
                let p = run.join("pruned.ckpt");
                save_checkpoint(&pruned, &p)?;
                digest(dir, &p, &pruned);
                write(&run.join("report.txt"), &selection_report(&mut analyzer, &selection)?)?;
            }
            let recovery = retrain_with_snapshots(&pruned, train_data, test_data, config, snap_dir.as_deref())?;
            if let Some(dir) = out_dir {
                for s in &recovery.snapshots {
                    if let Some(p) = &s.path {
                        digest(dir, p, &s.model);
                    }
                }
            }
            records.extend(recovery.records.iter().cloned().map(tag));

            if let (Some(run), true) = (&run_dir, config.grid_filters > 0) {
                let grids = run.join("grids");
                mkdir(&grids)?;
                for s in &recovery.snapshots {
                    for &layer in &targets {
                        let n = s.model.filter_count(layer)?.min(config.grid_filters);
                        let filters: Vec<usize> = (0..n).collect();
                        let patterns = activation_maximize_many(&s.model, layer, &filters, &config.am)?;
                        let name = format!("grid_l{layer}_step{:06}.ppm", s.step);
                        export_grid_ppm(&patterns, config.grid_columns, grids.join(name))?;
                    }
                }
            }

            let mut drift = Vec::new();
            for &layer in &targets {
                let pairs = selection.plan.survivor_pairs(baseline, layer)?;
                let am = *analyzer.am_config();
                let before = analyzer.patterns(layer)?;
                drift.extend(pattern_drift_from(before, &recovery.final_model, layer, &pairs, &am)?);
            }
            let final_eval = evaluate_full(&recovery.final_model, test_data)?;
            let mut row = MetricsRecord::new(RecordKind::Compare);
            row.step = Some(config.retrain_steps);
            row.accuracy = Some(final_eval.accuracy);
            let tail = &recovery.losses[recovery.losses.len().saturating_sub(config.snapshot_interval as usize)..];
            row.loss = (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64);
            row.drift = drift;
            row.wall_ms = start.elapsed().as_millis() as u64;
            let row = tag(row);
            records.push(row.clone());
            rows.push(row);
        }
    }

    if let Some(dir) = out_dir {
        write_metrics_csv(dir.join("compare.csv"), &rows)?;
        write_metrics_csv(dir.join("metrics.csv"), &records)?;
        let mut text = String::new();
        for (p, d) in &digests {
            let _ = writeln!(text, "{d}  {p}");
        }
        write(&dir.join("digests.txt"), &text)?;
        let mut text = format!("baseline_accuracy = {baseline_accuracy:.6}\n");
        for s in &skipped {
            let _ = writeln!(text, "skipped ratio {} : {}", s.ratio, s.reason);
        }
        write(&dir.join("summary.txt"), &text)?;
    }
    Ok(CompareOutcome {
        baseline_accuracy,
        rows,
        records,
        skipped,
        digests,
    })
}
