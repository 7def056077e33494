use std::collections::BTreeMap;
use std::time::Instant;

use super::config::ExperimentConfig;
use super::metrics::{MetricsRecord, RecordKind};
use super::train::evaluate;
use crate::am::{layer_patterns, AmConfig, Pattern};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::prune::{
    apply_prune, contribution_index, functional_select, l1_select, ClusterReport, ContributionTable, FunctionalOptions,
    PruneMethod, PrunePlan,
};
use crate::scalar::Scalar;

/// Filters to remove for `ratio` of `filters`, rounded to nearest.
pub fn removal_count(filters: usize, ratio: f64) -> usize {
    (ratio * filters as f64).round() as usize
}

/// Patterns and contribution indices of one layer of the unpruned model.
#[derive(Debug, Clone)]
pub struct LayerAnalysis<T> {
    pub layer_id: usize,
    pub patterns: Vec<Pattern<T>>,
    pub contributions: ContributionTable,
}

#[derive(Debug, Clone)]
pub struct LayerChoice {
    pub layer_id: usize,
    pub m: usize,
    pub clusters: Option<ClusterReport>,
    pub quotas: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub plan: PrunePlan,
    pub layers: Vec<LayerChoice>,
}

/// Read-only view of a baseline model that computes per-layer analyses on
/// first use and keeps them.
pub struct Analyzer<'a, T> {
    model: &'a Model<T>,
    probe: &'a Dataset<T>,
    am: AmConfig,
    samples: usize,
    options: FunctionalOptions,
    cache: BTreeMap<usize, LayerAnalysis<T>>,
}

impl<'a, T: Scalar> Analyzer<'a, T> {
    /// `probe` supplies the contribution-index images.
    pub fn new(model: &'a Model<T>, probe: &'a Dataset<T>, config: &ExperimentConfig) -> Self {
        Analyzer {
            model,
            probe,
            am: config.am,
            samples: config.contribution_samples.min(probe.len()),
            options: config.functional_options(),
            cache: BTreeMap::new(),
        }
    }

    pub fn model(&self) -> &'a Model<T> {
        self.model
    }

    pub fn am_config(&self) -> &AmConfig {
        &self.am
    }

    pub fn patterns(&mut self, layer_id: usize) -> Result<&[Pattern<T>]> {
        Ok(&self.layer(layer_id)?.patterns)
    }

    pub fn layer(&mut self, layer_id: usize) -> Result<&LayerAnalysis<T>> {
        if !self.cache.contains_key(&layer_id) {
            let patterns = layer_patterns(self.model, layer_id, &self.am)?;
            let contributions = contribution_index(self.model, self.probe, layer_id, self.samples)?;
            self.cache.insert(
                layer_id,
                LayerAnalysis {
                    layer_id,
                    patterns,
                    contributions,
                },
            );
        }
        Ok(&self.cache[&layer_id])
    }

    /// One plan pruning `ratio` of every listed layer; each layer's
    /// selection is made on the unpruned model.
    pub fn select(&mut self, method: PruneMethod, layer_ids: &[usize], ratio: f64) -> Result<Selection> {
        let mut removals = Vec::new();
        let mut layers = Vec::new();
        for &layer_id in layer_ids {
            let m = removal_count(self.model.filter_count(layer_id)?, ratio);
            if m == 0 {
                layers.push(LayerChoice {
                    layer_id,
                    m,
                    clusters: None,
                    quotas: Vec::new(),
                });
                continue;
            }
            let model = self.model;
            let options = self.options;
            let (plan, clusters, quotas) = match method {
                PruneMethod::L1 => (l1_select(model, layer_id, m)?, None, Vec::new()),
                PruneMethod::Functional => {
                    let a = self.layer(layer_id)?;
                    let s = functional_select(model, layer_id, m, &a.patterns, &a.contributions, &options)?;
                    (s.plan, Some(s.clusters), s.quotas)
                }
            };
            removals.extend(plan.removals().iter().copied());
            layers.push(LayerChoice {
                layer_id,
                m,
                clusters,
                quotas,
            });
        }
        Ok(Selection {
            plan: PrunePlan::new(self.model, removals)?,
            layers,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPoint {
    pub layer: Option<usize>,
    pub ratio: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub records: Vec<MetricsRecord>,
    pub skipped: Vec<SkippedPoint>,
}

/// Largest absolute difference between the pruned model's logits and the
/// masked original's on the first few test images.
pub fn mask_discrepancy<T: Scalar>(
    original: &Model<T>,
    pruned: &Model<T>,
    plan: &PrunePlan,
    data: &Dataset<T>,
) -> Result<f64> {
    let probe = data.take(data.len().min(8));
    let a = pruned.forward(&probe.images)?;
    let b = original.forward_masked(&probe.images, &plan.masks())?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x.as_f64() - y.as_f64()).abs())
        .fold(0.0, f64::max))
}

fn sweep_point<T: Scalar>(
    analyzer: &mut Analyzer<'_, T>,
    method: PruneMethod,
    layers: &[usize],
    ratio: f64,
    test: &Dataset<T>,
) -> Result<std::result::Result<MetricsRecord, String>> {
    let start = Instant::now();
    let selection = match analyzer.select(method, layers, ratio) {
        Ok(s) => s,
        Err(e @ Error::Infeasible { .. }) => return Ok(Err(e.to_string())),
        Err(e) => return Err(e),
    };
    let model = analyzer.model();
    let pruned = apply_prune(model, &selection.plan)?;
    let gap = mask_discrepancy(model, &pruned, &selection.plan, test)?;
    let scale = model.forward(&test.take(test.len().min(8)).images)?.l2_norm().as_f64().max(1.0);
    if gap > 1e-4 * scale {
        return Err(Error::PlanMismatch(format!(
            "pruned forward differs from masked forward by {gap:e}"
        )));
    }
    let mut r = MetricsRecord::new(RecordKind::LayerSweep);
    r.method = Some(method);
    r.ratio = Some(ratio);
    r.accuracy = Some(evaluate(&pruned, test)?);
    r.wall_ms = start.elapsed().as_millis() as u64;
    Ok(Ok(r))
}

/// Post-prune test accuracy (no retraining) for each ratio, first for each
/// listed layer alone, then, with `config.model_wise`, for all conv layers
/// at once. Ratios are visited in ascending order; infeasible points are
/// skipped with the reason and the sweep continues.
pub fn accuracy_drop_sweep<T: Scalar>(
    analyzer: &mut Analyzer<'_, T>,
    method: PruneMethod,
    layer_ids: &[usize],
    ratios: &[f64],
    config: &ExperimentConfig,
    test: &Dataset<T>,
) -> Result<SweepOutcome> {
    let mut ratios = ratios.to_vec();
    ratios.sort_by(f64::total_cmp);
    let mut out = SweepOutcome::default();
    let mut scopes: Vec<(RecordKind, Vec<usize>)> = layer_ids.iter().map(|&l| (RecordKind::LayerSweep, vec![l])).collect();
    if config.model_wise {
        scopes.push((RecordKind::ModelSweep, analyzer.model().conv_layer_ids()));
    }
    for (kind, layers) in scopes {
        let layer = (kind == RecordKind::LayerSweep).then(|| layers[0]);
        for &ratio in &ratios {
            match sweep_point(analyzer, method, &layers, ratio, test)? {
                Ok(mut r) => {
                    r.kind = kind;
                    r.layer = layer;
                    out.records.push(r);
                }
                Err(reason) => out.skipped.push(SkippedPoint { layer, ratio, reason }),
            }
        }
    }
    Ok(out)
}
