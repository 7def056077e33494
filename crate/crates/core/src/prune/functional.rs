use std::cmp::Ordering;

use super::contribution::ContributionTable;
use super::kmeans::{detect_singletons, kmeans_patterns, ClusterReport};
use super::l1::l1_norms;
use super::quota::{allocate_quotas, max_feasible};
use super::{FilterId, PrunePlan};
use crate::am::{pattern_vector, Pattern};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalOptions {
    /// Cluster count; `None` means `ceil(filters / 4)`.
    pub k: Option<usize>,
    pub seed: u64,
    pub tau_percentile: f64,
}

impl Default for FunctionalOptions {
    fn default() -> Self {
        FunctionalOptions {
            k: None,
            seed: 0,
            tau_percentile: 90.0,
        }
    }
}

impl FunctionalOptions {
    pub fn cluster_count(&self, filters: usize) -> usize {
        self.k.unwrap_or(filters.div_ceil(4)).clamp(1, filters.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSelection {
    pub plan: PrunePlan,
    pub clusters: ClusterReport,
    /// Removals per cluster id.
    pub quotas: Vec<usize>,
}

/// Cluster the layer's patterns, exempt singletons, split `m` across the
/// remaining clusters by size, and inside each cluster drop the filters with
/// the smallest contribution (then smaller ℓ1 norm, then lower index).
pub fn functional_select<T: Scalar>(
    model: &Model<T>,
    layer_id: usize,
    m: usize,
    patterns: &[Pattern<T>],
    contributions: &ContributionTable,
    opts: &FunctionalOptions,
) -> Result<FunctionalSelection> {
    let count = model.filter_count(layer_id)?;
    if patterns.len() != count
        || patterns
            .iter()
            .enumerate()
            .any(|(i, p)| p.layer_id != layer_id || p.filter_id != i)
    {
        return Err(Error::InvalidArgument(format!(
            "patterns must cover filters 0..{count} of layer {layer_id} in order"
        )));
    }
    if contributions.layer_id != layer_id || contributions.gamma.len() != count {
        return Err(Error::InvalidArgument(format!(
            "contribution table is for layer {} with {} filters, expected layer {layer_id} with {count}",
            contributions.layer_id,
            contributions.gamma.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("functional_select needs m >= 1".into()));
    }

    let vectors: Vec<Vec<T>> = patterns.iter().map(pattern_vector).collect();
    let clustered = kmeans_patterns(&vectors, opts.cluster_count(count), opts.seed)?;
    let clusters = detect_singletons(&clustered, &vectors, opts.tau_percentile)?;
    let sizes = clusters.sizes();
    if m > max_feasible(&sizes) {
        return Err(Error::Infeasible {
            requested: m,
            max_feasible: max_feasible(&sizes),
        });
    }
    let quotas = allocate_quotas(&sizes, m)?;

    let norms = l1_norms(model, layer_id)?;
    let gamma = &contributions.gamma;
    let mut removals = Vec::with_capacity(m);
    for (c, &quota) in quotas.iter().enumerate() {
        let mut members = clusters.members(c);
        members.sort_by(|&a, &b| {
            gamma[a]
                .partial_cmp(&gamma[b])
                .unwrap_or(Ordering::Equal)
                .then(norms[a].total_cmp(&norms[b]))
                .then(a.cmp(&b))
        });
        removals.extend(members.into_iter().take(quota).map(|f| FilterId::new(layer_id, f)));
    }
    Ok(FunctionalSelection {
        plan: PrunePlan::new(model, removals)?,
        clusters,
        quotas,
    })
}
