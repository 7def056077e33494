//! Filter selection (magnitude and functionality-oriented) and the surgery
//! that physically removes the selected filters.

mod contribution;
mod functional;
mod kmeans;
mod l1;
mod quota;
mod report;
mod surgery;

pub use contribution::{contribution_index, ContributionTable};
pub use functional::{functional_select, FunctionalOptions, FunctionalSelection};
pub use kmeans::{detect_singletons, kmeans_patterns, percentile, ClusterReport, MAX_LLOYD_ITERATIONS};
pub use l1::{l1_norms, l1_rank, l1_select};
pub use quota::{allocate_quotas, max_feasible};
pub use report::{duplicate_filters, write_report, ReportWriter};
pub use surgery::apply_prune;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{LayerSpec, Model};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FilterId {
    pub layer_id: usize,
    pub filter_index: usize,
}

impl FilterId {
    pub fn new(layer_id: usize, filter_index: usize) -> Self {
        FilterId { layer_id, filter_index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PruneMethod {
    L1,
    Functional,
}

impl fmt::Display for PruneMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PruneMethod::L1 => "l1",
            PruneMethod::Functional => "functional",
        })
    }
}

impl FromStr for PruneMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(PruneMethod::L1),
            "functional" => Ok(PruneMethod::Functional),
            other => Err(Error::Config(format!("unknown pruning method {other:?} (expected l1 or functional)"))),
        }
    }
}

/// Weights consumed downstream of a pruned conv layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Downstream {
    /// Input-channel slices of the next conv layer.
    ConvInput { layer_id: usize, channels: Vec<usize> },
    /// Rows of a dense weight matrix fed through flatten; each removed
    /// channel owns a contiguous block of `H·W` rows.
    DenseRows { layer_id: usize, rows: Vec<usize> },
}

/// Filters to remove, the old → new index map of every touched layer and the
/// downstream slices the removals induce.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrunePlan {
    removals: BTreeSet<FilterId>,
    survivors: BTreeMap<usize, Vec<Option<usize>>>,
    downstream: Vec<Downstream>,
}

/// The next parameterized layer after `layer_id` (the consumer of its channels).
pub(crate) fn consumer(layers: &[LayerSpec], layer_id: usize) -> Option<usize> {
    (layer_id + 1..layers.len()).find(|&l| matches!(layers[l], LayerSpec::Conv { .. } | LayerSpec::Dense { .. }))
}

impl PrunePlan {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates `removals` against `model` and derives survivor maps and
    /// downstream removals.
    pub fn new<T: Scalar>(model: &Model<T>, removals: impl IntoIterator<Item = FilterId>) -> Result<Self> {
        let removals: BTreeSet<FilterId> = removals.into_iter().collect();
        let mut by_layer: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for r in &removals {
            model.check_conv_filter(r.layer_id, r.filter_index)?;
            by_layer.entry(r.layer_id).or_default().push(r.filter_index);
        }
        let layers = model.layers();
        let shapes = model.shapes();
        let mut survivors = BTreeMap::new();
        let mut downstream = Vec::new();
        for (&layer_id, removed) in &by_layer {
            let count = model.filter_count(layer_id)?;
            if removed.len() >= count {
                return Err(Error::Infeasible {
                    requested: removed.len(),
                    max_feasible: count - 1,
                });
            }
            let mut next = 0;
            let map: Vec<Option<usize>> = (0..count)
                .map(|i| {
                    if removed.binary_search(&i).is_ok() {
                        None
                    } else {
                        next += 1;
                        Some(next - 1)
                    }
                })
                .collect();
            survivors.insert(layer_id, map);
            match consumer(layers, layer_id) {
                Some(c) if layers[c].is_conv() => downstream.push(Downstream::ConvInput {
                    layer_id: c,
                    channels: removed.clone(),
                }),
                Some(c) => {
                    let flatten = (layer_id + 1..c)
                        .find(|&l| layers[l] == LayerSpec::Flatten)
                        .expect("validated chain flattens before dense");
                    let [_, h, w] = shapes[flatten][..] else { unreachable!() };
                    let plane = h * w;
                    let rows = removed.iter().flat_map(|&ch| ch * plane..(ch + 1) * plane).collect();
                    downstream.push(Downstream::DenseRows { layer_id: c, rows });
                }
                None => {}
            }
        }
        Ok(PrunePlan {
            removals,
            survivors,
            downstream,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.removals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.removals.len()
    }

    pub fn removals(&self) -> &BTreeSet<FilterId> {
        &self.removals
    }

    /// Removed filter indices of one layer, ascending.
    pub fn removed_in(&self, layer_id: usize) -> Vec<usize> {
        self.removals
            .iter()
            .filter(|r| r.layer_id == layer_id)
            .map(|r| r.filter_index)
            .collect()
    }

    pub fn touched_layers(&self) -> Vec<usize> {
        self.survivors.keys().copied().collect()
    }

    /// `old index → new index` (`None` when removed) for a touched layer.
    pub fn survivor_map(&self, layer_id: usize) -> Option<&[Option<usize>]> {
        self.survivors.get(&layer_id).map(Vec::as_slice)
    }

    /// `(old, new)` pairs of surviving filters; identity when the layer is
    /// untouched.
    pub fn survivor_pairs<T: Scalar>(&self, model: &Model<T>, layer_id: usize) -> Result<Vec<(usize, usize)>> {
        let count = model.filter_count(layer_id)?;
        Ok(match self.survivor_map(layer_id) {
            Some(map) => map.iter().enumerate().filter_map(|(o, n)| n.map(|n| (o, n))).collect(),
            None => (0..count).map(|i| (i, i)).collect(),
        })
    }

    pub fn downstream(&self) -> &[Downstream] {
        &self.downstream
    }

    /// Channel masks equivalent to this plan for [`Model::forward_masked`].
    pub fn masks(&self) -> BTreeMap<usize, Vec<usize>> {
        self.survivors.keys().map(|&l| (l, self.removed_in(l))).collect()
    }
}
