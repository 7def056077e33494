//! Plain-text pruning report.
//!
//! The format is a sequence of `[section]` headers followed by
//! `key = value` lines; lists are space-separated. Sections:
//!
//! ```text
//! [plan]                      removed, layer.<id>.removed, layer.<id>.survivors,
//!                             redundant_removed
//! [clusters layer=<id>]       k, iterations, inertia, cluster.<c>, singletons
//! [contribution layer=<id>]   samples, gamma.<filter>
//! [quotas layer=<id>]         quota.<c>
//! ```

use std::fmt::{Display, Write as _};
use std::path::Path;

use super::contribution::ContributionTable;
use super::kmeans::ClusterReport;
use super::PrunePlan;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;

fn join<I: IntoIterator<Item = D>, D: Display>(items: I) -> String {
    items.into_iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
}

/// Groups (size ≥ 2) of filters in a conv layer whose weights and bias are
/// bitwise identical, in ascending order of their first member.
pub fn duplicate_filters<T: Scalar>(model: &Model<T>, layer_id: usize) -> Result<Vec<Vec<usize>>> {
    let p = model.conv(layer_id)?;
    let n = p.out_channels();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut seen = vec![false; n];
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let mut group = vec![i];
        for j in i + 1..n {
            if !seen[j] && p.filter(i) == p.filter(j) && p.bias.data()[i] == p.bias.data()[j] {
                seen[j] = true;
                group.push(j);
            }
        }
        if group.len() > 1 {
            groups.push(group);
        }
    }
    Ok(groups)
}

#[derive(Debug, Default, Clone)]
pub struct ReportWriter {
    out: String,
}

impl ReportWriter {
    pub fn new() -> Self {
        Self::default()
    }

    fn section(&mut self, name: &str) -> &mut Self {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        let _ = writeln!(self.out, "[{name}]");
        self
    }

    pub fn field(&mut self, key: &str, value: impl Display) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {value}");
        self
    }

    /// Removals and survivor lists of every touched layer, plus how many
    /// removed filters had a bitwise duplicate in the original model.
    pub fn plan<T: Scalar>(&mut self, model: &Model<T>, plan: &PrunePlan) -> Result<&mut Self> {
        self.section("plan");
        self.field(
            "removed",
            join(plan.removals().iter().map(|r| format!("{}:{}", r.layer_id, r.filter_index))),
        );
        let mut redundant = 0;
        for layer in plan.touched_layers() {
            let removed = plan.removed_in(layer);
            let dups: Vec<usize> = duplicate_filters(model, layer)?.into_iter().flatten().collect();
            redundant += removed.iter().filter(|f| dups.contains(f)).count();
            self.field(&format!("layer.{layer}.removed"), join(&removed));
            self.field(
                &format!("layer.{layer}.survivors"),
                join(plan.survivor_pairs(model, layer)?.into_iter().map(|(o, _)| o)),
            );
        }
        self.field("redundant_removed", redundant);
        Ok(self)
    }

    pub fn clusters(&mut self, layer_id: usize, report: &ClusterReport) -> &mut Self {
        self.section(&format!("clusters layer={layer_id}"));
        self.field("k", report.k);
        self.field("iterations", report.iterations);
        self.field("inertia", format!("{:.6e}", report.inertia));
        for c in 0..report.k {
            self.field(&format!("cluster.{c}"), join(report.members(c)));
        }
        self.field("singletons", join(&report.singletons));
        self
    }

    pub fn contributions(&mut self, table: &ContributionTable) -> &mut Self {
        self.section(&format!("contribution layer={}", table.layer_id));
        self.field("samples", table.sample_count);
        for (i, g) in table.gamma.iter().enumerate() {
            self.field(&format!("gamma.{i}"), format!("{g:.9e}"));
        }
        self
    }

    pub fn quotas(&mut self, layer_id: usize, quotas: &[usize]) -> &mut Self {
        self.section(&format!("quotas layer={layer_id}"));
        for (c, q) in quotas.iter().enumerate() {
            self.field(&format!("quota.{c}"), q);
        }
        self
    }

    pub fn as_str(&self) -> &str {
        &self.out
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub fn write_report(path: impl AsRef<Path>, report: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report).map_err(|e| Error::io(path, e))
}
