use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::prune::PruneMethod;

pub const CSV_HEADER: [&str; 9] = [
    "kind",
    "layer",
    "method",
    "ratio",
    "step",
    "accuracy",
    "loss",
    "median_drift",
    "wall_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    /// Training progress of a baseline.
    Train,
    /// Post-prune accuracy, one layer pruned, no retraining.
    LayerSweep,
    /// Post-prune accuracy, every conv layer pruned at a shared ratio.
    ModelSweep,
    /// One retraining snapshot.
    Recovery,
    /// Final result of one (method, ratio) pair of a comparison.
    Compare,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Train => "train",
            RecordKind::LayerSweep => "layer_sweep",
            RecordKind::ModelSweep => "model_sweep",
            RecordKind::Recovery => "recovery",
            RecordKind::Compare => "compare",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub kind: RecordKind,
    /// `None` when the record covers several layers.
    pub layer: Option<usize>,
    pub method: Option<PruneMethod>,
    pub ratio: Option<f64>,
    pub step: Option<u64>,
    pub accuracy: Option<f64>,
    pub loss: Option<f64>,
    /// Per-filter pattern drift of surviving filters.
    pub drift: Vec<f64>,
    pub wall_ms: u64,
}

impl MetricsRecord {
    pub fn new(kind: RecordKind) -> Self {
        MetricsRecord {
            kind,
            layer: None,
            method: None,
            ratio: None,
            step: None,
            accuracy: None,
            loss: None,
            drift: Vec::new(),
            wall_ms: 0,
        }
    }

    pub fn median_drift(&self) -> Option<f64> {
        median(&self.drift)
    }

    fn csv_fields(&self) -> [String; 9] {
        fn opt<D: fmt::Display>(v: Option<D>) -> String {
            v.map_or(String::new(), |v| v.to_string())
        }
        let float = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        [
            self.kind.to_string(),
            opt(self.layer),
            opt(self.method),
            opt(self.ratio),
            opt(self.step),
            float(self.accuracy),
            float(self.loss),
            float(self.median_drift()),
            self.wall_ms.to_string(),
        ]
    }
}

/// Median with the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        w.write_record(r.csv_fields()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii fields")
}

pub fn write_metrics_csv(path: impl AsRef<Path>, records: &[MetricsRecord]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, metrics_csv(records)).map_err(|e| Error::io(path, e))
}

/// Rows of a metrics CSV as strings, header excluded, optionally dropping
/// the `wall_ms` column (for run-to-run comparisons).
pub fn read_metrics_csv(path: impl AsRef<Path>, drop_wall_clock: bool) -> Result<Vec<Vec<String>>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Data {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(Error::Data {
            path: path.to_path_buf(),
            reason: format!("unexpected header {header:?}"),
        });
    }
    r.records()
        .map(|row| {
            let row = row.map_err(|e| Error::Data {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            let keep = if drop_wall_clock { row.len() - 1 } else { row.len() };
            Ok(row.iter().take(keep).map(str::to_string).collect())
        })
        .collect()
}
