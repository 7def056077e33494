//! Experiment orchestration: training, accuracy-drop sweeps, retraining
//! with snapshots, pattern drift and the two-method comparison.

mod compare;
mod config;
mod drift;
mod metrics;
mod retrain;
mod sweep;
mod train;

pub use compare::{compare, selection_report, CompareOutcome};
pub use config::{DatasetKind, ExperimentConfig, LayerSelection};
pub use drift::{pattern_drift, pattern_drift_from};
pub use metrics::{median, metrics_csv, read_metrics_csv, write_metrics_csv, MetricsRecord, RecordKind, CSV_HEADER};
pub use retrain::{retrain_with_snapshots, snapshot_count, snapshots_to_recover, RecoveryOutcome, Snapshot};
pub use sweep::{
    accuracy_drop_sweep, mask_discrepancy, removal_count, Analyzer, LayerAnalysis, LayerChoice,
    Selection, SkippedPoint, SweepOutcome,
};
pub use train::{argmax, epoch_seed, evaluate, evaluate_full, run_sgd, train, Evaluation, SgdSchedule, TrainOutcome};
