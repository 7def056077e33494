use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::ExperimentConfig;
use super::metrics::{MetricsRecord, RecordKind};
use super::train::{evaluate, run_sgd, SgdSchedule};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{save_checkpoint, Model};

/// Mixed into the experiment seed so retraining batches differ from the
/// baseline's.
const RETRAIN_STREAM: u64 = 0x5245_5452_4149_4e00;

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: u64,
    pub model: Model<f32>,
    pub accuracy: f64,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RecoveryOutcome {
    /// Taken at step 0 and every `snapshot_interval` steps.
    pub snapshots: Vec<Snapshot>,
    /// One [`RecordKind::Recovery`] record per snapshot; `loss` is the mean
    /// training loss since the previous snapshot.
    pub records: Vec<MetricsRecord>,
    /// Model after the last step, whether or not it falls on a snapshot.
    pub final_model: Model<f32>,
    pub losses: Vec<f64>,
}

impl RecoveryOutcome {
    pub fn accuracies(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.accuracy).collect()
    }
}

/// Number of snapshots a run takes.
pub fn snapshot_count(steps: u64, interval: u64) -> usize {
    (steps / interval) as usize + 1
}

/// 1-based count of snapshots needed before accuracy first comes within
/// `tolerance` of the last snapshot's accuracy.
pub fn snapshots_to_recover(accuracies: &[f64], tolerance: f64) -> Option<usize> {
    let target = accuracies.last()? - tolerance;
    accuracies.iter().position(|&a| a >= target).map(|i| i + 1)
}

/// Retrains with SGD at the retraining learning rate, evaluating and
/// (with `out_dir`) checkpointing as `snapshot_<step>.ckpt` every
/// `snapshot_interval` steps. On divergence the snapshots already written
/// stay on disk and the error names the latest one.
pub fn retrain_with_snapshots(
    model: &Model<f32>,
    train_data: &Dataset<f32>,
    test_data: &Dataset<f32>,
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<RecoveryOutcome> {
    config.validate()?;
    let interval = config.snapshot_interval;
    let schedule = SgdSchedule {
        lr: config.retrain_lr,
        momentum: config.retrain_momentum,
        batch_size: config.batch_size,
        steps: config.retrain_steps,
        seed: config.seed ^ RETRAIN_STREAM,
    };
    let start = Instant::now();
    let snap = |step: u64, m: &Model<f32>, loss: Option<f64>| -> Result<(Snapshot, MetricsRecord)> {
        let accuracy = evaluate(m, test_data)?;
        let path = match out_dir {
            Some(dir) => {
                let p = dir.join(format!("snapshot_{step:06}.ckpt"));
                save_checkpoint(m, &p)?;
                Some(p)
            }
            None => None,
        };
        let mut r = MetricsRecord::new(RecordKind::Recovery);
        r.step = Some(step);
        r.accuracy = Some(accuracy);
        r.loss = loss;
        r.wall_ms = start.elapsed().as_millis() as u64;
        let snapshot = Snapshot {
            step,
            model: m.clone(),
            accuracy,
            path,
        };
        Ok((snapshot, r))
    };

    let mut current = model.clone();
    current.reset_velocity();
    let (first, rec) = snap(0, &current, None)?;
    let mut snapshots = vec![first];
    let mut records = vec![rec];
    let mut window = Vec::new();
    let result = run_sgd(
        &mut current,
        train_data,
        &schedule,
        |step, m, loss| {
            window.push(loss);
            if step % interval == 0 {
                let mean = window.iter().sum::<f64>() / window.len() as f64;
                window.clear();
                let (s, r) = snap(step, m, Some(mean))?;
                snapshots.push(s);
                records.push(r);
            }
            Ok(())
        },
        |_| Ok(None),
    );
    let losses = match result {
        Ok(l) => l,
        Err(Error::Diverged { step, .. }) => {
            return Err(Error::Diverged {
                step,
                last_good: snapshots.last().and_then(|s| s.path.clone()),
            })
        }
        Err(e) => return Err(e),
    };
    Ok(RecoveryOutcome {
        snapshots,
        records,
        final_model: current,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn setup(steps: u64, interval: u64) -> (Model<f32>, Dataset<f32>, ExperimentConfig) {
        let images = Tensor::from_fn(&[12, 1, 8, 8], |i| ((i * 13 % 29) as f32 / 14.0) - 1.0);
        let d = Dataset::new(images, (0..12).map(|i| i % 3).collect(), 3, "t").unwrap();
        let mut c = ExperimentConfig::default();
        c.retrain_steps = steps;
        c.snapshot_interval = interval;
        c.batch_size = 4;
        let m = Model::build(&crate::model::toy_model_specs(3, 3), [1, 8, 8], 1).unwrap();
        (m, d, c)
    }

    #[test]
    fn snapshot_counts() {
        for (steps, interval) in [(0, 100), (7, 3), (9, 3), (5, 10)] {
            let (m, d, c) = setup(steps, interval);
            let out = retrain_with_snapshots(&m, &d, &d, &c, None).unwrap();
            assert_eq!(out.snapshots.len(), snapshot_count(steps, interval));
            assert_eq!(out.records.len(), out.snapshots.len());
            let steps_seen: Vec<u64> = out.snapshots.iter().map(|s| s.step).collect();
            assert!(steps_seen.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn zero_steps_snapshot_is_input() {
        let (m, d, c) = setup(0, 5);
        let out = retrain_with_snapshots(&m, &d, &d, &c, None).unwrap();
        assert_eq!(out.snapshots[0].model, m);
        assert_eq!(out.final_model, m);
    }

    #[test]
    fn recover_count() {
        assert_eq!(snapshots_to_recover(&[0.1, 0.5, 0.595, 0.6], 0.01), Some(3));
        assert_eq!(snapshots_to_recover(&[0.7, 0.5, 0.6], 0.01), Some(1));
        assert_eq!(snapshots_to_recover(&[], 0.01), None);
    }
}
