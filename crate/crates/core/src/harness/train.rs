use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::ExperimentConfig;
use super::metrics::{MetricsRecord, RecordKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{save_checkpoint, Model};
use crate::parallel;
use crate::scalar::Scalar;
use crate::tensor::softmax_xent;

const EVAL_BATCH: usize = 128;

/// Shuffle seed of one epoch.
pub fn epoch_seed(seed: u64, epoch: u64) -> u64 {
    seed ^ (epoch.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdSchedule {
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub steps: u64,
    pub seed: u64,
}

impl SgdSchedule {
    pub fn steps_per_epoch(&self, samples: usize) -> u64 {
        samples.div_ceil(self.batch_size.max(1)) as u64
    }
}

/// Runs `schedule.steps` SGD steps, reshuffling at every epoch boundary.
/// `after_step(step, model, loss)` is called after each update. On a
/// non-finite loss or gradient the model is left at its last good state,
/// `on_diverge` may persist it, and [`Error::Diverged`] is returned.
pub fn run_sgd<T: Scalar>(
    model: &mut Model<T>,
    data: &Dataset<T>,
    schedule: &SgdSchedule,
    mut after_step: impl FnMut(u64, &Model<T>, f64) -> Result<()>,
    on_diverge: impl FnOnce(&Model<T>) -> Result<Option<PathBuf>>,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let lr = T::from_f64_lossy(schedule.lr);
    let momentum = T::from_f64_lossy(schedule.momentum);
    let mut losses = Vec::with_capacity(schedule.steps as usize);
    let mut step = 0u64;
    let mut epoch = 0u64;
    'outer: while step < schedule.steps {
        for (x, y) in data.batches(schedule.batch_size, epoch_seed(schedule.seed, epoch), true)? {
            if step >= schedule.steps {
                break 'outer;
            }
            let cap = model.forward_capture(&x)?;
            let (loss, grad) = softmax_xent(cap.logits(), &y)?;
            let loss = loss.as_f64();
            let grads = if loss.is_finite() {
                Some(model.backward(&cap, &grad, false)?)
            } else {
                None
            };
            let stepped = match grads {
                Some(g) => match model.sgd_step(&g, lr, momentum) {
                    Err(Error::NonFinite { .. }) => false,
                    other => other.map(|_| true)?,
                },
                None => false,
            };
            if !stepped {
                let last_good = on_diverge(model)?;
                return Err(Error::Diverged {
                    step: step + 1,
                    last_good,
                });
            }
            step += 1;
            losses.push(loss);
            after_step(step, model, loss)?;
        }
        epoch += 1;
    }
    Ok(losses)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Mean cross-entropy.
    pub loss: f64,
    pub correct: usize,
    pub total: usize,
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate_full<T: Scalar>(model: &Model<T>, data: &Dataset<T>) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty dataset".into()));
    }
    let starts: Vec<usize> = (0..data.len()).step_by(EVAL_BATCH).collect();
    let parts = parallel::map_ordered(&starts, |&s| -> Result<(usize, f64)> {
        let part = data.range(s, (s + EVAL_BATCH).min(data.len()));
        let logits = model.forward(&part.images)?;
        let k = logits.shape()[1];
        let correct = logits
            .data()
            .chunks_exact(k)
            .zip(&part.labels)
            .filter(|(row, &y)| argmax(row) == y)
            .count();
        let (loss, _) = softmax_xent(&logits, &part.labels)?;
        Ok((correct, loss.as_f64() * part.len() as f64))
    });
    let (mut correct, mut loss) = (0, 0.0);
    for p in parts {
        let (c, l) = p?;
        correct += c;
        loss += l;
    }
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        loss: loss / data.len() as f64,
        correct,
        total: data.len(),
    })
}

/// Fraction of images whose logit argmax equals the label.
pub fn evaluate<T: Scalar>(model: &Model<T>, data: &Dataset<T>) -> Result<f64> {
    Ok(evaluate_full(model, data)?.accuracy)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    /// Training loss of every step.
    pub losses: Vec<f64>,
    /// One record at step 0, at every epoch end and at the final step.
    pub history: Vec<MetricsRecord>,
}

/// Trains a fresh model of the configured architecture. With `out_dir`,
/// writes `model.ckpt` at the end (and `epoch_<n>.ckpt` per epoch when
/// configured); on divergence writes `last_good.ckpt`.
pub fn train(
    config: &ExperimentConfig,
    train_data: &Dataset<f32>,
    test_data: Option<&Dataset<f32>>,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let specs = config.architecture.specs(train_data.class_count);
    let mut model = Model::build(&specs, train_data.image_shape(), config.seed)?;
    let schedule = SgdSchedule {
        lr: config.lr,
        momentum: config.momentum,
        batch_size: config.batch_size,
        steps: config.steps,
        seed: config.seed,
    };
    let per_epoch = schedule.steps_per_epoch(train_data.len());
    let start = Instant::now();
    let record = |step: u64, model: &Model<f32>, loss: Option<f64>| -> Result<MetricsRecord> {
        let mut r = MetricsRecord::new(RecordKind::Train);
        r.step = Some(step);
        r.loss = loss;
        r.accuracy = test_data.map(|t| evaluate(model, t)).transpose()?;
        r.wall_ms = start.elapsed().as_millis() as u64;
        Ok(r)
    };
    let mut history = vec![record(0, &model, None)?];
    let mut window = Vec::new();
    let losses = run_sgd(
        &mut model,
        train_data,
        &schedule,
        |step, m, loss| {
            window.push(loss);
            let epoch_end = step % per_epoch == 0;
            if epoch_end || step == schedule.steps {
                let mean = window.iter().sum::<f64>() / window.len() as f64;
                window.clear();
                history.push(record(step, m, Some(mean))?);
            }
            if epoch_end && config.checkpoint_every_epoch {
                if let Some(dir) = out_dir {
                    save_checkpoint(m, dir.join(format!("epoch_{}.ckpt", step / per_epoch)))?;
                }
            }
            Ok(())
        },
        |m| {
            out_dir
                .map(|dir| {
                    let p = dir.join("last_good.ckpt");
                    save_checkpoint(m, &p).map(|_| p)
                })
                .transpose()
        },
    )?;
    if let Some(dir) = out_dir {
        save_checkpoint(&model, dir.join("model.ckpt"))?;
    }
    Ok(TrainOutcome {
        model,
        losses,
        history,
    })
}
