use std::collections::BTreeMap;

use rand::Rng;

use crate::data::{MixedBatch, MixedBatchSampler, TaskDataset, TaskId, TaskSample};
use crate::error::{Error, Result};
use crate::model::{cross_entropy, forward, predict, total_loss, LossOptions, MultiTaskParams};
use crate::nn::{adam_step, AdamState, OptimizerConfig};
use crate::tensor::Tape;

/// Rows per forward pass when scoring validation and test sets.
pub const EVAL_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainSchedule {
    pub max_epochs: usize,
    pub warmup_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
}

impl TrainSchedule {
    /// The full-scale protocol: 300 epochs, 40 warm-up, patience 40, batch 128.
    pub const FULL: TrainSchedule = TrainSchedule {
        max_epochs: 300,
        warmup_epochs: 40,
        patience: 40,
        batch_size: 128,
    };

    /// Scaled down to run on a CPU in minutes.
    pub const DESK: TrainSchedule = TrainSchedule {
        max_epochs: 60,
        warmup_epochs: 8,
        patience: 8,
        batch_size: 32,
    };

    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Config("schedule.max_epochs must be at least 1".into()));
        }
        if self.warmup_epochs >= self.max_epochs {
            return Err(Error::Config(format!(
                "schedule.warmup_epochs = {} must be below schedule.max_epochs = {}",
                self.warmup_epochs, self.max_epochs
            )));
        }
        if self.patience == 0 {
            return Err(Error::Config("schedule.patience must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("schedule.batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Linear ramp over the warm-up epochs (1-based), then flat.
    pub fn learning_rate(&self, epoch: usize, base: f64) -> f64 {
        if self.warmup_epochs == 0 {
            return base;
        }
        base * (epoch as f64 / self.warmup_epochs as f64).min(1.0)
    }
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self::DESK
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best validation loss over all epochs but only counts
/// non-improving epochs once warm-up is over.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    warmup: usize,
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(schedule: &TrainSchedule) -> Self {
        Self {
            warmup: schedule.warmup_epochs,
            patience: schedule.patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            return StopDecision::Improved;
        }
        if epoch > self.warmup {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                return StopDecision::Stop;
            }
        }
        StopDecision::Continue
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean per-sample training loss.
    pub train_loss: f64,
    /// Mean per-sample validation loss.
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }
}

/// All samples of the given datasets as one batch.
pub fn batch_of(datasets: &[&TaskDataset]) -> Result<MixedBatch> {
    let samples: Vec<&TaskSample> = datasets.iter().flat_map(|d| d.samples()).collect();
    let classes: BTreeMap<TaskId, usize> =
        datasets.iter().map(|d| (d.task_id(), d.num_classes())).collect();
    MixedBatch::from_samples(&samples, &classes)
}

/// Summed cross-entropy of every sample under its own task's head.
pub fn evaluate_loss(model: &MultiTaskParams, batch: &MixedBatch) -> Result<f64> {
    let probs = predict(model, batch, EVAL_CHUNK)?;
    let mut total = 0.0;
    for i in 0..batch.len() {
        let task = batch.tasks[i];
        let o = probs
            .get(&task)
            .ok_or_else(|| Error::Contract(format!("no {task} head to score")))?;
        total += cross_entropy(o.row(i), &batch.one_hot(i))?;
    }
    Ok(total)
}

/// Trains `model` in place and restores the weights of the best
/// validation epoch.
///
/// Every batch updates the backbone; a head is updated only by batches
/// that contain samples of its task, so a head whose task never appears
/// keeps its weights bit for bit.
pub fn train_loop<R: Rng + ?Sized>(
    model: &mut MultiTaskParams,
    train: &[&TaskDataset],
    val: &[&TaskDataset],
    schedule: &TrainSchedule,
    optimizer: &OptimizerConfig,
    task_filter: Option<TaskId>,
    rng: &mut R,
) -> Result<TrainHistory> {
    schedule.validate()?;
    optimizer.validate()?;
    let keep = |d: &&&TaskDataset| task_filter.is_none_or(|t| d.task_id() == t);
    let train: Vec<&TaskDataset> = train.iter().filter(keep).copied().collect();
    let val: Vec<&TaskDataset> = val.iter().filter(keep).copied().collect();
    if train.is_empty() || val.iter().all(|d| d.is_empty()) {
        return Err(Error::Contract("training needs non-empty train and validation data".into()));
    }
    for d in train.iter().chain(&val) {
        if !model.heads.contains_key(&d.task_id()) {
            return Err(Error::Contract(format!("model has no head for {}", d.task_id())));
        }
    }
    let val: Vec<&TaskDataset> = val.into_iter().filter(|d| !d.is_empty()).collect();
    let val_batch = batch_of(&val)?;
    let val_count = val_batch.len() as f64;

    let mut sampler = MixedBatchSampler::new(train, schedule.batch_size, false)?;
    let train_count = sampler.epoch_len() as f64;
    let mut backbone_state = AdamState::new(&model.backbone);
    let mut head_states: BTreeMap<TaskId, AdamState> =
        model.heads.iter().map(|(t, h)| (*t, AdamState::new(h))).collect();
    let mut stopper = EarlyStopping::new(schedule);
    let mut best = model.clone();
    let mut records = Vec::new();

    for epoch in 1..=schedule.max_epochs {
        let lr = schedule.learning_rate(epoch, optimizer.learning_rate);
        let step_config = OptimizerConfig { learning_rate: lr, ..optimizer.clone() };
        let mut epoch_loss = 0.0;
        for (b, batch) in sampler.epoch(rng)?.into_iter().enumerate() {
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape);
            let out = forward(&mut tape, &bound, &batch.images)?;
            let loss = total_loss(&mut tape, &batch, &out.heads, LossOptions::default())?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, batch: b + 1, loss: value });
            }
            epoch_loss += value;
            let mut grads = tape.backward(loss)?;
            model.attach_grads(&bound, &mut grads)?;
            adam_step(&mut model.backbone, &mut backbone_state, &step_config)?;
            for (task, head) in model.heads.iter_mut() {
                if batch.count(*task) > 0 {
                    adam_step(head, head_states.get_mut(task).expect("one state per head"), &step_config)?;
                } else {
                    head.clear_grads();
                }
            }
        }
        let val_loss = evaluate_loss(model, &val_batch)? / val_count;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, batch: 0, loss: val_loss });
        }
        records.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss: epoch_loss / train_count,
            val_loss,
        });
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    *model = best;
    Ok(TrainHistory {
        epochs: records,
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best_loss(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        let s = TrainSchedule { warmup_epochs: 2, ..TrainSchedule::DESK };
        assert!((s.learning_rate(1, 0.001) - 0.0005).abs() < 1e-15);
        assert!((s.learning_rate(2, 0.001) - 0.001).abs() < 1e-15);
        assert!((s.learning_rate(50, 0.001) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn patience_one_stops_right_after_warmup_best() {
        let s = TrainSchedule { max_epochs: 20, warmup_epochs: 3, patience: 1, batch_size: 1 };
        let mut stop = EarlyStopping::new(&s);
        // Improving through warmup + 1, then strictly increasing.
        let losses = [5.0, 4.0, 3.0, 2.0, 2.5, 3.0, 3.5];
        let mut stopped_at = None;
        for (i, &l) in losses.iter().enumerate() {
            if stop.observe(i + 1, l) == StopDecision::Stop {
                stopped_at = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped_at, Some(5));
        assert_eq!(stop.best_epoch(), 4);
    }

    #[test]
    fn warmup_epochs_never_count() {
        let s = TrainSchedule { max_epochs: 20, warmup_epochs: 5, patience: 1, batch_size: 1 };
        let mut stop = EarlyStopping::new(&s);
        assert_eq!(stop.observe(1, 1.0), StopDecision::Improved);
        for e in 2..=5 {
            assert_eq!(stop.observe(e, 2.0), StopDecision::Continue);
        }
        assert_eq!(stop.observe(6, 2.0), StopDecision::Stop);
    }

    #[test]
    fn schedule_validation() {
        assert!(TrainSchedule::FULL.validate().is_ok());
        assert!(TrainSchedule::DESK.validate().is_ok());
        let bad = TrainSchedule { warmup_epochs: 60, ..TrainSchedule::DESK };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = TrainSchedule { patience: 0, ..TrainSchedule::DESK };
        assert!(bad.validate().is_err());
    }
}
