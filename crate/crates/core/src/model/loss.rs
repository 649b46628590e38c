use std::collections::BTreeMap;

use crate::data::{MixedBatch, TaskId};
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Probabilities are clamped to at least this value before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// 1 if a sample of `sample_task` contributes to `task`'s loss, else 0.
///
/// Both tasks must be among `configured`.
pub fn indicator(sample_task: TaskId, task: TaskId, configured: &[TaskId]) -> Result<u8> {
    for t in [sample_task, task] {
        if !configured.contains(&t) {
            return Err(Error::Contract(format!("{t} is not a configured task")));
        }
    }
    Ok(u8::from(sample_task == task))
}

/// −Σₖ Yₖ·log(Oₖ) for one sample, with O clamped to [1e-12, 1].
pub fn cross_entropy(probs: &[f64], one_hot: &[f64]) -> Result<f64> {
    if probs.len() != one_hot.len() {
        return Err(Error::Dimension(format!(
            "{} probabilities for a {}-class label",
            probs.len(),
            one_hot.len()
        )));
    }
    let ones = one_hot.iter().filter(|&&y| y == 1.0).count();
    if ones != 1 || one_hot.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::Contract(format!("label {one_hot:?} is not one-hot")));
    }
    Ok(-probs
        .iter()
        .zip(one_hot)
        .map(|(&p, &y)| y * p.clamp(PROB_FLOOR, 1.0).ln())
        .sum::<f64>())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossOptions {
    /// Divide each task's term by its sample count in the batch. Off by
    /// default: the joint loss is a plain sum over the batch.
    pub per_task_mean: bool,
}

/// Indicator-masked joint loss on the tape:
///
/// L = Σᵢ Σⱼ 𝕀(Xᵢ, τⱼ) · CE(O^τⱼᵢ, Y^τⱼᵢ)
///
/// Every head's output covers the whole batch; the indicator mask zeroes
/// the rows of samples from other tasks, so a head receives exactly zero
/// gradient from a batch that holds none of its samples.
pub fn total_loss(
    tape: &mut Tape,
    batch: &MixedBatch,
    outputs: &BTreeMap<TaskId, Var>,
    options: LossOptions,
) -> Result<Var> {
    let configured: Vec<TaskId> = outputs.keys().copied().collect();
    if let Some(t) = batch.tasks.iter().find(|t| !outputs.contains_key(t)) {
        return Err(Error::Contract(format!("batch holds {t} samples but no {t} head")));
    }
    let n = batch.len();
    let mut total: Option<Var> = None;
    for (&task, &probs) in outputs {
        let classes = *batch
            .num_classes
            .get(&task)
            .or_else(|| tape.shape(probs).get(1))
            .unwrap_or(&0);
        if tape.shape(probs) != [n, classes] {
            return Err(Error::Dimension(format!(
                "{task} output {:?} for a batch of {n} with {classes} classes",
                tape.shape(probs)
            )));
        }
        let mut mask = vec![0.0; n * classes];
        for i in 0..n {
            if indicator(batch.tasks[i], task, &configured)? == 1 {
                mask[i * classes + batch.labels[i]] = 1.0;
            }
        }
        let mask = tape.constant(Tensor::new([n, classes], mask)?);
        let clamped = tape.clamp_min(probs, PROB_FLOOR)?;
        let logs = tape.log(clamped)?;
        let picked = tape.mul(mask, logs)?;
        let mut term = tape.sum(picked)?;
        let count = batch.count(task);
        if options.per_task_mean && count > 0 {
            term = tape.scale(term, 1.0 / count as f64)?;
        }
        total = Some(match total {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    let total = total.ok_or_else(|| Error::Contract("no task outputs".into()))?;
    tape.scale(total, -1.0)
}
