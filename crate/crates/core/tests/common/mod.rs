#![allow(dead_code)]

pub mod oracles;

use std::collections::BTreeMap;

use mdmt::data::{MixedBatch, TaskId, TaskSample};
use mdmt::model::{
    forward, init_backbone, init_head, total_loss, BackboneConfig, ConvBlock, HeadConfig,
    LossOptions, ModelConfig, MultiTaskParams,
};
use mdmt::tensor::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const T1: TaskId = TaskId::TAU1;
pub const T2: TaskId = TaskId::TAU2;

/// Two 3×3 conv blocks on 8×8 inputs and 8-unit hidden heads: 514 parameters.
pub fn small_config() -> ModelConfig {
    ModelConfig {
        backbone: BackboneConfig {
            input_channels: 1,
            input_size: 8,
            conv_blocks: vec![
                ConvBlock { filters: 4, kernel: 3 },
                ConvBlock { filters: 4, kernel: 3 },
            ],
        },
        heads: vec![
            HeadConfig { task_id: T1, hidden: vec![8], num_classes: 2 },
            HeadConfig { task_id: T2, hidden: vec![8], num_classes: 4 },
        ],
    }
}

pub fn init_model(config: &ModelConfig, seed: u64) -> MultiTaskParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = config.backbone.feature_dim().unwrap();
    MultiTaskParams {
        backbone: init_backbone(&config.backbone, &mut rng).unwrap(),
        heads: config
            .heads
            .iter()
            .map(|h| (h.task_id, init_head(h, dim, &mut rng).unwrap()))
            .collect(),
    }
}

/// A batch of `n` samples; each is τ1 with probability `p_tau1`.
pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, size: usize, p_tau1: f64) -> MixedBatch {
    let samples: Vec<TaskSample> = (0..n)
        .map(|i| {
            let task = if rng.gen_bool(p_tau1) { T1 } else { T2 };
            let classes = task.canonical_classes().unwrap();
            TaskSample {
                sample_id: format!("s{i}"),
                image: Tensor::new(
                    [1, size, size],
                    (0..size * size).map(|_| rng.gen_range(0.0..1.0)).collect(),
                )
                .unwrap(),
                label: rng.gen_range(0..classes),
                task_id: task,
                center_id: "c".into(),
            }
        })
        .collect();
    let refs: Vec<&TaskSample> = samples.iter().collect();
    MixedBatch::from_samples(&refs, &BTreeMap::from([(T1, 2), (T2, 4)])).unwrap()
}

/// Joint loss value and flat gradient (backbone, then heads in task order).
pub fn loss_and_grad(params: &MultiTaskParams, batch: &MixedBatch) -> (f64, Vec<f64>) {
    let mut params = params.clone();
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let out = forward(&mut tape, &bound, &batch.images).unwrap();
    let loss = total_loss(&mut tape, batch, &out.heads, LossOptions::default()).unwrap();
    let value = tape.value(loss).item();
    let mut grads = tape.backward(loss).unwrap();
    params.attach_grads(&bound, &mut grads).unwrap();
    (value, params.flat_grads())
}

pub fn loss_value(params: &MultiTaskParams, batch: &MixedBatch) -> f64 {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let out = forward(&mut tape, &bound, &batch.images).unwrap();
    let loss = total_loss(&mut tape, batch, &out.heads, LossOptions::default()).unwrap();
    tape.value(loss).item()
}
