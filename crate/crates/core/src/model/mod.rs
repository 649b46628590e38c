//! A convolutional backbone shared by per-task heads, trained with a joint
//! loss that masks each head to its own task's samples.

mod loss;
mod network;

pub use loss::{cross_entropy, indicator, total_loss, LossOptions, PROB_FLOOR};
pub use network::{
    backbone_forward, backbone_forward_tape, forward, head_forward, head_forward_tape,
    init_backbone, init_head, predict, BackboneConfig, BoundModel, ConvBlock, HeadConfig,
    ModelConfig, ModelOutputs, MultiTaskParams,
};
