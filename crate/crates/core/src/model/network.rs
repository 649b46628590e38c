use std::collections::BTreeMap;

use rand::Rng;

use crate::data::{MixedBatch, TaskId};
use crate::error::{Error, Result};
use crate::nn::{kaiming_uniform, linear, BoundParams, ParamSet};
use crate::tensor::{Gradients, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvBlock {
    pub filters: usize,
    pub kernel: usize,
}

/// `FxK`, e.g. `8x3` for eight 3×3 filters.
impl std::str::FromStr for ConvBlock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("conv block {s:?}: expected FILTERSxKERNEL, e.g. 8x3"));
        let (f, k) = s.trim().split_once('x').ok_or_else(bad)?;
        Ok(Self {
            filters: f.parse().map_err(|_| bad())?,
            kernel: k.parse().map_err(|_| bad())?,
        })
    }
}

impl std::fmt::Display for ConvBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.filters, self.kernel)
    }
}

/// Shared feature extractor: per block a stride-1 "same" convolution, ReLU
/// and 2×2 max pooling, followed by a flatten.
#[derive(Clone, Debug, PartialEq)]
pub struct BackboneConfig {
    pub input_channels: usize,
    /// Square input side length.
    pub input_size: usize,
    pub conv_blocks: Vec<ConvBlock>,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            input_channels: 1,
            input_size: 32,
            conv_blocks: vec![
                ConvBlock { filters: 4, kernel: 3 },
                ConvBlock { filters: 8, kernel: 3 },
            ],
        }
    }
}

impl BackboneConfig {
    /// Spatial side length after every block, or an error if a block would
    /// shrink the map below what pooling needs.
    fn spatial_sizes(&self) -> Result<Vec<usize>> {
        if self.conv_blocks.is_empty() {
            return Err(Error::Config("backbone needs at least one conv block".into()));
        }
        if self.input_channels == 0 {
            return Err(Error::Config("backbone.input_channels must be positive".into()));
        }
        let mut size = self.input_size;
        let mut sizes = Vec::new();
        for (i, block) in self.conv_blocks.iter().enumerate() {
            if block.filters == 0 || block.kernel == 0 {
                return Err(Error::Config(format!("conv block {i} has a zero extent")));
            }
            let pad = block.kernel / 2;
            if size + 2 * pad < block.kernel {
                return Err(Error::Config(format!("conv block {i} kernel exceeds its input")));
            }
            let conv = size + 2 * pad - block.kernel + 1;
            if conv < 2 {
                return Err(Error::Config(format!(
                    "conv block {i} output {conv}x{conv} is too small to pool"
                )));
            }
            size = conv / 2;
            sizes.push(size);
        }
        Ok(sizes)
    }

    pub fn validate(&self) -> Result<()> {
        self.spatial_sizes().map(|_| ())
    }

    /// Short architecture tag such as `cnn-8k3-16k3`.
    pub fn name(&self) -> String {
        let mut s = String::from("cnn");
        for b in &self.conv_blocks {
            s.push_str(&format!("-{}k{}", b.filters, b.kernel));
        }
        s
    }

    /// Width of the flattened feature vector.
    pub fn feature_dim(&self) -> Result<usize> {
        let side = *self.spatial_sizes()?.last().unwrap();
        Ok(self.conv_blocks.last().unwrap().filters * side * side)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadConfig {
    pub task_id: TaskId,
    pub hidden: Vec<usize>,
    pub num_classes: usize,
}

impl HeadConfig {
    /// A head with one hidden layer of 64 units and the task's canonical
    /// class count.
    pub fn canonical(task_id: TaskId) -> Self {
        Self {
            task_id,
            hidden: vec![16],
            num_classes: task_id.canonical_classes().unwrap_or(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config(format!("{} head needs at least 2 classes", self.task_id)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config(format!("{} head has an empty hidden layer", self.task_id)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub backbone: BackboneConfig,
    pub heads: Vec<HeadConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backbone: BackboneConfig::default(),
            heads: vec![
                HeadConfig::canonical(TaskId::TAU1),
                HeadConfig::canonical(TaskId::TAU2),
            ],
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        for (i, h) in self.heads.iter().enumerate() {
            h.validate()?;
            if self.heads[..i].iter().any(|o| o.task_id == h.task_id) {
                return Err(Error::Config(format!("two heads for {}", h.task_id)));
            }
        }
        Ok(())
    }

    pub fn head(&self, task: TaskId) -> Result<&HeadConfig> {
        self.heads
            .iter()
            .find(|h| h.task_id == task)
            .ok_or_else(|| Error::Config(format!("no head configured for {task}")))
    }
}

pub fn init_backbone<R: Rng + ?Sized>(config: &BackboneConfig, rng: &mut R) -> Result<ParamSet> {
    config.validate()?;
    let mut params = ParamSet::new();
    let mut channels = config.input_channels;
    for (i, block) in config.conv_blocks.iter().enumerate() {
        let fan_in = channels * block.kernel * block.kernel;
        let shape = [block.filters, channels, block.kernel, block.kernel];
        params.insert(format!("conv{i}.weight"), kaiming_uniform(rng, &shape, fan_in))?;
        params.insert(format!("conv{i}.bias"), Tensor::zeros([block.filters]))?;
        channels = block.filters;
    }
    Ok(params)
}

pub fn init_head<R: Rng + ?Sized>(config: &HeadConfig, input_dim: usize, rng: &mut R) -> Result<ParamSet> {
    config.validate()?;
    let mut params = ParamSet::new();
    let mut width = input_dim;
    let widths = config.hidden.iter().copied().chain([config.num_classes]);
    for (i, out) in widths.enumerate() {
        params.insert(format!("fc{i}.weight"), kaiming_uniform(rng, &[width, out], width))?;
        params.insert(format!("fc{i}.bias"), Tensor::zeros([out]))?;
        width = out;
    }
    Ok(params)
}

fn layer_count(bound: &BoundParams, prefix: &str) -> usize {
    bound
        .names()
        .filter(|n| n.starts_with(prefix) && n.ends_with(".weight"))
        .count()
}

/// H = f^s(X; θ^s) on the tape.
pub fn backbone_forward_tape(tape: &mut Tape, images: Var, backbone: &BoundParams) -> Result<Var> {
    let blocks = layer_count(backbone, "conv");
    if blocks == 0 {
        return Err(Error::Contract("backbone has no conv blocks".into()));
    }
    let mut x = images;
    for i in 0..blocks {
        let kernel = backbone.get(&format!("conv{i}.weight"))?;
        let bias = backbone.get(&format!("conv{i}.bias"))?;
        let k = tape.shape(kernel)[2];
        x = tape.conv2d(x, kernel, Some(bias), 1, k / 2)?;
        x = tape.relu(x)?;
        x = tape.maxpool2d(x)?;
    }
    tape.flatten(x)
}

/// O^τ = f^τ(H; θ^τ) on the tape: dense layers with ReLU between them and a
/// softmax at the end.
pub fn head_forward_tape(tape: &mut Tape, features: Var, head: &BoundParams) -> Result<Var> {
    let layers = layer_count(head, "fc");
    if layers == 0 {
        return Err(Error::Contract("head has no layers".into()));
    }
    let mut x = features;
    for i in 0..layers {
        let w = head.get(&format!("fc{i}.weight"))?;
        let b = head.get(&format!("fc{i}.bias"))?;
        x = linear(tape, x, w, b)?;
        if i + 1 < layers {
            x = tape.relu(x)?;
        }
    }
    tape.softmax(x)
}

/// Eager backbone pass for an N×C×H×W batch.
pub fn backbone_forward(images: &Tensor, backbone: &ParamSet) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.constant(images.clone());
    let bound = backbone.bind_frozen(&mut tape);
    let h = backbone_forward_tape(&mut tape, x, &bound)?;
    Ok(tape.value(h).clone())
}

/// Eager head pass; rows of the result are probability vectors.
pub fn head_forward(features: &Tensor, head: &ParamSet) -> Result<Tensor> {
    let mut tape = Tape::new();
    let h = tape.constant(features.clone());
    let bound = head.bind_frozen(&mut tape);
    let o = head_forward_tape(&mut tape, h, &bound)?;
    Ok(tape.value(o).clone())
}

/// θ^s plus one θ^τ per configured task.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiTaskParams {
    pub backbone: ParamSet,
    pub heads: BTreeMap<TaskId, ParamSet>,
}

pub struct BoundModel {
    pub backbone: BoundParams,
    pub heads: BTreeMap<TaskId, BoundParams>,
}

pub struct ModelOutputs {
    pub features: Var,
    pub heads: BTreeMap<TaskId, Var>,
}

const BACKBONE_PREFIX: &str = "backbone/";
const HEAD_PREFIX: &str = "head/";

impl MultiTaskParams {
    pub fn tasks(&self) -> Vec<TaskId> {
        self.heads.keys().copied().collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.backbone.num_scalars() + self.heads.values().map(ParamSet::num_scalars).sum::<usize>()
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundModel {
        BoundModel {
            backbone: self.backbone.bind(tape),
            heads: self.heads.iter().map(|(t, p)| (*t, p.bind(tape))).collect(),
        }
    }

    pub fn attach_grads(&mut self, bound: &BoundModel, grads: &mut Gradients) -> Result<()> {
        self.backbone.attach_grads(&bound.backbone, grads)?;
        for (task, params) in self.heads.iter_mut() {
            let b = bound
                .heads
                .get(task)
                .ok_or_else(|| Error::Contract(format!("{task} head was not bound")))?;
            params.attach_grads(b, grads)?;
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        self.backbone.clear_grads();
        for p in self.heads.values_mut() {
            p.clear_grads();
        }
    }

    /// Backbone then heads in task order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.backbone.flatten();
        for p in self.heads.values() {
            v.extend(p.flatten());
        }
        v
    }

    pub fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_scalars() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_scalars()
            )));
        }
        let mut offset = self.backbone.num_scalars();
        self.backbone.load_flat(&values[..offset])?;
        for p in self.heads.values_mut() {
            let n = p.num_scalars();
            p.load_flat(&values[offset..offset + n])?;
            offset += n;
        }
        Ok(())
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        let mut v = self.backbone.flat_grads();
        for p in self.heads.values() {
            v.extend(p.flat_grads());
        }
        v
    }

    /// One set with `backbone/` and `head/<task>/` name prefixes.
    pub fn to_checkpoint(&self) -> Result<ParamSet> {
        let mut out = ParamSet::new();
        for (name, t) in self.backbone.iter() {
            out.insert(format!("{BACKBONE_PREFIX}{name}"), t.detached())?;
        }
        for (task, params) in &self.heads {
            for (name, t) in params.iter() {
                out.insert(format!("{HEAD_PREFIX}{task}/{name}"), t.detached())?;
            }
        }
        Ok(out)
    }

    pub fn from_checkpoint(set: &ParamSet) -> Result<Self> {
        let mut backbone = ParamSet::new();
        let mut heads: BTreeMap<TaskId, ParamSet> = BTreeMap::new();
        for (name, t) in set.iter() {
            if let Some(rest) = name.strip_prefix(BACKBONE_PREFIX) {
                backbone.insert(rest, t.clone())?;
            } else if let Some((task, rest)) = name
                .strip_prefix(HEAD_PREFIX)
                .and_then(|r| r.split_once('/'))
            {
                heads.entry(task.parse()?).or_default().insert(rest, t.clone())?;
            } else {
                return Err(Error::Checkpoint(format!("unexpected parameter name {name:?}")));
            }
        }
        if backbone.is_empty() {
            return Err(Error::Checkpoint("checkpoint holds no backbone".into()));
        }
        Ok(Self { backbone, heads })
    }
}

/// Runs the backbone once and every head on the full batch.
pub fn forward(tape: &mut Tape, bound: &BoundModel, images: &Tensor) -> Result<ModelOutputs> {
    let x = tape.constant(images.clone());
    let features = backbone_forward_tape(tape, x, &bound.backbone)?;
    let mut heads = BTreeMap::new();
    for (task, head) in &bound.heads {
        heads.insert(*task, head_forward_tape(tape, features, head)?);
    }
    Ok(ModelOutputs { features, heads })
}

/// Class probabilities of every head for a batch, computed in chunks.
pub fn predict(params: &MultiTaskParams, batch: &MixedBatch, chunk: usize) -> Result<BTreeMap<TaskId, Tensor>> {
    let n = batch.len();
    let chunk = chunk.max(1);
    let mut rows: BTreeMap<TaskId, Vec<f64>> = BTreeMap::new();
    let mut widths = BTreeMap::new();
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let part = batch.select(&(start..end).collect::<Vec<_>>())?;
        let h = backbone_forward(&part.images, &params.backbone)?;
        for (task, head) in &params.heads {
            let o = head_forward(&h, head)?;
            widths.insert(*task, o.shape()[1]);
            rows.entry(*task).or_default().extend_from_slice(o.data());
        }
        start = end;
    }
    rows.into_iter()
        .map(|(task, data)| Ok((task, Tensor::new([n, widths[&task]], data)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_feature_dim() {
        assert_eq!(BackboneConfig::default().feature_dim().unwrap(), 8 * 8 * 8);
    }

    #[test]
    fn config_validation() {
        let empty = BackboneConfig {
            conv_blocks: vec![],
            ..Default::default()
        };
        assert!(empty.validate().is_err());
        let too_small = BackboneConfig {
            input_size: 3,
            ..Default::default()
        };
        assert!(too_small.validate().is_err());
        let mut dup = ModelConfig::default();
        dup.heads.push(HeadConfig::canonical(TaskId::TAU1));
        assert!(dup.validate().is_err());
    }

    #[test]
    fn zero_input_gives_zero_features() {
        let cfg = BackboneConfig {
            input_size: 8,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let theta = init_backbone(&cfg, &mut rng).unwrap();
        let h = backbone_forward(&Tensor::zeros([3, 1, 8, 8]), &theta).unwrap();
        assert_eq!(h.shape(), &[3, cfg.feature_dim().unwrap()]);
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_head_is_uniform() {
        let cfg = HeadConfig::canonical(TaskId::TAU2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut head = init_head(&cfg, 10, &mut rng).unwrap();
        for (_, t) in head.iter_mut() {
            t.data_mut().fill(0.0);
        }
        let o = head_forward(&Tensor::zeros([2, 10]), &head).unwrap();
        assert!(o.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn head_width_mismatch() {
        let cfg = HeadConfig::canonical(TaskId::TAU1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = init_head(&cfg, 10, &mut rng).unwrap();
        assert!(matches!(
            head_forward(&Tensor::zeros([2, 11]), &head),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn checkpoint_names_roundtrip() {
        let cfg = ModelConfig {
            backbone: BackboneConfig {
                input_size: 8,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dim = cfg.backbone.feature_dim().unwrap();
        let params = MultiTaskParams {
            backbone: init_backbone(&cfg.backbone, &mut rng).unwrap(),
            heads: cfg
                .heads
                .iter()
                .map(|h| (h.task_id, init_head(h, dim, &mut rng).unwrap()))
                .collect(),
        };
        let set = params.to_checkpoint().unwrap();
        assert!(set.iter().any(|(n, _)| n == "backbone/conv0.weight"));
        assert!(set.iter().any(|(n, _)| n == "head/tau2/fc1.bias"));
        assert_eq!(MultiTaskParams::from_checkpoint(&set).unwrap(), params);
    }
}
