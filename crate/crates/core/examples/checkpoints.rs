//! Saves a freshly initialized two-head model and reloads it bit-exactly.

use mdmt::data::TaskId;
use mdmt::model::{init_backbone, init_head, ModelConfig, MultiTaskParams};
use mdmt::nn::checkpoint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mdmt::Result<()> {
    let config = ModelConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let dim = config.backbone.feature_dim()?;
    let model = MultiTaskParams {
        backbone: init_backbone(&config.backbone, &mut rng)?,
        heads: config
            .heads
            .iter()
            .map(|h| Ok((h.task_id, init_head(h, dim, &mut rng)?)))
            .collect::<mdmt::Result<_>>()?,
    };
    let dir = tempfile::tempdir().expect("temporary directory");
    let path = dir.path().join("model.ckpt");
    checkpoint::save(&path, &model.to_checkpoint()?)?;
    let loaded = MultiTaskParams::from_checkpoint(&checkpoint::load(&path)?)?;
    let same = model.flatten().iter().zip(loaded.flatten()).all(|(a, b)| a.to_bits() == b.to_bits());
    println!(
        "{} parameters ({} backbone, {} tau1 head, {} tau2 head), {} bytes on disk, bit-exact reload: {same}",
        model.num_scalars(),
        model.backbone.num_scalars(),
        model.heads[&TaskId::TAU1].num_scalars(),
        model.heads[&TaskId::TAU2].num_scalars(),
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0)
    );
    Ok(())
}
