//! Runs the four experiment kinds in dependency order on a small synthetic
//! benchmark and prints per-task test metrics.

use mdmt::data::{synth_generate, SynthConfig};
use mdmt::evaluation::{plan_splits, run_experiment, CheckpointStore, ExperimentKind, RunConfig, SplitKind, TrainSchedule};
use mdmt::model::{BackboneConfig, ModelConfig};

fn main() -> mdmt::Result<()> {
    let synth = SynthConfig { n_tau1: 200, n_tau2: 400, image_size: 16, ..SynthConfig::default() };
    let data = synth_generate(&synth, 1)?;
    let mut model = ModelConfig::default();
    model.backbone = BackboneConfig { input_size: 16, ..model.backbone };
    let config = RunConfig {
        model,
        schedule: TrainSchedule { max_epochs: 20, warmup_epochs: 3, patience: 4, batch_size: 32 },
        optimizer: Default::default(),
        split: SplitKind::Cv(3),
        seed: 1,
    };
    let splits = plan_splits(&data.tau1, &data.tau2, config.split, config.seed)?;
    let dir = tempfile::tempdir().expect("temporary directory");
    let store = CheckpointStore::new(dir.path());
    for kind in ExperimentKind::ALL {
        let results = run_experiment(kind, &data.tau1, &data.tau2, &splits, &config, &store)?;
        for task in kind.tasks() {
            let rows: Vec<_> = results.iter().filter(|r| r.task == *task).collect();
            let acc = rows.iter().map(|r| r.metrics.acc).sum::<f64>() / rows.len() as f64;
            let epochs: Vec<_> = rows.iter().map(|r| r.epochs_run).collect();
            println!("{kind:<9} {task}: mean ACC {:.3}, epochs per fold {epochs:?}", acc);
        }
    }
    Ok(())
}
