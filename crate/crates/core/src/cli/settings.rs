use std::path::{Path, PathBuf};

use crate::config::{RawConfig, Resolved};
use crate::data::{SynthConfig, TaskId};
use crate::error::{Error, Result};
use crate::evaluation::{ExperimentKind, RunConfig, SplitKind, TrainSchedule};
use crate::model::{BackboneConfig, ConvBlock, HeadConfig, ModelConfig};
use crate::nn::OptimizerConfig;
use crate::stats::Pairing;

/// Where the two task datasets come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Manifests { tau1: PathBuf, tau2: PathBuf },
    /// Generated into `<out>/data` before use.
    Synth { config: SynthConfig, seed: u64 },
}

/// Every setting of a command after defaults and flags are applied.
#[derive(Clone, Debug)]
pub struct Settings {
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub experiment: Option<ExperimentKind>,
    pub split: SplitKind,
    pub data: DataSource,
    pub image_size: usize,
    pub model: ModelConfig,
    pub schedule: TrainSchedule,
    pub optimizer: OptimizerConfig,
    pub checkpoints: PathBuf,
    pub pipeline_seeds: usize,
    pub pipeline_splits: Vec<SplitKind>,
    /// `None` picks backbone pairing when there are at least two runs and
    /// fold pairing otherwise.
    pub pairing: Option<Pairing>,
    pub task: TaskId,
    /// Every resolved setting with its source, for the run log.
    pub log: Vec<Resolved>,
}

impl Settings {
    pub fn run_config(&self, seed: u64, split: SplitKind) -> RunConfig {
        RunConfig {
            model: self.model.clone(),
            schedule: self.schedule,
            optimizer: self.optimizer.clone(),
            split,
            seed,
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Resolves every known key of `raw`; unknown keys and bad values are
/// reported together as one config error.
pub fn resolve(raw: &RawConfig) -> Result<Settings> {
    let mut r = raw.resolver();
    let seed: u64 = r.get("seed", 0);
    let out: PathBuf = PathBuf::from(r.get("out", "runs".to_string()));
    let jobs: usize = r.get("jobs", default_jobs());
    if jobs == 0 {
        r.error("jobs must be at least 1");
    }
    let experiment: Option<ExperimentKind> = r.get_optional("experiment");
    let split: SplitKind = r.get("split", SplitKind::Cv(5));

    let tau1: Option<String> = r.get_optional("data.tau1");
    let tau2: Option<String> = r.get_optional("data.tau2");
    let defaults = SynthConfig::default();
    let synth = SynthConfig {
        n_tau1: r.get("synth.n_tau1", defaults.n_tau1),
        n_tau2: r.get("synth.n_tau2", defaults.n_tau2),
        image_size: r.get("synth.image_size", defaults.image_size),
        n_centers: r.get("synth.n_centers", defaults.n_centers),
        label_noise: r.get("synth.label_noise", defaults.label_noise),
        pixel_noise: r.get("synth.pixel_noise", defaults.pixel_noise),
        center_shift: r.get("synth.center_shift", defaults.center_shift),
    };
    let synth_seed: u64 = r.get("synth.seed", seed);
    let data = match (tau1, tau2) {
        (Some(a), Some(b)) => {
            for (key, p) in [("data.tau1", &a), ("data.tau2", &b)] {
                if !Path::new(p).is_file() {
                    r.error(format!("{key} = {p}: no such file"));
                }
            }
            DataSource::Manifests { tau1: a.into(), tau2: b.into() }
        }
        (None, None) => {
            if let Err(e) = synth.validate() {
                r.error(e.to_string());
            }
            DataSource::Synth { config: synth.clone(), seed: synth_seed }
        }
        _ => {
            r.error("data.tau1 and data.tau2 must be given together");
            DataSource::Synth { config: synth.clone(), seed: synth_seed }
        }
    };
    let image_size: usize = r.get("data.image_size", synth.image_size);

    let default_model = ModelConfig::default();
    let blocks: Vec<ConvBlock> = r.get_list("model.conv_blocks", &default_model.backbone.conv_blocks);
    let mut heads = Vec::new();
    for task in [TaskId::TAU1, TaskId::TAU2] {
        let canonical = HeadConfig::canonical(task);
        heads.push(HeadConfig {
            task_id: task,
            hidden: r.get_list(&format!("model.{task}.hidden"), &canonical.hidden),
            num_classes: r.get(&format!("model.{task}.num_classes"), canonical.num_classes),
        });
    }
    let model = ModelConfig {
        backbone: BackboneConfig {
            input_channels: 1,
            input_size: image_size,
            conv_blocks: blocks,
        },
        heads,
    };
    if let Err(e) = model.validate() {
        r.error(e.to_string());
    }

    let preset = r.get("schedule.preset", "desk".to_string());
    let base = match preset.as_str() {
        "desk" => TrainSchedule::DESK,
        "full" => TrainSchedule::FULL,
        other => {
            r.error(format!("schedule.preset = {other:?}: expected desk or full"));
            TrainSchedule::DESK
        }
    };
    let schedule = TrainSchedule {
        max_epochs: r.get("schedule.max_epochs", base.max_epochs),
        warmup_epochs: r.get("schedule.warmup_epochs", base.warmup_epochs),
        patience: r.get("schedule.patience", base.patience),
        batch_size: r.get("schedule.batch_size", base.batch_size),
    };
    if let Err(e) = schedule.validate() {
        r.error(e.to_string());
    }
    let d = OptimizerConfig::default();
    let optimizer = OptimizerConfig {
        learning_rate: r.get("optimizer.learning_rate", d.learning_rate),
        beta1: r.get("optimizer.beta1", d.beta1),
        beta2: r.get("optimizer.beta2", d.beta2),
        epsilon: r.get("optimizer.epsilon", d.epsilon),
        weight_decay: r.get("optimizer.weight_decay", d.weight_decay),
    };
    if let Err(e) = optimizer.validate() {
        r.error(e.to_string());
    }

    let checkpoints = PathBuf::from(r.get("checkpoints.dir", out.join("checkpoints").display().to_string()));
    let pipeline_seeds: usize = r.get("pipeline.seeds", 10);
    if pipeline_seeds == 0 {
        r.error("pipeline.seeds must be at least 1");
    }
    let pipeline_splits: Vec<SplitKind> = r.get_list("pipeline.splits", &[SplitKind::Cv(5), SplitKind::Loco]);
    let pairing_text = r.get("compare.pairing", "auto".to_string());
    let pairing = match pairing_text.as_str() {
        "auto" => None,
        other => match other.parse() {
            Ok(p) => Some(p),
            Err(e) => {
                r.error(format!("compare.pairing: {e}"));
                None
            }
        },
    };
    let task: TaskId = r.get("report.task", TaskId::TAU1);

    let log = r.finish()?;
    Ok(Settings {
        seed,
        out,
        jobs,
        experiment,
        split,
        data,
        image_size,
        model,
        schedule,
        optimizer,
        checkpoints,
        pipeline_seeds,
        pipeline_splits,
        pairing,
        task,
        log,
    })
}

/// Config file (if any) with command-line overrides applied.
pub fn load_raw(path: Option<&Path>) -> Result<RawConfig> {
    match path {
        Some(p) if !p.is_file() => Err(Error::Config(format!("config file {} not found", p.display()))),
        Some(p) => RawConfig::load(p),
        None => Ok(RawConfig::default()),
    }
}
