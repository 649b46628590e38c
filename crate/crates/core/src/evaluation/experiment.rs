use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::metrics::{compute_metrics, Metrics};
use super::splits::{make_split, stratified_kfold, Fold, SplitKind, SplitPlan};
use super::train::{batch_of, train_loop, TrainSchedule, EVAL_CHUNK};
use crate::data::{TaskDataset, TaskId};
use crate::error::{Error, Result};
use crate::model::{init_backbone, init_head, predict, ModelConfig, MultiTaskParams};
use crate::nn::{average_weights, checkpoint, OptimizerConfig, ParamSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    StlTau1,
    StlTau2,
    Ft,
    Mdmt,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [Self::StlTau1, Self::StlTau2, Self::Ft, Self::Mdmt];

    /// Runs whose per-fold checkpoints this kind starts from.
    pub fn prerequisites(self) -> &'static [ExperimentKind] {
        match self {
            Self::StlTau1 | Self::StlTau2 => &[],
            Self::Ft => &[Self::StlTau2],
            Self::Mdmt => &[Self::StlTau1, Self::StlTau2],
        }
    }

    /// Tasks trained and scored.
    pub fn tasks(self) -> &'static [TaskId] {
        match self {
            Self::StlTau1 | Self::Ft => &[TaskId::TAU1],
            Self::StlTau2 => &[TaskId::TAU2],
            Self::Mdmt => &[TaskId::TAU1, TaskId::TAU2],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::StlTau1 => "stl_tau1",
            Self::StlTau2 => "stl_tau2",
            Self::Ft => "ft",
            Self::Mdmt => "mdmt",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == lower)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown experiment kind {s:?}; expected stl_tau1, stl_tau2, ft or mdmt"
                ))
            })
    }
}

/// Metrics of one task on one fold's test split.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub experiment: ExperimentKind,
    pub backbone: String,
    pub fold: usize,
    pub task: TaskId,
    pub metrics: Metrics,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub seed: u64,
}

/// Everything a run needs besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub schedule: TrainSchedule,
    pub optimizer: OptimizerConfig,
    pub split: SplitKind,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule.validate()?;
        self.optimizer.validate()?;
        for task in [TaskId::TAU1, TaskId::TAU2] {
            self.model.head(task)?;
        }
        Ok(())
    }
}

/// Per-fold checkpoints. Paths encode the run and fold, so downstream runs
/// only ever see weights trained on their own fold.
#[derive(Clone, Debug)]
pub struct CheckpointStore {
    root: PathBuf,
}

impl CheckpointStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, seed: u64, split: SplitKind, kind: ExperimentKind, fold: usize) -> PathBuf {
        self.root
            .join(format!("seed-{seed}"))
            .join(split.dir_name())
            .join(kind.as_str())
            .join(format!("fold-{fold}.ckpt"))
    }
}

/// Matching split plans for both tasks; fold `i` of one pairs with fold
/// `i` of the other.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSplits {
    pub tau1: SplitPlan,
    pub tau2: SplitPlan,
}

impl TaskSplits {
    pub fn len(&self) -> usize {
        self.tau1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau1.is_empty()
    }
}

/// For leave-one-center-out the τ2 data is split by center too when it
/// comes from the same centers; otherwise it gets a stratified split with
/// as many folds as the τ1 plan.
pub fn plan_splits(tau1: &TaskDataset, tau2: &TaskDataset, kind: SplitKind, seed: u64) -> Result<TaskSplits> {
    let tau1_plan = make_split(tau1, kind, derive_seed(seed, 0, "split/tau1"))?;
    let tau2_seed = derive_seed(seed, 0, "split/tau2");
    let tau2_plan = match kind {
        SplitKind::Loco if tau2.centers() == tau1.centers() => make_split(tau2, kind, tau2_seed)?,
        _ => {
            let mut plan = stratified_kfold(tau2, tau1_plan.len(), tau2_seed)?;
            plan.kind = kind;
            plan
        }
    };
    Ok(TaskSplits { tau1: tau1_plan, tau2: tau2_plan })
}

/// Deterministic, well-mixed seed for one (run seed, fold, stream) triple.
pub fn derive_seed(seed: u64, fold: usize, stream: &str) -> u64 {
    // FNV-1a over the stream tag, folded through SplitMix64 with the seed
    // and fold so that nearby inputs land far apart.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut x = splitmix(seed ^ splitmix(fold as u64 ^ splitmix(h)));
    x ^= x >> 31;
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Checks that every fold checkpoint `kind` depends on exists.
pub fn check_prerequisites(
    kind: ExperimentKind,
    store: &CheckpointStore,
    config: &RunConfig,
    folds: usize,
) -> Result<()> {
    let mut missing = Vec::new();
    for &pre in kind.prerequisites() {
        let absent: Vec<String> = (0..folds)
            .map(|f| store.path(config.seed, config.split, pre, f))
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if !absent.is_empty() {
            missing.push(format!(
                "{kind} needs the {pre} run for seed {} and split {} first; missing {}",
                config.seed,
                config.split,
                absent.join(", ")
            ));
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingPrerequisite(missing.join("; ")))
    }
}

struct FoldData {
    train: BTreeMap<TaskId, TaskDataset>,
    val: BTreeMap<TaskId, TaskDataset>,
    test: BTreeMap<TaskId, TaskDataset>,
}

fn fold_data(kind: ExperimentKind, datasets: [&TaskDataset; 2], folds: [&Fold; 2]) -> Result<FoldData> {
    let mut data = FoldData { train: BTreeMap::new(), val: BTreeMap::new(), test: BTreeMap::new() };
    for (d, fold) in datasets.into_iter().zip(folds) {
        if !kind.tasks().contains(&d.task_id()) {
            continue;
        }
        data.train.insert(d.task_id(), d.subset(&fold.train)?);
        data.val.insert(d.task_id(), d.subset(&fold.val)?);
        data.test.insert(d.task_id(), d.subset(&fold.test)?);
    }
    Ok(data)
}

fn load_model(store: &CheckpointStore, config: &RunConfig, kind: ExperimentKind, fold: usize) -> Result<MultiTaskParams> {
    let path = store.path(config.seed, config.split, kind, fold);
    let model = MultiTaskParams::from_checkpoint(&checkpoint::load(&path)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let expected = init_backbone(&config.model.backbone, &mut rng)?;
    if !expected.shape_compatible(&model.backbone) {
        return Err(Error::Checkpoint(format!(
            "{}: backbone does not match the configured {}",
            path.display(),
            config.model.backbone.name()
        )));
    }
    Ok(model)
}

fn take_head(model: &mut MultiTaskParams, task: TaskId, source: ExperimentKind) -> Result<ParamSet> {
    model
        .heads
        .remove(&task)
        .ok_or_else(|| Error::Checkpoint(format!("{source} checkpoint has no {task} head")))
}

/// Builds the starting model of one fold.
fn initial_model(kind: ExperimentKind, config: &RunConfig, store: &CheckpointStore, fold: usize) -> Result<MultiTaskParams> {
    let seed = |stream: &str| ChaCha8Rng::seed_from_u64(derive_seed(config.seed, fold, stream));
    let dim = config.model.backbone.feature_dim()?;
    let fresh_head = |task: TaskId| -> Result<ParamSet> {
        init_head(config.model.head(task)?, dim, &mut seed(&format!("init/head/{task}")))
    };
    match kind {
        ExperimentKind::StlTau1 | ExperimentKind::StlTau2 => {
            // Both STL runs of a fold start from the same backbone draw, so
            // their trained backbones share an origin before averaging.
            let backbone = init_backbone(&config.model.backbone, &mut seed("init/backbone"))?;
            let task = kind.tasks()[0];
            Ok(MultiTaskParams { backbone, heads: BTreeMap::from([(task, fresh_head(task)?)]) })
        }
        ExperimentKind::Ft => {
            let pre = load_model(store, config, ExperimentKind::StlTau2, fold)?;
            Ok(MultiTaskParams {
                backbone: pre.backbone,
                heads: BTreeMap::from([(TaskId::TAU1, fresh_head(TaskId::TAU1)?)]),
            })
        }
        ExperimentKind::Mdmt => {
            let mut a = load_model(store, config, ExperimentKind::StlTau1, fold)?;
            let mut b = load_model(store, config, ExperimentKind::StlTau2, fold)?;
            let backbone = average_weights(&a.backbone, &b.backbone)?;
            let heads = BTreeMap::from([
                (TaskId::TAU1, take_head(&mut a, TaskId::TAU1, ExperimentKind::StlTau1)?),
                (TaskId::TAU2, take_head(&mut b, TaskId::TAU2, ExperimentKind::StlTau2)?),
            ]);
            Ok(MultiTaskParams { backbone, heads })
        }
    }
}

fn run_fold(
    kind: ExperimentKind,
    datasets: [&TaskDataset; 2],
    splits: &TaskSplits,
    config: &RunConfig,
    store: &CheckpointStore,
    fold: usize,
) -> Result<Vec<FoldResult>> {
    let data = fold_data(kind, datasets, [&splits.tau1.folds[fold], &splits.tau2.folds[fold]])?;
    let mut model = initial_model(kind, config, store, fold)?;
    let train: Vec<&TaskDataset> = data.train.values().collect();
    let val: Vec<&TaskDataset> = data.val.values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, fold, &format!("train/{kind}")));
    let history = train_loop(&mut model, &train, &val, &config.schedule, &config.optimizer, None, &mut rng)?;
    checkpoint::save(&store.path(config.seed, config.split, kind, fold), &model.to_checkpoint()?)?;

    let mut results = Vec::new();
    for (task, test) in &data.test {
        if test.is_empty() {
            continue;
        }
        let batch = batch_of(&[test])?;
        let probs = predict(&model, &batch, EVAL_CHUNK)?;
        let predictions = probs[task].argmax_rows();
        results.push(FoldResult {
            experiment: kind,
            backbone: config.model.backbone.name(),
            fold,
            task: *task,
            metrics: compute_metrics(&predictions, &batch.labels, test.num_classes())?,
            epochs_run: history.epochs_run(),
            best_epoch: history.best_epoch,
            seed: config.seed,
        });
    }
    Ok(results)
}

/// Trains and scores `kind` on every fold, in parallel on the current
/// rayon pool, writing each fold's final weights to `store`.
pub fn run_experiment(
    kind: ExperimentKind,
    tau1: &TaskDataset,
    tau2: &TaskDataset,
    splits: &TaskSplits,
    config: &RunConfig,
    store: &CheckpointStore,
) -> Result<Vec<FoldResult>> {
    config.validate()?;
    if tau1.task_id() != TaskId::TAU1 || tau2.task_id() != TaskId::TAU2 {
        return Err(Error::Contract("datasets must be given as (tau1, tau2)".into()));
    }
    if splits.tau1.len() != splits.tau2.len() {
        return Err(Error::Contract("task split plans have different fold counts".into()));
    }
    for (d, head) in [(tau1, config.model.head(TaskId::TAU1)?), (tau2, config.model.head(TaskId::TAU2)?)] {
        if d.num_classes() != head.num_classes {
            return Err(Error::Config(format!(
                "{} data has {} classes but its head has {}",
                d.task_id(),
                d.num_classes(),
                head.num_classes
            )));
        }
    }
    check_prerequisites(kind, store, config, splits.len())?;
    let per_fold: Vec<Vec<FoldResult>> = (0..splits.len())
        .into_par_iter()
        .map(|fold| run_fold(kind, [tau1, tau2], splits, config, store, fold))
        .collect::<Result<_>>()?;
    Ok(per_fold.into_iter().flatten().collect())
}
