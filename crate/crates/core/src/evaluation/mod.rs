//! Experiment execution: fold plans, training and test-set scoring.

mod experiment;
mod metrics;
mod results;
mod splits;
mod train;

pub use experiment::{
    check_prerequisites, derive_seed, plan_splits, run_experiment, CheckpointStore, ExperimentKind,
    FoldResult, RunConfig, TaskSplits,
};
pub use metrics::{compute_metrics, confusion_matrix, Metrics};
pub use results::{parse_results, read_results, results_to_csv, write_results, ResultsFile, RESULTS_SCHEMA_VERSION};
pub use splits::{loco_split, make_split, stratified_kfold, Fold, SplitKind, SplitPlan, VALIDATION_FRACTION};
pub use train::{
    batch_of, evaluate_loss, train_loop, EarlyStopping, EpochRecord, StopDecision, TrainHistory,
    TrainSchedule, EVAL_CHUNK,
};
