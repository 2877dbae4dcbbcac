//! Splits, optimization, metrics and evaluation protocols.

pub mod adam;
pub mod experiment;
pub mod metrics;
pub mod split;
pub mod trainer;

pub use adam::{adam_step, AdamState};
pub use experiment::{
    build_model, grid_search, run_once, run_once_observed, run_protocol, AnyModel, BuiltModel, Experiment, Grid,
    GridCell, GridResult, Metrics, ModelSpec, PathMlpSettings, RunArtifacts, RunSummary,
};
pub use metrics::{evaluate, evaluate_accuracy, evaluate_auc, mean_std, roc_auc, Metric};
pub use split::{make_random_split, Split, SplitProfile};
pub use trainer::{predict, score, train, train_observed, EpochRecord, TrainConfig, TrainOutcome};
