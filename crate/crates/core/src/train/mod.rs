//! Training protocol, metrics, repeated runs, sweeps and explanations.

mod config;
mod explain;
pub mod metrics;
mod repeat;
mod report;
mod sweep;
mod trainer;

pub use config::{TrainConfig, CONFIG_KEYS};
pub use explain::{explain, mean_level, Explanation, ExplanationRow};
pub use metrics::{LevelScale, Metrics};
pub use repeat::{repeat_runs, run_seed, summarize, RepeatSummary, RunRecord};
pub use report::{repeat_report, report_file_name, write_json, RunReport, SplitSizes};
pub use sweep::{sweep, SweepAxis, SweepCell, SweepTable};
pub use trainer::{
    evaluate, fit, init_params, prepare_data, train, DataSplit, Evaluation, FitOutcome, History, Prediction,
    TrainOutcome,
};
