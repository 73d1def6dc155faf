//! Splits, metrics and the experiment protocols.

mod experiments;
mod metrics;
mod split;

pub use experiments::{
    comparison_table, depth_table, format_table, run_comparison, run_depth_study, run_split_sweep,
    write_comparison_csv, write_depth_csv, ComparisonRow, DepthRow, Experiment, ExperimentConfig, Method,
};
pub use metrics::{evaluate, Metrics, MetricsReport};
pub use split::{make_splits, stratified_split, Split, SplitRatio};
