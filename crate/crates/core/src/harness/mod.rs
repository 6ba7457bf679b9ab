//! Repeated-split experiments over the configured models and balance modes,
//! and the reports they produce.

mod config;
mod report;
mod run;

pub use config::{
    DatasetSource, DselPolicy, ExperimentConfig, HardnessConfig, HardnessData, ModelId,
    SelectionPool,
};
pub use report::{
    balanced_arm, balanced_ranking, compare_balancing, dynamic_selection_leads, emit_reports,
    read_results_csv, results_markdown, write_comparison_csv, write_hardness, write_results_csv,
    ComparisonRow, OrdinalCheck, ReportBundle, COMPARISON_CSV, MANIFEST_JSON, RESULTS_CSV,
    RESULTS_MD, RUNS_CSV,
};
pub use run::{
    run_cell, run_experiment, run_experiment_on, run_hardness, stream_seed, AggregateRow,
    ArmFailure, ExperimentOutcome, RunRecord, SplitInfo,
};
