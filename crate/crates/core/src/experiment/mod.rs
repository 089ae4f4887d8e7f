//! Experiment protocol: baselines and preferences, grid runs over label
//! sets × methods × preferences × seeds, improvement over a reference model,
//! and the CSV reports.

pub mod config;
pub mod grid;
pub mod protocol;
pub mod reference;
pub mod report;

pub use config::{DataConfig, EpsilonConfig, ExperimentConfig, MethodSpec, MetricConfig, ReferenceConfig};
pub use grid::{
    comparison_pairs, prepare_label_sets, run_grid, run_grid_on, Comparison, GridReport, HviRow, LabelSetContext,
    MethodSummary, RunMetrics, RunResult,
};
pub use protocol::{
    evaluate, generate_epsilon_bounds, generate_rays, load_data, preference_mwl, preferences_for,
    single_objective_baselines, Baseline, DataBundle, Evaluation,
};
pub use reference::{
    build_reference_model, explore_from_reference, reference_preferences, ReferenceMetrics, ReferenceReport,
    ReferenceRun, ReferenceSummary,
};
pub use report::{write_aggregate, write_grid_report, write_hvi, write_reference_report, write_runs, write_summary};
