//! Data preparation, simulation, experiments and reports.

pub mod dataset;
pub mod experiment;
pub mod graph_build;
pub mod metrics;
pub mod report;
pub mod simulate;
pub mod synth;

pub use dataset::{ingest_csv, normalize_by_train_mean, read_series, write_series, DataSource, DatasetSpec, Splits};
pub use experiment::{
    prepare, run_experiment, run_range, standard_lineup, validation_sweep, AlgorithmMetrics, AlgorithmRun,
    ExperimentConfig, MetricsReport, Preset, PreparedData,
};
pub use graph_build::{abs_correlation_matrix, build_initial_graph, GraphBuildSpec};
pub use metrics::{degree_curve, degree_from_counts, mse_curve, tail_mean};
pub use report::{summarize_reports, write_report, Manifest, ReportSummary};
pub use simulate::{node_variances, simulate_observations, NoiseMaskSpec};
pub use synth::{make_synthetic_dataset, SyntheticDataset, SyntheticSpec};
