//! Reference experiments: synthetic datasets, scoring, multi-trial runs and
//! plot output.

pub mod data;
pub mod plot;
pub mod runner;
pub mod score;

pub use data::{example1_params, example2_params, generate_example1, generate_example2, sample_mixture, DEFAULT_N};
pub use plot::{ellipse_points, emit_plot_data, emit_scatter, ChartKind, Table};
pub use runner::{
    delta_sweep, delta_sweep_on, run_benchmark, run_benchmark_on, run_trial, write_report, Algorithm, BenchmarkReport,
    Example, ExperimentConfig, KMeansSettings, SweepRow, TrialOutcome,
};
pub use score::success_rate;
