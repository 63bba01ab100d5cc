//! Benchmark plumbing: data loading, synthetic instances, Monte Carlo
//! experiments and the invariant checker behind the `b2b` command.

pub mod check;
pub mod experiment;
pub mod matrix_market;
pub mod synthetic;

pub use check::{
    check_invariants, finite_difference_errors, finite_difference_suite, hals_column_update, near_stationary_points,
    CheckConfig, Diagnostic, InvariantReport, SuiteResult,
};
pub use experiment::{
    point_hash, run_experiment, trace_file_name, trial_seed, write_trace_csv, Aggregate, Algorithm, DataSource,
    ExperimentConfig, ExperimentOutput, MeanStd, ResultsSummary, TrialRow, JOBS_ENV, TRACE_HEADER,
};
pub use matrix_market::{load_matrix, read_matrix_market, write_matrix_market_array};
pub use synthetic::{generate_synthetic, SyntheticData};
