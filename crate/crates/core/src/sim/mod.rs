//! Monte Carlo experiment harness.

mod config;
mod run;

pub use config::{
    db_to_linear, linear_to_db, Averaging, ExperimentConfig, PointParams, Scenario, SchemeTag, Sweep, SweepAxis,
};
pub use run::{
    run_ecsi_comparison, run_experiment, run_prediction_comparison, Estimate, Metadata, PointStats, SinrStats, SweepResult,
    VALIDITY_LIMIT_DB, VERSION,
};
