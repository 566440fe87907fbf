//! LMS, fractional LMS and momentum fractional LMS adaptive filters, the
//! multi-harmonic power-signal estimation benchmark, and a seeded
//! Monte-Carlo harness comparing the filters at equal convergence speed.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod filters;
pub mod kernels;
pub mod metrics;
pub mod reporting;
pub mod signal_model;

pub use experiment::{
    calibrate_mu1, full_grid, run_monte_carlo, run_single, AggregateResult, ExperimentConfig, NoiseLevel,
    NoiseReading, RunTrajectory, ScenarioConfig,
};
pub use filters::{make_filter, FilterParams, FilterState, StepRecord, Variant};
pub use metrics::{mse, nwd, MetricSpace};
