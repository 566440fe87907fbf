//! Seeded Monte-Carlo engine for the power-signal benchmark.
//!
//! Each run draws standard-normal initial weights, then adapts for
//! `n_iters` samples of the benchmark signal, recording the fitness at every
//! checkpoint. Runs are independent and are dispatched to the ambient rayon
//! pool; ensemble means are always accumulated in ascending run order, so
//! results are bit-identical for any worker count.

mod calibration;
mod grid;
pub mod rng;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::filters::{FilterError, FilterParams, FilterState};
use crate::kernels::dot;
use crate::metrics::{mse, nwd, MetricError, MetricSpace};
use crate::signal_model::{benchmark_spec, regressor_into, HarmonicSpec, ModelTruth, SignalError};

pub use calibration::{calibrate_mu1, Calibration, CalibrationSettings, MflmsTemplate, MufPolicy};
pub use grid::{full_grid, full_grid_with, ExperimentConfig, GridEntry, Role};
use rng::{RunStreams, EVALUATION_FAMILY};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("all {0} runs diverged")]
    AllDiverged(usize),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// How a nominal noise level maps to the disturbance standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NoiseReading {
    /// The nominal level is the variance σ²; σ = √level.
    #[default]
    Variance,
    /// The nominal level is σ itself.
    Std,
}

impl NoiseReading {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseReading::Variance => "variance",
            NoiseReading::Std => "std",
        }
    }
}

impl fmt::Display for NoiseReading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseReading {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "variance" | "var" => Ok(NoiseReading::Variance),
            "std" | "stddev" => Ok(NoiseReading::Std),
            other => Err(ExperimentError::InvalidConfig(format!(
                "unknown noise reading `{other}` (expected `variance` or `std`)"
            ))),
        }
    }
}

/// A table-level noise label together with its interpretation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel {
    pub nominal: f64,
    pub reading: NoiseReading,
}

impl NoiseLevel {
    pub fn new(nominal: f64, reading: NoiseReading) -> Self {
        Self { nominal, reading }
    }

    /// A level given directly as a standard deviation.
    pub fn std(sigma: f64) -> Self {
        Self::new(sigma, NoiseReading::Std)
    }

    pub fn sigma(&self) -> f64 {
        match self.reading {
            NoiseReading::Variance => self.nominal.sqrt(),
            NoiseReading::Std => self.nominal,
        }
    }
}

/// Simulation protocol shared by every algorithm of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub noise: NoiseLevel,
    pub n_runs: usize,
    pub n_iters: u64,
    pub checkpoint_interval: u64,
    pub base_seed: u64,
    pub metric_space: MetricSpace,
    /// Random stream family; evaluation ensembles use [`rng::EVALUATION_FAMILY`].
    pub stream_family: u64,
}

impl ScenarioConfig {
    /// 1000 runs of 1000 iterations, checkpoints every 100, (a, φ) fitness.
    pub fn new(noise: NoiseLevel, base_seed: u64) -> Self {
        Self {
            noise,
            n_runs: 1000,
            n_iters: 1000,
            checkpoint_interval: 100,
            base_seed,
            metric_space: MetricSpace::Aphi,
            stream_family: EVALUATION_FAMILY,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        let sigma = self.noise.sigma();
        if !(sigma.is_finite() && sigma >= 0.0) {
            return bad(format!("noise level {} is not a valid disturbance", self.noise.nominal));
        }
        if self.n_runs == 0 {
            return bad("n_runs must be positive".into());
        }
        if self.n_iters == 0 || self.checkpoint_interval == 0 {
            return bad("n_iters and checkpoint_interval must be positive".into());
        }
        if self.n_iters % self.checkpoint_interval != 0 {
            return bad(format!(
                "checkpoint_interval {} does not divide n_iters {}",
                self.checkpoint_interval, self.n_iters
            ));
        }
        Ok(())
    }

    /// Iterations at which fitness is recorded: `interval, 2·interval, …, n_iters`.
    pub fn checkpoints(&self) -> Vec<u64> {
        (1..=self.n_iters / self.checkpoint_interval)
            .map(|k| k * self.checkpoint_interval)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrajectory {
    /// NaN after divergence.
    pub nwd_at_checkpoints: Vec<f64>,
    pub final_theta_aphi: Vec<f64>,
    pub final_theta_bc: Vec<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub checkpoints: Vec<u64>,
    pub mean_nwd_at_checkpoints: Vec<f64>,
    pub mean_final_theta_aphi: Vec<f64>,
    /// MSE of the run-averaged final (a, φ) estimate against the truth.
    pub mse_of_mean: f64,
    /// Average of the per-run final MSE.
    pub mean_per_run_mse: f64,
    pub divergence_count: usize,
    pub n_runs: usize,
}

impl AggregateResult {
    /// Mean NWD averaged over checkpoints at or after `from_iteration`.
    pub fn steady_state_nwd(&self, from_iteration: u64) -> f64 {
        let tail: Vec<f64> = self
            .checkpoints
            .iter()
            .zip(&self.mean_nwd_at_checkpoints)
            .filter(|(it, _)| **it >= from_iteration)
            .map(|(_, v)| *v)
            .collect();
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// Benchmark signal with its regressors and noiseless outputs precomputed.
#[derive(Debug)]
pub(crate) struct Benchmark {
    truth: ModelTruth,
    truth_in_space: Vec<f64>,
    space: MetricSpace,
    sigma: f64,
    dim: usize,
    regressors: Vec<f64>,
    clean: Vec<f64>,
}

impl Benchmark {
    pub(crate) fn new(scenario: &ScenarioConfig, horizon: u64) -> Result<Arc<Self>, ExperimentError> {
        let (spec, truth) = benchmark_spec(scenario.noise.sigma())?;
        Self::from_spec(&spec, truth, scenario.metric_space, horizon)
    }

    fn from_spec(spec: &HarmonicSpec, truth: ModelTruth, space: MetricSpace, horizon: u64) -> Result<Arc<Self>, ExperimentError> {
        let dim = spec.dim();
        let mut regressors = vec![0.0; dim * horizon as usize];
        let mut clean = Vec::with_capacity(horizon as usize);
        for (i, row) in regressors.chunks_exact_mut(dim).enumerate() {
            regressor_into(&spec.frequencies, i as u64 + 1, row);
            clean.push(dot(row, &truth.theta_bc));
        }
        let truth_in_space = space.project(&truth.theta_bc)?;
        Ok(Arc::new(Self {
            truth_in_space,
            truth,
            space,
            sigma: spec.noise_std,
            dim,
            regressors,
            clean,
        }))
    }

    fn horizon(&self) -> u64 {
        self.clean.len() as u64
    }

    /// Runs one realisation, recording fitness at each entry of `record_at`
    /// (ascending, each within the precomputed horizon).
    pub(crate) fn simulate(
        &self,
        params: &FilterParams,
        base_seed: u64,
        family: u64,
        run_index: u64,
        initial: Option<&[f64]>,
        record_at: &[u64],
    ) -> Result<RunTrajectory, ExperimentError> {
        let mut streams = RunStreams::new(base_seed, run_index, family);
        let w0 = streams.initial_weights(self.dim);
        let w0 = initial.map(<[f64]>::to_vec).unwrap_or(w0);
        let mut state = FilterState::new(w0);
        let last = record_at.last().copied().unwrap_or(0);
        debug_assert!(last <= self.horizon());

        let mut nwds = Vec::with_capacity(record_at.len());
        let mut next = record_at.iter().peekable();
        let mut diverged = false;
        for n in 1..=last {
            let i = (n - 1) as usize;
            let u = &self.regressors[i * self.dim..(i + 1) * self.dim];
            let d = self.clean[i] + self.sigma * streams.noise();
            match state.advance(u, d, params) {
                Ok(_) => {}
                Err(FilterError::Diverged { .. }) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            }
            while next.peek() == Some(&&n) {
                next.next();
                let est = self.space.project(&state.w)?;
                nwds.push(nwd(&est, &self.truth_in_space)?);
            }
        }

        if diverged {
            nwds.resize(record_at.len(), f64::NAN);
            return Ok(RunTrajectory {
                nwd_at_checkpoints: nwds,
                final_theta_aphi: vec![f64::NAN; self.dim],
                final_theta_bc: vec![f64::NAN; self.dim],
                diverged: true,
            });
        }
        Ok(RunTrajectory {
            nwd_at_checkpoints: nwds,
            final_theta_aphi: MetricSpace::Aphi.project(&state.w)?,
            final_theta_bc: state.w,
            diverged: false,
        })
    }

    /// Runs `n_runs` realisations in parallel and returns them in run order.
    pub(crate) fn ensemble(
        &self,
        params: &FilterParams,
        base_seed: u64,
        family: u64,
        n_runs: usize,
        record_at: &[u64],
    ) -> Result<Vec<RunTrajectory>, ExperimentError> {
        (0..n_runs as u64)
            .into_par_iter()
            .map(|i| self.simulate(params, base_seed, family, i, None, record_at))
            .collect()
    }
}

/// Element-wise mean over non-diverged trajectories, in run order.
pub(crate) fn mean_nwd(runs: &[RunTrajectory]) -> Option<Vec<f64>> {
    let kept: Vec<&RunTrajectory> = runs.iter().filter(|r| !r.diverged).collect();
    let first = kept.first()?;
    let mut acc = vec![0.0; first.nwd_at_checkpoints.len()];
    for r in &kept {
        for (a, v) in acc.iter_mut().zip(&r.nwd_at_checkpoints) {
            *a += v;
        }
    }
    let k = kept.len() as f64;
    Some(acc.into_iter().map(|a| a / k).collect())
}

/// One realisation of `params` on the benchmark.
pub fn run_single(params: &FilterParams, scenario: &ScenarioConfig, run_index: u64) -> Result<RunTrajectory, ExperimentError> {
    run_single_from(params, scenario, run_index, None)
}

/// As [`run_single`], optionally replacing the random initial weights.
pub fn run_single_from(
    params: &FilterParams,
    scenario: &ScenarioConfig,
    run_index: u64,
    initial_w: Option<&[f64]>,
) -> Result<RunTrajectory, ExperimentError> {
    scenario.validate()?;
    if run_index >= scenario.n_runs as u64 {
        return Err(ExperimentError::InvalidConfig(format!(
            "run index {run_index} outside [0, {})",
            scenario.n_runs
        )));
    }
    let bench = Benchmark::new(scenario, scenario.n_iters)?;
    if let Some(w) = initial_w {
        if w.len() != bench.dim {
            return Err(FilterError::DimensionMismatch {
                expected: bench.dim,
                got: w.len(),
            }
            .into());
        }
    }
    bench.simulate(
        params,
        scenario.base_seed,
        scenario.stream_family,
        run_index,
        initial_w,
        &scenario.checkpoints(),
    )
}

/// Folds trajectories (in the given order) into ensemble statistics.
pub fn aggregate(runs: &[RunTrajectory], checkpoints: Vec<u64>, truth_aphi: &[f64]) -> Result<AggregateResult, ExperimentError> {
    let kept: Vec<&RunTrajectory> = runs.iter().filter(|r| !r.diverged).collect();
    if kept.is_empty() {
        return Err(ExperimentError::AllDiverged(runs.len()));
    }
    let k = kept.len() as f64;
    let mean_nwd_at_checkpoints = mean_nwd(runs).expect("at least one run kept");

    let mut theta_sum = vec![0.0; truth_aphi.len()];
    let mut mse_sum = 0.0;
    for r in &kept {
        for (a, v) in theta_sum.iter_mut().zip(&r.final_theta_aphi) {
            *a += v;
        }
        mse_sum += mse(&r.final_theta_aphi, truth_aphi)?;
    }
    let mean_final_theta_aphi: Vec<f64> = theta_sum.into_iter().map(|a| a / k).collect();
    Ok(AggregateResult {
        checkpoints,
        mse_of_mean: mse(&mean_final_theta_aphi, truth_aphi)?,
        mean_final_theta_aphi,
        mean_per_run_mse: mse_sum / k,
        divergence_count: runs.len() - kept.len(),
        n_runs: runs.len(),
        mean_nwd_at_checkpoints,
    })
}

/// Runs the full ensemble for one algorithm and aggregates it.
pub fn run_monte_carlo(params: &FilterParams, scenario: &ScenarioConfig) -> Result<AggregateResult, ExperimentError> {
    scenario.validate()?;
    let bench = Benchmark::new(scenario, scenario.n_iters)?;
    let checkpoints = scenario.checkpoints();
    let runs = bench.ensemble(
        params,
        scenario.base_seed,
        scenario.stream_family,
        scenario.n_runs,
        &checkpoints,
    )?;
    aggregate(&runs, checkpoints, &bench.truth.theta_aphi)
}
