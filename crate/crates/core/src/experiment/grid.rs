//! The noise × momentum × fractional-order scenario grid.

use super::calibration::{calibrate_mu1, Calibration, CalibrationSettings, MflmsTemplate, MufPolicy};
use super::{run_monte_carlo, AggregateResult, ExperimentError, NoiseLevel, NoiseReading, ScenarioConfig};
use crate::filters::{FilterParams, Variant};
use crate::metrics::MetricSpace;
use crate::experiment::rng::EVALUATION_FAMILY;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Nominal noise levels, interpreted through `noise_reading`.
    pub noise_levels: Vec<f64>,
    pub noise_reading: NoiseReading,
    pub alphas: Vec<f64>,
    pub fs: Vec<f64>,
    /// Paired LMS learning rates, one per entry of `alphas`.
    pub lms_etas: Vec<f64>,
    /// Explicit mFLMS base step; calibrated when absent.
    pub mflms_mu1: Option<f64>,
    /// Explicit fractional step; tied to `μ₁·Γ(2−f)` when absent.
    pub muf: Option<f64>,
    pub variant: Variant,
    pub n_runs: usize,
    pub n_iters: u64,
    pub checkpoint_interval: u64,
    pub base_seed: u64,
    pub metric_space: MetricSpace,
    pub calibration: CalibrationSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            noise_levels: vec![0.30, 0.60, 0.90],
            noise_reading: NoiseReading::Variance,
            alphas: vec![0.2, 0.5, 0.8],
            fs: vec![0.25, 0.50, 0.75],
            lms_etas: vec![0.027, 0.042, 0.1],
            mflms_mu1: None,
            muf: None,
            variant: Variant::MflmsAssembled,
            n_runs: 1000,
            n_iters: 1000,
            checkpoint_interval: 100,
            base_seed: 42,
            metric_space: MetricSpace::Aphi,
            calibration: CalibrationSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn scenario(&self, nominal: f64) -> ScenarioConfig {
        ScenarioConfig {
            noise: NoiseLevel::new(nominal, self.noise_reading),
            n_runs: self.n_runs,
            n_iters: self.n_iters,
            checkpoint_interval: self.checkpoint_interval,
            base_seed: self.base_seed,
            metric_space: self.metric_space,
            stream_family: EVALUATION_FAMILY,
        }
    }

    pub fn template(&self, f: f64, alpha: f64) -> MflmsTemplate {
        MflmsTemplate {
            variant: self.variant,
            f,
            alpha,
            muf: self.muf.map_or(MufPolicy::Tied, MufPolicy::Fixed),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.noise_levels.is_empty() || self.alphas.is_empty() || self.fs.is_empty() {
            return bad("noise_levels, alpha and f need at least one value each".into());
        }
        if self.alphas.len() != self.lms_etas.len() {
            return bad(format!(
                "lms_eta has {} values but alpha has {}; they are paired",
                self.lms_etas.len(),
                self.alphas.len()
            ));
        }
        if !self.variant.is_mflms() {
            return bad(format!("grid variant must be an mFLMS form, got {}", self.variant));
        }
        for &n in &self.noise_levels {
            self.scenario(n).validate()?;
            if n < 0.0 {
                return bad(format!("noise level {n} is negative"));
            }
        }
        for (&a, &eta) in self.alphas.iter().zip(&self.lms_etas) {
            FilterParams::lms(eta)?;
            for &f in &self.fs {
                self.template(f, a).params(self.mflms_mu1.unwrap_or(0.01))?;
            }
        }
        Ok(())
    }
}

/// What a grid entry runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Role {
    Lms { eta: f64 },
    Mflms { alpha: f64, f: f64, paired_eta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub noise: NoiseLevel,
    pub role: Role,
    pub params: FilterParams,
    pub calibration: Option<Calibration>,
    pub aggregate: AggregateResult,
}

/// Runs every (noise, α, f) mFLMS scenario and the paired LMS of each
/// (noise, α) block.
///
/// Entries come out in table order: for each noise level and each α, the
/// mFLMS rows in `f` order followed by the paired LMS row.
pub fn full_grid(config: &ExperimentConfig) -> Result<Vec<GridEntry>, ExperimentError> {
    full_grid_with(config, |_| {})
}

/// As [`full_grid`], reporting each finished entry to `progress`.
pub fn full_grid_with(config: &ExperimentConfig, mut progress: impl FnMut(&GridEntry)) -> Result<Vec<GridEntry>, ExperimentError> {
    config.validate()?;
    let mut out = Vec::new();
    for &nominal in &config.noise_levels {
        let scenario = config.scenario(nominal);
        for (&alpha, &eta) in config.alphas.iter().zip(&config.lms_etas) {
            for &f in &config.fs {
                let template = config.template(f, alpha);
                let (params, calibration) = match config.mflms_mu1 {
                    Some(mu1) => (template.params(mu1)?, None),
                    None => {
                        let cal = calibrate_mu1(&template, eta, &scenario, &config.calibration)?;
                        (template.params(cal.mu1)?, Some(cal))
                    }
                };
                let entry = GridEntry {
                    noise: scenario.noise,
                    role: Role::Mflms { alpha, f, paired_eta: eta },
                    aggregate: run_monte_carlo(&params, &scenario)?,
                    params,
                    calibration,
                };
                progress(&entry);
                out.push(entry);
            }
            let params = FilterParams::lms(eta)?;
            let entry = GridEntry {
                noise: scenario.noise,
                role: Role::Lms { eta },
                aggregate: run_monte_carlo(&params, &scenario)?,
                params,
                calibration: None,
            };
            progress(&entry);
            out.push(entry);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape_and_order() {
        let cfg = ExperimentConfig {
            n_runs: 4,
            n_iters: 200,
            mflms_mu1: Some(0.01),
            ..ExperimentConfig::default()
        };
        let grid = full_grid(&cfg).unwrap();
        assert_eq!(grid.len(), 36);
        assert_eq!(grid.iter().filter(|e| matches!(e.role, Role::Lms { .. })).count(), 9);
        // every (noise, alpha, f) exactly once
        for &n in &cfg.noise_levels {
            for &a in &cfg.alphas {
                for &f in &cfg.fs {
                    let hits = grid
                        .iter()
                        .filter(|e| {
                            e.noise.nominal == n
                                && matches!(e.role, Role::Mflms { alpha, f: ef, .. } if alpha == a && ef == f)
                        })
                        .count();
                    assert_eq!(hits, 1);
                }
            }
        }
        assert!(matches!(grid[3].role, Role::Lms { eta } if eta == 0.027));
        assert!(matches!(grid[0].role, Role::Mflms { alpha, f, .. } if alpha == 0.2 && f == 0.25));
    }

    #[test]
    fn mismatched_pairs_rejected() {
        let cfg = ExperimentConfig {
            lms_etas: vec![0.1],
            ..ExperimentConfig::default()
        };
        assert!(full_grid(&cfg).is_err());
    }
}
