//! Equal-convergence calibration of the mFLMS base step size.
//!
//! The mFLMS step `μ₁` is chosen so that its ensemble-mean fitness at a
//! target iteration matches the paired LMS. The target defaults to the
//! first checkpoint; when the reference LMS has already settled there
//! (fitness below `transient_ratio` times its own steady state) the target
//! is halved until it falls inside the LMS transient, since a match on the
//! steady-state floor says nothing about convergence speed.
//!
//! The search scans a log-spaced grid of `μ₁` for the first value that
//! reaches the target fitness, then bisects (in log space) inside that
//! bracket. Calibration ensembles use their own random stream family.

use super::rng::CALIBRATION_FAMILY;
use super::{mean_nwd, Benchmark, ExperimentError, ScenarioConfig};
use crate::filters::{tied_muf, FilterParams, Variant};

/// How `μf` follows `μ₁` while searching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MufPolicy {
    /// `μf = μ₁·Γ(2 − f)`.
    Tied,
    Fixed(f64),
}

/// An mFLMS configuration with its base step size left open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MflmsTemplate {
    pub variant: Variant,
    pub f: f64,
    pub alpha: f64,
    pub muf: MufPolicy,
}

impl MflmsTemplate {
    pub fn assembled(f: f64, alpha: f64) -> Self {
        Self {
            variant: Variant::MflmsAssembled,
            f,
            alpha,
            muf: MufPolicy::Tied,
        }
    }

    pub fn params(&self, mu1: f64) -> Result<FilterParams, ExperimentError> {
        let muf = match self.muf {
            MufPolicy::Tied => tied_muf(mu1, self.f)?,
            MufPolicy::Fixed(v) => v,
        };
        Ok(FilterParams::new(self.variant, mu1, muf, self.f, self.alpha)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    /// Ensemble size used for every fitness evaluation.
    pub runs: usize,
    /// Relative tolerance on the fitness match; must be positive.
    pub tolerance: f64,
    /// 1-based checkpoint index giving the initial target iteration.
    pub checkpoint: usize,
    /// The LMS counts as still converging at an iteration when its fitness
    /// there is at least this multiple of its steady-state fitness.
    pub transient_ratio: f64,
    pub mu1_min: f64,
    pub mu1_max: f64,
    pub scan_points: usize,
    pub max_bisections: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            runs: 200,
            tolerance: 0.05,
            checkpoint: 1,
            transient_ratio: 2.0,
            mu1_min: 1e-4,
            mu1_max: 0.5,
            scan_points: 48,
            max_bisections: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub mu1: f64,
    /// Iteration at which the fitness curves were matched.
    pub target_iteration: u64,
    /// Reference LMS ensemble-mean fitness at the target iteration.
    pub target_nwd: f64,
    /// mFLMS ensemble-mean fitness at the target iteration with `mu1`.
    pub achieved_nwd: f64,
}

fn unreachable(msg: String) -> ExperimentError {
    ExperimentError::Calibration(msg)
}

/// Finds `μ₁` for `template` matching LMS(`lms_eta`) under `scenario`.
pub fn calibrate_mu1(
    template: &MflmsTemplate,
    lms_eta: f64,
    scenario: &ScenarioConfig,
    settings: &CalibrationSettings,
) -> Result<Calibration, ExperimentError> {
    scenario.validate()?;
    if !(settings.tolerance > 0.0) {
        return Err(unreachable(format!(
            "tolerance {} admits no match",
            settings.tolerance
        )));
    }
    if settings.runs == 0 || settings.scan_points < 2 {
        return Err(ExperimentError::InvalidConfig(
            "calibration needs at least one run and two scan points".into(),
        ));
    }
    if !(settings.mu1_min > 0.0 && settings.mu1_min < settings.mu1_max) {
        return Err(ExperimentError::InvalidConfig(format!(
            "calibration range [{}, {}] is empty",
            settings.mu1_min, settings.mu1_max
        )));
    }
    let checkpoints = scenario.checkpoints();
    let first_target = *checkpoints.get(settings.checkpoint.wrapping_sub(1)).ok_or_else(|| {
        ExperimentError::InvalidConfig(format!(
            "calibration checkpoint {} outside 1..={}",
            settings.checkpoint,
            checkpoints.len()
        ))
    })?;

    let bench = Benchmark::new(scenario, scenario.n_iters)?;
    let seed = scenario.base_seed;
    let ensemble_mean = |params: &FilterParams, record_at: &[u64]| -> Result<Option<Vec<f64>>, ExperimentError> {
        let runs = bench.ensemble(params, seed, CALIBRATION_FAMILY, settings.runs, record_at)?;
        if runs.iter().any(|r| r.diverged) {
            return Ok(None);
        }
        Ok(mean_nwd(&runs))
    };

    // Reference LMS: candidate targets (halvings of the first checkpoint)
    // plus the second half of the checkpoints for its steady state.
    let mut candidates = vec![first_target];
    while *candidates.last().unwrap() > 1 {
        let t = candidates.last().unwrap() / 2;
        candidates.push(t);
    }
    let tail: Vec<u64> = checkpoints
        .iter()
        .copied()
        .filter(|&c| 2 * c > scenario.n_iters)
        .collect();
    let mut record_at: Vec<u64> = candidates.iter().chain(&tail).copied().collect();
    record_at.sort_unstable();
    record_at.dedup();

    let lms = FilterParams::lms(lms_eta)?;
    let reference = ensemble_mean(&lms, &record_at)?
        .ok_or_else(|| unreachable(format!("reference LMS(eta={lms_eta}) diverged")))?;
    let at = |it: u64| reference[record_at.binary_search(&it).unwrap()];
    let steady = tail.iter().map(|&c| at(c)).sum::<f64>() / tail.len() as f64;

    let target_iteration = candidates
        .iter()
        .copied()
        .find(|&t| at(t) >= settings.transient_ratio * steady)
        .unwrap_or(*candidates.last().unwrap());
    let target = at(target_iteration);

    let fitness = |mu1: f64| -> Result<f64, ExperimentError> {
        let params = template.params(mu1)?;
        Ok(ensemble_mean(&params, &[target_iteration])?
            .map(|v| v[0])
            .unwrap_or(f64::INFINITY))
    };
    let within = |v: f64| (v - target).abs() <= settings.tolerance * target;
    let done = |mu1: f64, achieved: f64| Calibration {
        mu1,
        target_iteration,
        target_nwd: target,
        achieved_nwd: achieved,
    };

    let (lo_ln, hi_ln) = (settings.mu1_min.ln(), settings.mu1_max.ln());
    let steps = settings.scan_points - 1;
    let mut below: Option<(f64, f64)> = None;
    let mut bracket = None;
    for k in 0..=steps {
        let mu1 = (lo_ln + (hi_ln - lo_ln) * k as f64 / steps as f64).exp();
        let v = fitness(mu1)?;
        if within(v) {
            return Ok(done(mu1, v));
        }
        if v < target {
            bracket = Some((below, mu1));
            break;
        }
        below = Some((mu1, v));
    }
    let (lower, upper) = match bracket {
        Some((Some((lo, _)), hi)) => (lo, hi),
        Some((None, _)) => {
            return Err(unreachable(format!(
                "even mu1 = {} converges faster than the reference (target NWD {target:.4} at iteration {target_iteration})",
                settings.mu1_min
            )))
        }
        None => {
            return Err(unreachable(format!(
                "no mu1 in [{}, {}] reaches NWD {target:.4} at iteration {target_iteration}",
                settings.mu1_min, settings.mu1_max
            )))
        }
    };

    let (mut lo, mut hi) = (lower.ln(), upper.ln());
    for _ in 0..settings.max_bisections {
        let mid = 0.5 * (lo + hi);
        let mu1 = mid.exp();
        let v = fitness(mu1)?;
        if within(v) {
            return Ok(done(mu1, v));
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(unreachable(format!(
        "bisection did not reach {}% of NWD {target:.4} between mu1 = {lower} and {upper}",
        settings.tolerance * 100.0
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{NoiseLevel, NoiseReading};

    fn scenario() -> ScenarioConfig {
        ScenarioConfig::new(NoiseLevel::new(0.3, NoiseReading::Variance), 42)
    }

    fn quick() -> CalibrationSettings {
        CalibrationSettings {
            runs: 60,
            ..CalibrationSettings::default()
        }
    }

    #[test]
    fn self_calibration_recovers_eta() {
        // mFLMS with muf = 0 and alpha = 0 is LMS
        let template = MflmsTemplate {
            muf: MufPolicy::Fixed(0.0),
            ..MflmsTemplate::assembled(0.5, 0.0)
        };
        let cal = calibrate_mu1(&template, 0.027, &scenario(), &quick()).unwrap();
        assert_eq!(cal.target_iteration, 100);
        assert!((cal.mu1 - 0.027).abs() / 0.027 < 0.1, "mu1 = {}", cal.mu1);
        assert!((cal.achieved_nwd - cal.target_nwd).abs() <= 0.05 * cal.target_nwd);
    }

    #[test]
    fn zero_tolerance_is_rejected() {
        let settings = CalibrationSettings {
            tolerance: 0.0,
            ..quick()
        };
        let err = calibrate_mu1(&MflmsTemplate::assembled(0.25, 0.2), 0.027, &scenario(), &settings);
        assert!(matches!(err, Err(ExperimentError::Calibration(_))));
    }

    #[test]
    fn settled_reference_moves_target_into_transient() {
        // LMS(0.1) has converged by iteration 100
        let cal = calibrate_mu1(&MflmsTemplate::assembled(0.5, 0.8), 0.1, &scenario(), &quick()).unwrap();
        assert!(cal.target_iteration < 100);
        assert!(cal.target_iteration >= 12);
    }

    #[test]
    fn bad_checkpoint_index() {
        let settings = CalibrationSettings {
            checkpoint: 11,
            ..quick()
        };
        assert!(calibrate_mu1(&MflmsTemplate::assembled(0.25, 0.2), 0.027, &scenario(), &settings).is_err());
    }
}
