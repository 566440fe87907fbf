//! Flat `key = value` configuration.
//!
//! ```text
//! # comments run to end of line
//! noise_levels = 0.30, 0.60, 0.90
//! alpha        = 0.2, 0.5, 0.8
//! n_runs       = 300
//! ```
//!
//! Lists are comma separated. Omitted keys keep their defaults. Unknown keys
//! are rejected. Command-line overrides go through the same key table.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::experiment::{ExperimentConfig, NoiseReading};
use crate::filters::{FilterParams, Variant};
use crate::metrics::MetricSpace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{}unknown key `{key}`", at(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("{}`{key}`: {message}", at(*.line))]
    Range {
        key: String,
        line: Option<usize>,
        message: String,
    },
    #[error("missing required key `{key}`: {reason}")]
    Missing { key: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("noise_levels", "nominal noise levels (list, >= 0)"),
    ("noise_reading", "`variance` (level is sigma^2) or `std` (level is sigma)"),
    ("alpha", "mFLMS momentum values (list, [0, 1))"),
    ("f", "fractional orders (list, (0, 1))"),
    ("lms_eta", "paired LMS learning rates, one per alpha (list, > 0)"),
    ("mflms_mu1", "explicit mFLMS base step (> 0) or `calibrate`"),
    ("muf", "explicit fractional step (>= 0) or `tied` for mu1*Gamma(2-f)"),
    ("variant", "mFLMS form used by the grid"),
    ("algorithm", "filter for the `run` command"),
    ("n_runs", "Monte-Carlo runs per scenario"),
    ("n_iters", "iterations per run"),
    ("checkpoint_interval", "iterations between fitness records; divides n_iters"),
    ("base_seed", "root random seed"),
    ("metric_space", "`aphi` or `bc`"),
    ("calibration_runs", "ensemble size for each calibration evaluation"),
    ("calibration_tolerance", "relative fitness match tolerance (> 0)"),
    ("calibration_checkpoint", "1-based checkpoint giving the initial target"),
    ("calibration_transient_ratio", "transient threshold relative to LMS steady state (>= 1)"),
    ("calibration_mu1_min", "lower end of the mu1 search range"),
    ("calibration_mu1_max", "upper end of the mu1 search range"),
];

/// Parsed configuration: the experiment grid plus `run`-only settings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub experiment: ExperimentConfig,
    pub algorithm: Option<Variant>,
    explicit: BTreeSet<&'static str>,
}

fn canonical(key: &str) -> Option<&'static str> {
    KEYS.iter().map(|(k, _)| *k).find(|k| *k == key)
}

impl Config {
    /// Parses a whole file; omitted keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("malformed key `{key}`"),
                });
            }
            if let Some(k) = canonical(key) {
                if cfg.explicit.contains(k) {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("duplicate key `{key}`"),
                    });
                }
            }
            cfg.set_at(key, value.trim(), Some(line))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| ConfigError::Invalid(format!(
            "override `{assignment}` is not of the form key=value"
        )))?;
        self.set_at(key.trim(), value.trim(), None)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_at(key, value, None)
    }

    /// Whether `key` was given explicitly rather than defaulted.
    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    fn set_at(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let Some(key) = canonical(key) else {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line,
            });
        };
        let range = |message: String| ConfigError::Range {
            key: key.to_string(),
            line,
            message,
        };
        let exp = &mut self.experiment;
        match key {
            "noise_levels" => exp.noise_levels = list(value, |v| v >= 0.0, ">= 0").map_err(range)?,
            "noise_reading" => exp.noise_reading = value.parse::<NoiseReading>().map_err(|e| range(e.to_string()))?,
            "alpha" => exp.alphas = list(value, |v| (0.0..1.0).contains(&v), "in [0, 1)").map_err(range)?,
            "f" => exp.fs = list(value, |v| v > 0.0 && v < 1.0, "in (0, 1)").map_err(range)?,
            "lms_eta" => exp.lms_etas = list(value, |v| v > 0.0, "> 0").map_err(range)?,
            "mflms_mu1" => {
                exp.mflms_mu1 = match value {
                    "calibrate" | "auto" => None,
                    _ => Some(scalar(value, |v| v > 0.0, "> 0").map_err(range)?),
                }
            }
            "muf" => {
                exp.muf = match value {
                    "tied" => None,
                    _ => Some(scalar(value, |v| v >= 0.0, ">= 0").map_err(range)?),
                }
            }
            "variant" => {
                let v: Variant = value.parse().map_err(|e: crate::filters::FilterError| range(e.to_string()))?;
                if !v.is_mflms() {
                    return Err(range(format!("`{v}` is not an mFLMS form")));
                }
                exp.variant = v;
            }
            "algorithm" => {
                self.algorithm = Some(value.parse().map_err(|e: crate::filters::FilterError| range(e.to_string()))?)
            }
            "n_runs" => exp.n_runs = positive(value).map_err(range)? as usize,
            "n_iters" => exp.n_iters = positive(value).map_err(range)?,
            "checkpoint_interval" => exp.checkpoint_interval = positive(value).map_err(range)?,
            "base_seed" => {
                exp.base_seed = value
                    .parse()
                    .map_err(|_| range(format!("`{value}` is not an unsigned 64-bit integer")))?
            }
            "metric_space" => exp.metric_space = value.parse::<MetricSpace>().map_err(|e| range(e.to_string()))?,
            "calibration_runs" => exp.calibration.runs = positive(value).map_err(range)? as usize,
            "calibration_tolerance" => exp.calibration.tolerance = scalar(value, |v| v > 0.0, "> 0").map_err(range)?,
            "calibration_checkpoint" => exp.calibration.checkpoint = positive(value).map_err(range)? as usize,
            "calibration_transient_ratio" => {
                exp.calibration.transient_ratio = scalar(value, |v| v >= 1.0, ">= 1").map_err(range)?
            }
            "calibration_mu1_min" => exp.calibration.mu1_min = scalar(value, |v| v > 0.0, "> 0").map_err(range)?,
            "calibration_mu1_max" => exp.calibration.mu1_max = scalar(value, |v| v > 0.0, "> 0").map_err(range)?,
            _ => unreachable!("every canonical key is handled"),
        }
        self.explicit.insert(key);
        Ok(())
    }

    /// Cross-key checks shared by every command (divisibility, search range).
    pub fn validate(&self) -> Result<(), ConfigError> {
        let exp = &self.experiment;
        if exp.calibration.mu1_min >= exp.calibration.mu1_max {
            return Err(ConfigError::Range {
                key: "calibration_mu1_min".into(),
                line: None,
                message: format!(
                    "{} is not below calibration_mu1_max = {}",
                    exp.calibration.mu1_min, exp.calibration.mu1_max
                ),
            });
        }
        let checkpoints = exp.n_iters.checked_div(exp.checkpoint_interval).unwrap_or(0);
        if exp.calibration.checkpoint as u64 > checkpoints {
            return Err(ConfigError::Range {
                key: "calibration_checkpoint".into(),
                line: None,
                message: format!("{} exceeds the {checkpoints} checkpoints", exp.calibration.checkpoint),
            });
        }
        exp.scenario(exp.noise_levels[0])
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// The grid definition, after the grid-only checks (α/η pairing, variant).
    pub fn grid(&self) -> Result<&ExperimentConfig, ConfigError> {
        self.experiment
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(&self.experiment)
    }

    /// Filter parameters for the `run` command.
    ///
    /// Requires `algorithm`, a single `noise_levels` value, and every
    /// parameter the algorithm uses, each set explicitly and single-valued:
    /// `lms_eta` for the LMS forms, `mflms_mu1` for the fractional forms,
    /// `alpha` for the momentum forms and `f` for the fractional forms.
    pub fn single_run(&self) -> Result<(FilterParams, f64), ConfigError> {
        let missing = |key: &str, reason: &str| ConfigError::Missing {
            key: key.into(),
            reason: reason.into(),
        };
        let variant = self
            .algorithm
            .ok_or_else(|| missing("algorithm", "`run` executes exactly one algorithm"))?;
        let single = |key: &'static str, values: &[f64]| -> Result<f64, ConfigError> {
            if !self.is_explicit(key) {
                return Err(missing(key, &format!("required by `{variant}`")));
            }
            match values {
                [v] => Ok(*v),
                _ => Err(ConfigError::Range {
                    key: key.into(),
                    line: None,
                    message: format!("`run` needs a single value, got {}", values.len()),
                }),
            }
        };
        let exp = &self.experiment;
        let noise = single("noise_levels", &exp.noise_levels)?;
        let uses_momentum = !matches!(variant, Variant::Lms | Variant::Flms);
        let fractional = !matches!(variant, Variant::Lms | Variant::MomentumLms);
        let alpha = if uses_momentum { single("alpha", &exp.alphas)? } else { 0.0 };
        let (mu1, f, muf) = if fractional {
            let mu1 = match exp.mflms_mu1 {
                Some(v) => v,
                None => return Err(missing("mflms_mu1", &format!("required by `{variant}`"))),
            };
            let f = single("f", &exp.fs)?;
            let muf = match exp.muf {
                Some(v) => v,
                None => crate::filters::tied_muf(mu1, f).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            };
            (mu1, f, muf)
        } else {
            (single("lms_eta", &exp.lms_etas)?, 0.5, 0.0)
        };
        let params =
            FilterParams::new(variant, mu1, muf, f, alpha).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok((params, noise))
    }
}

fn number(token: &str) -> Result<f64, String> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", token.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", token.trim()))
    }
}

fn scalar(value: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Result<f64, String> {
    let v = number(value)?;
    if ok(v) {
        Ok(v)
    } else {
        Err(format!("{v} is out of range (must be {rule})"))
    }
}

fn list(value: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Result<Vec<f64>, String> {
    let out: Vec<f64> = value
        .split(',')
        .map(|t| scalar(t, &ok, rule))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

fn positive(value: &str) -> Result<u64, String> {
    match value.parse::<u64>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("`{value}` is not a positive integer")),
    }
}
