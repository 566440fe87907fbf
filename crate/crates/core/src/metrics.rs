//! Fitness (normalised weight difference) and mean squared estimation error.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::kernels::norm;
use crate::signal_model::{aphi_from_bc, SignalError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("length mismatch: estimate has {estimate}, truth has {truth}")]
    LengthMismatch { estimate: usize, truth: usize },
    #[error("truth vector has zero norm")]
    ZeroNormTruth,
    #[error("empty parameter vector")]
    Empty,
    #[error("unknown metric space `{0}` (expected `aphi` or `bc`)")]
    UnknownSpace(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Parameter space in which estimates are compared to the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MetricSpace {
    /// Interleaved `(b, c)` weights, as adapted by the filter.
    Bc,
    /// Amplitudes followed by phases.
    #[default]
    Aphi,
}

impl MetricSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricSpace::Bc => "bc",
            MetricSpace::Aphi => "aphi",
        }
    }

    /// Maps filter weights into this space.
    pub fn project(self, theta_bc: &[f64]) -> Result<Vec<f64>, MetricError> {
        match self {
            MetricSpace::Bc => Ok(theta_bc.to_vec()),
            MetricSpace::Aphi => Ok(aphi_from_bc(theta_bc)?),
        }
    }
}

impl fmt::Display for MetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricSpace {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bc" => Ok(MetricSpace::Bc),
            "aphi" => Ok(MetricSpace::Aphi),
            other => Err(MetricError::UnknownSpace(other.to_string())),
        }
    }
}

fn check_lengths(theta_hat: &[f64], theta: &[f64]) -> Result<(), MetricError> {
    if theta_hat.len() != theta.len() {
        return Err(MetricError::LengthMismatch {
            estimate: theta_hat.len(),
            truth: theta.len(),
        });
    }
    if theta.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// `‖θ̂ − θ‖ / ‖θ‖`.
pub fn nwd(theta_hat: &[f64], theta: &[f64]) -> Result<f64, MetricError> {
    check_lengths(theta_hat, theta)?;
    let denom = norm(theta);
    if denom == 0.0 {
        return Err(MetricError::ZeroNormTruth);
    }
    let num = theta_hat
        .iter()
        .zip(theta)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// `(1/M) Σ (θᵢ − θ̂ᵢ)²`.
pub fn mse(theta_hat: &[f64], theta: &[f64]) -> Result<f64, MetricError> {
    check_lengths(theta_hat, theta)?;
    let sum: f64 = theta_hat.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / theta.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TRUTH: [f64; 8] = [1.8, 2.9, 4.0, 2.5, 0.95, 0.8, 0.76, 1.1];

    #[test]
    fn nwd_examples() {
        assert_eq!(nwd(&TRUTH, &TRUTH).unwrap(), 0.0);
        assert_eq!(nwd(&[0.0; 8], &TRUTH).unwrap(), 1.0);
        let doubled: Vec<f64> = TRUTH.iter().map(|x| 2.0 * x).collect();
        assert!((nwd(&doubled, &TRUTH).unwrap() - 1.0).abs() < 1e-15);

        let mut nudged = TRUTH;
        nudged[0] += 0.01;
        // 0.01 / ‖θ‖ with ‖θ‖ = 6.10164731855258902756 (30-digit reference)
        assert!((nwd(&nudged, &TRUTH).unwrap() - 0.001_638_901_673_257_012).abs() < 1e-12);
    }

    #[test]
    fn nwd_errors() {
        assert_eq!(nwd(&[1.0], &[0.0]), Err(MetricError::ZeroNormTruth));
        assert!(matches!(nwd(&[1.0, 2.0], &[1.0]), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&TRUTH, &TRUTH).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert_eq!(mse(&[], &[]), Err(MetricError::Empty));
    }

    #[test]
    fn space_projection() {
        assert_eq!(MetricSpace::Bc.project(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let ap = MetricSpace::Aphi.project(&[3.0, 4.0]).unwrap();
        assert_eq!(ap[0], 5.0);
        assert_eq!("APHI".parse::<MetricSpace>().unwrap(), MetricSpace::Aphi);
        assert!("ab".parse::<MetricSpace>().is_err());
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..16).prop_flat_map(|m| {
            (
                proptest::collection::vec(-50.0f64..50.0, m),
                proptest::collection::vec(-50.0f64..50.0, m),
            )
        })
    }

    proptest! {
        #[test]
        fn nwd_scale_covariant((hat, truth) in pair(), s in prop_oneof![-8.0f64..-0.125, 0.125f64..8.0]) {
            prop_assume!(norm(&truth) > 1e-6);
            // power-of-two scales keep the products exact
            let s = 2f64.powi(s.log2().round() as i32) * s.signum();
            let sh: Vec<f64> = hat.iter().map(|x| s * x).collect();
            let st: Vec<f64> = truth.iter().map(|x| s * x).collect();
            prop_assert_eq!(nwd(&sh, &st).unwrap(), nwd(&hat, &truth).unwrap());
        }

        #[test]
        fn mse_symmetric((hat, truth) in pair()) {
            prop_assert_eq!(mse(&hat, &truth).unwrap(), mse(&truth, &hat).unwrap());
        }

        #[test]
        fn nwd_mse_identity((hat, truth) in pair()) {
            prop_assume!(norm(&truth) > 1e-3);
            let lhs = nwd(&hat, &truth).unwrap().powi(2) * norm(&truth).powi(2);
            let rhs = truth.len() as f64 * mse(&hat, &truth).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }
}
