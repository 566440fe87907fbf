//! Multi-harmonic power signal with known frequencies.
//!
//! The signal `y(n) = Σ a_k sin(n·ω_k + φ_k) + ε(n)` is linear in
//! `b_k = a_k cos φ_k` and `c_k = a_k sin φ_k`, so the filters adapt the
//! interleaved vector `[b₁, c₁, …, b_N, c_N]` against the regressor
//! `[sin ω₁n, cos ω₁n, …]`. Estimates are reported back as
//! `[a₁, …, a_N, φ₁, …, φ_N]`.
//!
//! Sample indices start at `n = 1`.

use thiserror::Error;

use crate::kernels::dot;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid harmonic spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpec {
    pub amplitudes: Vec<f64>,
    /// Radians per sample.
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
    /// Standard deviation of the additive Gaussian disturbance.
    pub noise_std: f64,
}

/// True parameters in both weight space and report space.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTruth {
    /// `[b₁, c₁, …, b_N, c_N]`
    pub theta_bc: Vec<f64>,
    /// `[a₁, …, a_N, φ₁, …, φ_N]`
    pub theta_aphi: Vec<f64>,
}

impl HarmonicSpec {
    pub fn new(amplitudes: Vec<f64>, frequencies: Vec<f64>, phases: Vec<f64>, noise_std: f64) -> Result<Self, SignalError> {
        let n = amplitudes.len();
        if n == 0 {
            return Err(SignalError::Invalid("at least one harmonic is required".into()));
        }
        if frequencies.len() != n || phases.len() != n {
            return Err(SignalError::LengthMismatch(format!(
                "{} amplitudes, {} frequencies, {} phases",
                n,
                frequencies.len(),
                phases.len()
            )));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(SignalError::Invalid(format!("noise_std must be >= 0, got {noise_std}")));
        }
        Ok(Self {
            amplitudes,
            frequencies,
            phases,
            noise_std,
        })
    }

    /// Number of harmonics N.
    pub fn harmonics(&self) -> usize {
        self.amplitudes.len()
    }

    /// Weight-vector length 2N.
    pub fn dim(&self) -> usize {
        2 * self.harmonics()
    }

    pub fn truth(&self) -> ModelTruth {
        let theta_bc = bc_from_aphi(&self.amplitudes, &self.phases).expect("lengths validated");
        let mut theta_aphi = self.amplitudes.clone();
        theta_aphi.extend_from_slice(&self.phases);
        ModelTruth { theta_bc, theta_aphi }
    }

    /// `Σ a_k sin(n·ω_k + φ_k)`, the direct (non-linearised) form.
    pub fn direct_value(&self, n: f64) -> f64 {
        self.amplitudes
            .iter()
            .zip(&self.frequencies)
            .zip(&self.phases)
            .map(|((a, w), p)| a * (n * w + p).sin())
            .sum()
    }
}

/// `[sin ω₁n, cos ω₁n, …, sin ω_N n, cos ω_N n]`.
pub fn regressor(frequencies: &[f64], n: u64) -> Vec<f64> {
    let mut out = vec![0.0; 2 * frequencies.len()];
    regressor_into(frequencies, n, &mut out);
    out
}

/// Writes the regressor for sample `n` into `out` (length 2N).
pub fn regressor_into(frequencies: &[f64], n: u64, out: &mut [f64]) {
    let t = n as f64;
    for (k, w) in frequencies.iter().enumerate() {
        let (s, c) = (w * t).sin_cos();
        out[2 * k] = s;
        out[2 * k + 1] = c;
    }
}

/// Noisy sample `ψ(n)ᵀθ_bc + noise`. The noise draw is supplied by the caller.
pub fn synthesize(spec: &HarmonicSpec, n: u64, noise: f64) -> f64 {
    let truth = bc_from_aphi(&spec.amplitudes, &spec.phases).expect("lengths validated");
    dot(&regressor(&spec.frequencies, n), &truth) + noise
}

/// Interleaved `[a₁cos φ₁, a₁sin φ₁, …]`.
pub fn bc_from_aphi(a: &[f64], phi: &[f64]) -> Result<Vec<f64>, SignalError> {
    if a.len() != phi.len() {
        return Err(SignalError::LengthMismatch(format!(
            "{} amplitudes vs {} phases",
            a.len(),
            phi.len()
        )));
    }
    Ok(a.iter()
        .zip(phi)
        .flat_map(|(&amp, &ph)| {
            let (s, c) = ph.sin_cos();
            [amp * c, amp * s]
        })
        .collect())
}

/// `[a₁, …, a_N, φ₁, …, φ_N]` from interleaved `(b, c)` pairs.
///
/// Phases use the quadrant-aware arctangent; `b = c = 0` maps to `a = φ = 0`.
pub fn aphi_from_bc(theta_bc: &[f64]) -> Result<Vec<f64>, SignalError> {
    if theta_bc.len() % 2 != 0 {
        return Err(SignalError::LengthMismatch(format!(
            "(b, c) vector must have even length, got {}",
            theta_bc.len()
        )));
    }
    let n = theta_bc.len() / 2;
    let mut out = vec![0.0; 2 * n];
    for (k, pair) in theta_bc.chunks_exact(2).enumerate() {
        let (b, c) = (pair[0], pair[1]);
        out[k] = b.hypot(c);
        out[n + k] = c.atan2(b);
    }
    Ok(out)
}

/// The four-harmonic benchmark signal
/// `1.8 sin(0.07n + 0.95) + 2.9 sin(0.5n + 0.8) + 4 sin(2n + 0.76) + 2.5 sin(1.6n + 1.1)`.
pub fn benchmark_spec(noise_std: f64) -> Result<(HarmonicSpec, ModelTruth), SignalError> {
    let spec = HarmonicSpec::new(
        vec![1.8, 2.9, 4.0, 2.5],
        vec![0.07, 0.5, 2.0, 1.6],
        vec![0.95, 0.8, 0.76, 1.1],
        noise_std,
    )?;
    let truth = spec.truth();
    Ok((spec, truth))
}
