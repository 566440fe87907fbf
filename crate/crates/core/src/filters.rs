//! One-step update rules for LMS, momentum LMS, fractional LMS and the
//! momentum fractional LMS family.
//!
//! Every variant consumes an externally supplied regressor `u` and desired
//! sample `d`; the filters know nothing about where those come from.
//!
//! ```text
//! e      = d − uᵀw
//! g      = μ₁·e·u + (μf / Γ(2−f))·e·(u ⊙ |w|^(1−f))
//!
//! LMS             w' = w + μ₁·e·u
//! momentum LMS    v' = α·v + μ₁·e·u,  w' = w + v'
//! FLMS            w' = w + g
//! mFLMS           v' = α·v + g,       w' = w + v'
//! published form  w' = w + α(w − w₋₁) + μ₁·e·(u ⊙ |w|^(1−f))
//! corrected form  w' = w + α(w − w₋₁) + μ₁·e·(u + u ⊙ |w|^(1−f))
//! ```
//!
//! The published and corrected forms both assume `μf = μ₁·Γ(2−f)`; they
//! differ by exactly `μ₁·e·u`, which is the missing term in the published
//! recursion. From `w = w₋₁ = 0` the published form can never move.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::kernels::{abs_pow_scalar, dot, gamma, KernelError};

/// Any weight magnitude above this is reported as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid filter parameter: {0}")]
    InvalidParams(String),
    #[error("step expects a {expected} filter, params describe {got}")]
    WrongVariant { expected: Variant, got: Variant },
    #[error("weights diverged at iteration {iteration}: |w[{index}]| = {value}")]
    Diverged {
        iteration: u64,
        index: usize,
        value: f64,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Lms,
    MomentumLms,
    Flms,
    /// Velocity form; the canonical mFLMS used by the experiments.
    MflmsAssembled,
    /// The published second-order recursion (missing the `μ₁·e·u` term).
    MflmsPublished16,
    MflmsCorrected,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Lms,
        Variant::MomentumLms,
        Variant::Flms,
        Variant::MflmsAssembled,
        Variant::MflmsPublished16,
        Variant::MflmsCorrected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Lms => "lms",
            Variant::MomentumLms => "momentum_lms",
            Variant::Flms => "flms",
            Variant::MflmsAssembled => "mflms_assembled",
            Variant::MflmsPublished16 => "mflms_published16",
            Variant::MflmsCorrected => "mflms_corrected",
        }
    }

    pub fn is_mflms(self) -> bool {
        matches!(
            self,
            Variant::MflmsAssembled | Variant::MflmsPublished16 | Variant::MflmsCorrected
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = match s.trim().to_ascii_lowercase().as_str() {
            "lms" => Variant::Lms,
            "momentum_lms" | "mlms" => Variant::MomentumLms,
            "flms" => Variant::Flms,
            "mflms" | "mflms_assembled" | "assembled" => Variant::MflmsAssembled,
            "mflms_published16" | "published16" => Variant::MflmsPublished16,
            "mflms_corrected" | "corrected" => Variant::MflmsCorrected,
            other => {
                return Err(FilterError::InvalidParams(format!(
                    "unknown filter variant `{other}`"
                )))
            }
        };
        Ok(v)
    }
}

/// Step sizes, momentum and fractional order of one filter.
///
/// Construct with [`FilterParams::new`]; the fractional gain
/// `μf / Γ(2−f)` is evaluated once at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    mu1: f64,
    muf: f64,
    f: f64,
    alpha: f64,
    variant: Variant,
    frac_gain: f64,
}

impl FilterParams {
    pub fn new(variant: Variant, mu1: f64, muf: f64, f: f64, alpha: f64) -> Result<Self, FilterError> {
        let bad = |msg: String| Err(FilterError::InvalidParams(msg));
        if !(mu1.is_finite() && mu1 > 0.0) {
            return bad(format!("mu1 must be > 0, got {mu1}"));
        }
        if !(muf.is_finite() && muf >= 0.0) {
            return bad(format!("muf must be >= 0, got {muf}"));
        }
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("f must lie strictly in (0, 1), got {f}"));
        }
        if !(0.0..1.0).contains(&alpha) {
            return bad(format!("alpha must lie in [0, 1), got {alpha}"));
        }
        match variant {
            Variant::Lms if muf != 0.0 || alpha != 0.0 => {
                return bad("lms requires muf = 0 and alpha = 0".into())
            }
            Variant::MomentumLms if muf != 0.0 => return bad("momentum_lms requires muf = 0".into()),
            Variant::Flms if alpha != 0.0 => return bad("flms requires alpha = 0".into()),
            _ => {}
        }
        let frac_gain = muf / gamma(2.0 - f)?;
        Ok(Self {
            mu1,
            muf,
            f,
            alpha,
            variant,
            frac_gain,
        })
    }

    /// Plain LMS with learning rate `eta`.
    pub fn lms(eta: f64) -> Result<Self, FilterError> {
        Self::new(Variant::Lms, eta, 0.0, 0.5, 0.0)
    }

    /// An mFLMS-family filter with the tied fractional step `μf = μ₁·Γ(2−f)`.
    pub fn tied(variant: Variant, mu1: f64, f: f64, alpha: f64) -> Result<Self, FilterError> {
        let muf = tied_muf(mu1, f)?;
        Self::new(variant, mu1, muf, f, alpha)
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn muf(&self) -> f64 {
        self.muf
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// `μf / Γ(2 − f)`.
    pub fn fractional_gain(&self) -> f64 {
        self.frac_gain
    }
}

/// `μ₁·Γ(2 − f)`, the fractional step that makes `μf / Γ(2−f) = μ₁`.
pub fn tied_muf(mu1: f64, f: f64) -> Result<f64, FilterError> {
    Ok(mu1 * gamma(2.0 - f)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    /// Current estimate ŵ(n).
    pub w: Vec<f64>,
    /// Previous estimate ŵ(n−1).
    pub w_prev: Vec<f64>,
    /// Velocity v(n).
    pub v: Vec<f64>,
    pub n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// `d − uᵀw` evaluated before the update.
    pub error: f64,
    /// Euclidean norm of the applied increment `w' − w`.
    pub gradient_norm: f64,
}

impl FilterState {
    /// Fresh state with `w = w_prev = initial_w` and zero velocity.
    pub fn new(initial_w: Vec<f64>) -> Self {
        let m = initial_w.len();
        Self {
            w_prev: initial_w.clone(),
            w: initial_w,
            v: vec![0.0; m],
            n: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    fn check_dims(&self, u: &[f64]) -> Result<(), FilterError> {
        let m = self.w.len();
        for got in [u.len(), self.w_prev.len(), self.v.len()] {
            if got != m {
                return Err(FilterError::DimensionMismatch { expected: m, got });
            }
        }
        Ok(())
    }

    /// Advances the state in place by one step of `params.variant()`.
    ///
    /// On a dimension error the state is untouched. On divergence the
    /// state holds the offending update and should be discarded.
    pub fn advance(&mut self, u: &[f64], d: f64, params: &FilterParams) -> Result<StepRecord, FilterError> {
        self.check_dims(u)?;
        let e = d - dot(u, &self.w);
        let mu1e = params.mu1 * e;
        let exponent = 1.0 - params.f;
        let mut sumsq = 0.0;

        // The new weights are written into `w_prev`, then the buffers swap.
        match params.variant {
            Variant::Lms | Variant::MomentumLms | Variant::Flms | Variant::MflmsAssembled => {
                let fractional = matches!(params.variant, Variant::Flms | Variant::MflmsAssembled);
                let momentum = matches!(params.variant, Variant::MomentumLms | Variant::MflmsAssembled);
                let fe = params.frac_gain * e;
                for i in 0..self.w.len() {
                    let mut g = mu1e * u[i];
                    if fractional {
                        g += fe * (u[i] * abs_pow_scalar(self.w[i], exponent));
                    }
                    let incr = if momentum {
                        self.v[i] = params.alpha * self.v[i] + g;
                        self.v[i]
                    } else {
                        g
                    };
                    self.w_prev[i] = self.w[i] + incr;
                    sumsq += incr * incr;
                }
            }
            Variant::MflmsPublished16 | Variant::MflmsCorrected => {
                let corrected = params.variant == Variant::MflmsCorrected;
                for i in 0..self.w.len() {
                    let frac = u[i] * abs_pow_scalar(self.w[i], exponent);
                    let direction = if corrected { u[i] + frac } else { frac };
                    let incr = params.alpha * (self.w[i] - self.w_prev[i]) + mu1e * direction;
                    self.w_prev[i] = self.w[i] + incr;
                    sumsq += incr * incr;
                }
            }
        }
        std::mem::swap(&mut self.w, &mut self.w_prev);
        self.n += 1;

        if let Some((index, &value)) = self
            .w
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.abs() <= DIVERGENCE_BOUND))
        {
            return Err(FilterError::Diverged {
                iteration: self.n,
                index,
                value,
            });
        }
        Ok(StepRecord {
            error: e,
            gradient_norm: sumsq.sqrt(),
        })
    }
}

/// Pure transition for whichever variant `params` carries.
pub fn step(
    state: &FilterState,
    u: &[f64],
    d: f64,
    params: &FilterParams,
) -> Result<(FilterState, StepRecord), FilterError> {
    let mut next = state.clone();
    let record = next.advance(u, d, params)?;
    Ok((next, record))
}

fn step_as(
    expected: Variant,
    state: &FilterState,
    u: &[f64],
    d: f64,
    params: &FilterParams,
) -> Result<(FilterState, StepRecord), FilterError> {
    if params.variant != expected {
        return Err(FilterError::WrongVariant {
            expected,
            got: params.variant,
        });
    }
    step(state, u, d, params)
}

pub fn lms_step(state: &FilterState, u: &[f64], d: f64, params: &FilterParams) -> Result<(FilterState, StepRecord), FilterError> {
    step_as(Variant::Lms, state, u, d, params)
}

pub fn momentum_lms_step(state: &FilterState, u: &[f64], d: f64, params: &FilterParams) -> Result<(FilterState, StepRecord), FilterError> {
    step_as(Variant::MomentumLms, state, u, d, params)
}

pub fn flms_step(state: &FilterState, u: &[f64], d: f64, params: &FilterParams) -> Result<(FilterState, StepRecord), FilterError> {
    step_as(Variant::Flms, state, u, d, params)
}

pub fn mflms_assembled_step(state: &FilterState, u: &[f64], d: f64, params: &FilterParams) -> Result<(FilterState, StepRecord), FilterError> {
    step_as(Variant::MflmsAssembled, state, u, d, params)
}

pub fn mflms_published16_step(state: &FilterState, u: &[f64], d: f64, params: &FilterParams) -> Result<(FilterState, StepRecord), FilterError> {
    step_as(Variant::MflmsPublished16, state, u, d, params)
}

pub fn mflms_corrected_step(state: &FilterState, u: &[f64], d: f64, params: &FilterParams) -> Result<(FilterState, StepRecord), FilterError> {
    step_as(Variant::MflmsCorrected, state, u, d, params)
}

/// Validates parameters and builds a fresh state of length `m`.
pub fn make_filter(
    variant: Variant,
    mu1: f64,
    muf: f64,
    f: f64,
    alpha: f64,
    m: usize,
    initial_w: Vec<f64>,
) -> Result<(FilterState, FilterParams), FilterError> {
    if m == 0 {
        return Err(FilterError::InvalidParams("filter length must be positive".into()));
    }
    if initial_w.len() != m {
        return Err(FilterError::DimensionMismatch {
            expected: m,
            got: initial_w.len(),
        });
    }
    if let Some(x) = initial_w.iter().find(|x| !x.is_finite()) {
        return Err(FilterError::InvalidParams(format!("non-finite initial weight {x}")));
    }
    let params = FilterParams::new(variant, mu1, muf, f, alpha)?;
    Ok((FilterState::new(initial_w), params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(w: &[f64]) -> FilterState {
        FilterState::new(w.to_vec())
    }

    #[test]
    fn lms_one_step() {
        let p = FilterParams::lms(0.5).unwrap();
        let (s, r) = lms_step(&state(&[0.0, 0.0]), &[1.0, 0.0], 1.0, &p).unwrap();
        assert_eq!(r.error, 1.0);
        assert_eq!(s.w, vec![0.5, 0.0]);
        assert_eq!(s.w_prev, vec![0.0, 0.0]);
        assert_eq!(s.n, 1);
        assert_eq!(r.gradient_norm, 0.5);
    }

    #[test]
    fn lms_fixed_point_and_zero_regressor() {
        let p = FilterParams::lms(0.1).unwrap();
        let theta = [0.3, -1.2, 2.0];
        let u = [0.5, 0.25, -1.0];
        let d = dot(&u, &theta);
        let (s, r) = lms_step(&state(&theta), &u, d, &p).unwrap();
        assert_eq!(r.error, 0.0);
        assert_eq!(s.w, theta.to_vec());

        let (s, r) = lms_step(&state(&[1.0]), &[0.0], 7.0, &p).unwrap();
        assert_eq!(r.error, 7.0);
        assert_eq!(s.w, vec![1.0]);
    }

    #[test]
    fn flms_examples() {
        let g15 = gamma(1.5).unwrap();
        let p = FilterParams::new(Variant::Flms, 0.1, 0.1 * g15, 0.5, 0.0).unwrap();
        let (s, r) = flms_step(&state(&[1.0]), &[1.0], 2.0, &p).unwrap();
        assert_eq!(r.error, 1.0);
        assert!((s.w[0] - 1.2).abs() < 1e-15);

        // zero weights kill the fractional term
        let lms = FilterParams::lms(0.1).unwrap();
        let u = [0.3, -0.7];
        let (a, _) = flms_step(&state(&[0.0, 0.0]), &u, 1.5, &p).unwrap();
        let (b, _) = lms_step(&state(&[0.0, 0.0]), &u, 1.5, &lms).unwrap();
        assert_eq!(a.w, b.w);
    }

    #[test]
    fn assembled_momentum_coasts() {
        let p = FilterParams::new(Variant::MflmsAssembled, 0.1, 0.0, 0.5, 0.5).unwrap();
        let u = [1.0];
        let (s1, _) = mflms_assembled_step(&state(&[0.0]), &u, 1.0, &p).unwrap();
        // second step with zero error: w(2) = w(1) + 0.5·v(1)
        let d = dot(&u, &s1.w);
        let (s2, r2) = mflms_assembled_step(&s1, &u, d, &p).unwrap();
        assert_eq!(r2.error, 0.0);
        assert_eq!(s2.w[0], s1.w[0] + 0.5 * s1.v[0]);
        assert_eq!(s2.v[0], 0.5 * s1.v[0]);
    }

    #[test]
    fn assembled_cold_start_equals_lms() {
        let p = FilterParams::tied(Variant::MflmsAssembled, 0.05, 0.25, 0.8).unwrap();
        let lms = FilterParams::lms(0.05).unwrap();
        let u = [0.2, 0.9, -0.4];
        let (a, _) = mflms_assembled_step(&state(&[0.0; 3]), &u, -2.0, &p).unwrap();
        let (b, _) = lms_step(&state(&[0.0; 3]), &u, -2.0, &lms).unwrap();
        assert_eq!(a.w, b.w);
    }

    #[test]
    fn published16_stalls_at_origin() {
        let p = FilterParams::tied(Variant::MflmsPublished16, 0.1, 0.5, 0.3).unwrap();
        let (s, r) = mflms_published16_step(&state(&[0.0, 0.0]), &[0.6, -0.8], 3.0, &p).unwrap();
        assert_eq!(r.error, 3.0);
        assert_eq!(s.w, vec![0.0, 0.0]);
    }

    #[test]
    fn published16_hand_example() {
        let p = FilterParams::tied(Variant::MflmsPublished16, 0.1, 0.5, 0.0).unwrap();
        let (s, _) = mflms_published16_step(&state(&[1.0]), &[1.0], 2.0, &p).unwrap();
        assert!((s.w[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn corrected_examples() {
        let p = FilterParams::tied(Variant::MflmsCorrected, 0.1, 0.5, 0.2).unwrap();
        let st = FilterState {
            w: vec![1.0],
            w_prev: vec![0.5],
            v: vec![0.0],
            n: 3,
        };
        let (s, r) = mflms_corrected_step(&st, &[1.0], 2.0, &p).unwrap();
        assert_eq!(r.error, 1.0);
        assert!((s.w[0] - 1.3).abs() < 1e-15);
        assert_eq!(s.w_prev, vec![1.0]);
        assert_eq!(s.n, 4);

        // escapes the origin where the published form stalls
        let (s, _) = mflms_corrected_step(&state(&[0.0]), &[0.5], 2.0, &p).unwrap();
        assert!((s.w[0] - 0.1 * 2.0 * 0.5).abs() < 1e-16);

        // alpha = 0 at w = 0 is LMS
        let p0 = FilterParams::tied(Variant::MflmsCorrected, 0.1, 0.75, 0.0).unwrap();
        let lms = FilterParams::lms(0.1).unwrap();
        let (a, _) = mflms_corrected_step(&state(&[0.0, 0.0]), &[0.4, 0.1], 1.0, &p0).unwrap();
        let (b, _) = lms_step(&state(&[0.0, 0.0]), &[0.4, 0.1], 1.0, &lms).unwrap();
        assert_eq!(a.w, b.w);
    }

    #[test]
    fn wrong_variant_and_dimension_errors() {
        let p = FilterParams::lms(0.1).unwrap();
        assert!(matches!(
            flms_step(&state(&[0.0]), &[1.0], 1.0, &p),
            Err(FilterError::WrongVariant { .. })
        ));
        assert!(matches!(
            lms_step(&state(&[0.0, 0.0]), &[1.0], 1.0, &p),
            Err(FilterError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let p = FilterParams::lms(0.9).unwrap();
        let err = lms_step(&state(&[0.0]), &[1.0], 2e6, &p).unwrap_err();
        assert!(matches!(err, FilterError::Diverged { iteration: 1, index: 0, .. }));
    }

    #[test]
    fn make_filter_validation() {
        let (s, p) = make_filter(Variant::Lms, 0.1, 0.0, 0.5, 0.0, 8, vec![0.0; 8]).unwrap();
        assert_eq!(s.w, vec![0.0; 8]);
        assert_eq!(s.v, vec![0.0; 8]);
        assert_eq!(s.n, 0);
        assert_eq!(p.variant(), Variant::Lms);

        let g = gamma(1.75).unwrap();
        let w0 = vec![0.1, -1.3, 0.7, 2.2, -0.4, 0.05, 1.1, -0.9];
        let (s, p) = make_filter(Variant::MflmsAssembled, 0.027, 0.027 * g, 0.25, 0.2, 8, w0.clone()).unwrap();
        assert_eq!(s.w, w0);
        assert_eq!(s.w_prev, w0);
        assert!((p.fractional_gain() - 0.027).abs() < 1e-15);

        assert!(make_filter(Variant::MflmsAssembled, 0.1, 0.0, 0.5, 1.0, 1, vec![0.0]).is_err());
        assert!(make_filter(Variant::Lms, 0.1, 0.1, 0.5, 0.0, 1, vec![0.0]).is_err());
        assert!(make_filter(Variant::MomentumLms, 0.1, 0.1, 0.5, 0.2, 1, vec![0.0]).is_err());
        assert!(make_filter(Variant::Flms, 0.1, 0.1, 0.5, 0.2, 1, vec![0.0]).is_err());
        assert!(make_filter(Variant::Flms, 0.1, 0.1, 1.0, 0.0, 1, vec![0.0]).is_err());
        assert!(make_filter(Variant::Lms, 0.0, 0.0, 0.5, 0.0, 1, vec![0.0]).is_err());
        assert!(make_filter(Variant::Lms, 0.1, 0.0, 0.5, 0.0, 2, vec![0.0]).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("nlms".parse::<Variant>().is_err());
    }
}
