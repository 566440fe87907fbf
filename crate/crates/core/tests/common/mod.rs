//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use mflms::{FilterParams, FilterState, Variant};

/// Γ(x) for x in (0, 3] via a shifted Stirling series.
pub fn naive_gamma(x: f64) -> f64 {
    let shift = 10;
    let z = x + shift as f64;
    let z2 = z * z;
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2)
        - 1.0 / (1680.0 * z * z2 * z2 * z2)
        + 1.0 / (1188.0 * z * z2 * z2 * z2 * z2);
    let ln_gamma_z = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series;
    let mut prod = 1.0;
    for k in 0..shift {
        prod *= x + k as f64;
    }
    ln_gamma_z.exp() / prod
}

#[derive(Debug, Clone)]
pub struct Draw {
    pub variant: Variant,
    pub w: Vec<f64>,
    pub w_prev: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub d: f64,
    pub mu1: f64,
    pub muf: f64,
    pub f: f64,
    pub alpha: f64,
}

/// Loop-by-loop evaluation of one update. Returns `(w', v', e)`.
pub fn naive_step(x: &Draw) -> (Vec<f64>, Vec<f64>, f64) {
    let m = x.w.len();
    let mut y = 0.0;
    for i in 0..m {
        y += x.u[i] * x.w[i];
    }
    let e = x.d - y;
    let mut w_new = vec![0.0; m];
    let mut v_new = x.v.clone();
    for i in 0..m {
        let absw = x.w[i].abs();
        let powed = if 1.0 - x.f == 0.0 { 1.0 } else { absw.powf(1.0 - x.f) };
        let lms_term = x.mu1 * e * x.u[i];
        let frac_term = x.muf / naive_gamma(2.0 - x.f) * e * x.u[i] * powed;
        match x.variant {
            Variant::Lms => w_new[i] = x.w[i] + lms_term,
            Variant::MomentumLms => {
                v_new[i] = x.alpha * x.v[i] + lms_term;
                w_new[i] = x.w[i] + v_new[i];
            }
            Variant::Flms => w_new[i] = x.w[i] + lms_term + frac_term,
            Variant::MflmsAssembled => {
                v_new[i] = x.alpha * x.v[i] + lms_term + frac_term;
                w_new[i] = x.w[i] + v_new[i];
            }
            Variant::MflmsPublished16 => {
                w_new[i] = x.w[i] + x.alpha * (x.w[i] - x.w_prev[i]) + x.mu1 * e * x.u[i] * powed;
            }
            Variant::MflmsCorrected => {
                w_new[i] = x.w[i] + x.alpha * (x.w[i] - x.w_prev[i]) + x.mu1 * e * (x.u[i] + x.u[i] * powed);
            }
        }
    }
    (w_new, v_new, e)
}

fn vec_in(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(lo..hi)).collect()
}

/// A random valid draw for `variant`.
pub fn random_draw(rng: &mut ChaCha8Rng, variant: Variant) -> Draw {
    let m = rng.random_range(1..=12);
    let momentum = !matches!(variant, Variant::Lms | Variant::Flms);
    let f = rng.random_range(0.01..0.99);
    Draw {
        variant,
        w: vec_in(rng, m, -3.0, 3.0),
        w_prev: vec_in(rng, m, -3.0, 3.0),
        v: if momentum { vec_in(rng, m, -0.5, 0.5) } else { vec![0.0; m] },
        u: vec_in(rng, m, -2.0, 2.0),
        d: rng.random_range(-5.0..5.0),
        mu1: rng.random_range(1e-4..0.5),
        // the momentum-difference forms ignore μf (they presume the tied step)
        muf: if matches!(variant, Variant::Flms | Variant::MflmsAssembled) {
            rng.random_range(0.0..0.5)
        } else {
            0.0
        },
        f,
        alpha: if momentum { rng.random_range(0.0..0.95) } else { 0.0 },
    }
}

/// `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

impl Draw {
    pub fn params(&self) -> FilterParams {
        FilterParams::new(self.variant, self.mu1, self.muf, self.f, self.alpha).unwrap()
    }

    pub fn state(&self) -> FilterState {
        FilterState {
            w: self.w.clone(),
            w_prev: self.w_prev.clone(),
            v: self.v.clone(),
            n: 0,
        }
    }
}
