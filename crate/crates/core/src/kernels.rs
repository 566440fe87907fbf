//! Scalar special functions and element-wise vector kernels shared by the
//! filter variants.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KernelError {
    #[error("gamma is only defined here for x in (0, 3], got {0}")]
    GammaDomain(f64),
}

// Lanczos approximation, g = 7, n = 9 (coefficients as published by Godfrey).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function on `(0, 3]`.
///
/// Arguments below 1/2 go through the reflection formula, everything else
/// through the Lanczos series. Integer arguments return the exact factorial.
pub fn gamma(x: f64) -> Result<f64, KernelError> {
    if !(x > 0.0 && x <= 3.0) {
        return Err(KernelError::GammaDomain(x));
    }
    // exact on the integers in range
    if x == 1.0 || x == 2.0 {
        return Ok(1.0);
    }
    if x == 3.0 {
        return Ok(2.0);
    }
    Ok(lanczos(x))
}

fn lanczos(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x < 0.5 {
        return PI / ((PI * x).sin() * lanczos(1.0 - x));
    }
    let z = x - 1.0;
    let mut series = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        series += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * series
}

/// Element-wise `|w_i|^p`, with `0^0 = 1` and `0^p = 0` for `p > 0`.
pub fn abs_pow(w: &[f64], p: f64) -> Vec<f64> {
    w.iter().map(|&x| abs_pow_scalar(x, p)).collect()
}

#[inline]
pub(crate) fn abs_pow_scalar(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p == 1.0 {
        x.abs()
    } else {
        x.abs().powf(p)
    }
}

/// Fractional step coefficient `muf / Γ(2 − f)` used by the fractional term.
pub fn fractional_gain(muf: f64, f: f64) -> Result<f64, KernelError> {
    Ok(muf / gamma(2.0 - f)?)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Values from a 30-digit mpmath evaluation.
    const GAMMA_1_25: f64 = 0.906_402_477_055_477_1;
    const GAMMA_1_5: f64 = 0.886_226_925_452_758_0;
    const GAMMA_1_75: f64 = 0.919_062_526_848_883_2;

    #[test]
    fn gamma_integers() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert_eq!(gamma(2.0).unwrap(), 1.0);
        assert_eq!(gamma(3.0).unwrap(), 2.0);
    }

    #[test]
    fn gamma_half_integer_is_root_pi_over_two() {
        let expected = std::f64::consts::PI.sqrt() / 2.0;
        assert!((gamma(1.5).unwrap() - expected).abs() <= 1e-12);
        assert!((gamma(1.5).unwrap() - GAMMA_1_5).abs() <= 1e-12);
    }

    #[test]
    fn gamma_fractional_points() {
        assert!((gamma(1.25).unwrap() - GAMMA_1_25).abs() <= 1e-12);
        assert!((gamma(1.75).unwrap() - GAMMA_1_75).abs() <= 1e-12);
        assert!((gamma(0.5).unwrap() - 1.772_453_850_905_516).abs() <= 1e-12);
        assert!((gamma(2.5).unwrap() - 1.329_340_388_179_137).abs() <= 1e-12);
    }

    #[test]
    fn gamma_rejects_out_of_domain() {
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.5).is_err());
        assert!(gamma(3.5).is_err());
        assert!(gamma(f64::NAN).is_err());
    }

    #[test]
    fn abs_pow_examples() {
        assert_eq!(abs_pow(&[-2.0, 0.0, 3.0], 1.0), vec![2.0, 0.0, 3.0]);
        assert_eq!(abs_pow(&[5.0, -5.0], 0.0), vec![1.0, 1.0]);
        assert_eq!(abs_pow(&[0.0], 0.0), vec![1.0]);
        assert_eq!(abs_pow(&[0.0], 0.3), vec![0.0]);
        assert!((abs_pow(&[-4.0], 0.5)[0] - 2.0).abs() < 1e-15);
        // exp(0.75 ln 0.3), 30-digit reference
        assert!((abs_pow(&[0.3], 0.75)[0] - 0.405_360_046_442_110_3).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn gamma_recurrence(x in 0.5f64..=2.0) {
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-12);
        }

        #[test]
        fn abs_pow_is_even(w in proptest::collection::vec(-10.0f64..10.0, 1..16), p in 0.0f64..=1.0) {
            let neg: Vec<f64> = w.iter().map(|x| -x).collect();
            let a = abs_pow(&w, p);
            let b = abs_pow(&neg, p);
            prop_assert_eq!(a.len(), w.len());
            prop_assert!(a.iter().all(|&v| v >= 0.0));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn abs_pow_monotone(mut w in proptest::collection::vec(0.0f64..100.0, 2..32), p in 0.0f64..=1.0) {
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let out = abs_pow(&w, p);
            prop_assert!(out.windows(2).all(|pair| pair[0] <= pair[1]));
        }
    }
}
