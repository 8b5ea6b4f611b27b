//! Mel-generalized cepstrum helpers: frequency-warped filter coefficients and
//! gain normalization.
//!
//! With the warped delay `z~^-1 = (z^-1 - alpha) / (1 - alpha z^-1)`,
//! `sum_m c(m) z~^-m = b(0) + sum_{m>=1} b(m) Phi_m(z)` where
//! `Phi_m(z) = (1 - alpha^2) z^-1 / (1 - alpha z^-1) * z~^-(m-1)`.

use crate::error::{Error, Result};

/// Mel-cepstrum `c` to filter coefficients `b`: `b(M) = c(M)`,
/// `b(m) = c(m) - alpha * b(m+1)`.
pub fn mc2b(c: &[f64], alpha: f64) -> Vec<f64> {
    let mut b = c.to_vec();
    for m in (0..c.len().saturating_sub(1)).rev() {
        b[m] = c[m] - alpha * b[m + 1];
    }
    b
}

/// Inverse of [`mc2b`]: `c(m) = b(m) + alpha * b(m+1)`.
pub fn b2mc(b: &[f64], alpha: f64) -> Vec<f64> {
    let mut c = b.to_vec();
    for m in 0..b.len().saturating_sub(1) {
        c[m] = b[m] + alpha * b[m + 1];
    }
    c
}

/// Gain factor and normalized coefficients; `coeffs[0]` is unused (zero).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    pub gain: f64,
    pub coeffs: Vec<f64>,
}

/// `K = (1 + gamma b(0))^(1/gamma)`, `b'(m) = b(m) / (1 + gamma b(0))`;
/// for `gamma = 0`, `K = exp(b(0))` and `b' = b`.
pub fn gnorm(b: &[f64], gamma: f64) -> Result<FilterCoefficients> {
    if b.is_empty() {
        return Err(Error::shape("gnorm input", ">= 1 value", 0));
    }
    let mut coeffs = b.to_vec();
    coeffs[0] = 0.0;
    if gamma == 0.0 {
        return Ok(FilterCoefficients {
            gain: b[0].exp(),
            coeffs,
        });
    }
    let base = 1.0 + gamma * b[0];
    if !(base > 0.0) {
        return Err(Error::Unstable(format!("1 + gamma * b(0) = {base} is not positive")));
    }
    coeffs[1..].iter_mut().for_each(|v| *v /= base);
    Ok(FilterCoefficients {
        gain: base.powf(1.0 / gamma),
        coeffs,
    })
}

/// Inverse of [`gnorm`].
pub fn ignorm(f: &FilterCoefficients, gamma: f64) -> Result<Vec<f64>> {
    let mut b = f.coeffs.clone();
    if b.is_empty() {
        return Err(Error::shape("ignorm input", ">= 1 value", 0));
    }
    if gamma == 0.0 {
        b[0] = f.gain.ln();
        return Ok(b);
    }
    if !(f.gain > 0.0) {
        return Err(Error::Unstable(format!("gain {} is not positive", f.gain)));
    }
    let base = f.gain.powf(gamma);
    b[1..].iter_mut().for_each(|v| *v *= base);
    b[0] = (base - 1.0) / gamma;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mc2b_hand_values() {
        let c = [0.3, -0.2, 0.7];
        assert_eq!(mc2b(&c, 0.0), c.to_vec());
        let b = mc2b(&[0.0, 0.0, 1.0], 0.42);
        let want = [0.1764, -0.42, 1.0];
        for (x, y) in b.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn gnorm_hand_values() {
        let f = gnorm(&[0.0, 0.5, -0.25], -1.0 / 3.0).unwrap();
        assert_eq!(f.gain, 1.0);
        assert_eq!(f.coeffs, vec![0.0, 0.5, -0.25]);

        let f = gnorm(&[0.3, 0.9], -1.0 / 3.0).unwrap();
        assert!((f.gain - 0.9f64.powi(-3)).abs() < 1e-12);
        assert!((f.gain - 1.371_742_112_482_853).abs() < 1e-12);
        assert!((f.coeffs[1] - 1.0).abs() < 1e-15);
        assert!(gnorm(&[3.0, 0.0], -1.0 / 3.0).is_err());
    }

    proptest! {
        #[test]
        fn mc2b_b2mc_are_inverse(
            c in proptest::collection::vec(-2.0f64..2.0, 1..26),
            alpha in -0.9f64..0.9,
        ) {
            let back = b2mc(&mc2b(&c, alpha), alpha);
            for (x, y) in back.iter().zip(&c) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn gnorm_ignorm_are_inverse(
            b in proptest::collection::vec(-0.9f64..0.9, 1..26),
            stage in 1usize..5,
        ) {
            for gamma in [-1.0 / stage as f64, 0.0] {
                let back = ignorm(&gnorm(&b, gamma).unwrap(), gamma).unwrap();
                for (x, y) in back.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
