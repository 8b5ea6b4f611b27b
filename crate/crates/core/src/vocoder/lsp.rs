//! Conversion between an all-pole polynomial `A(z) = 1 + sum a_m z^-m` and its
//! line spectral pair frequencies.
//!
//! `P(z) = A(z) + z^-(M+1) A(1/z)` and `Q(z) = A(z) - z^-(M+1) A(1/z)` have
//! interlaced unit-circle roots; the smallest frequency belongs to `P`.
//! Coefficient vectors carry the log gain in slot 0: `[gain, a_1, ..., a_M]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mgclsp::MgcLspVector;

const GRID_INTERVALS: usize = 4096;
const BISECTION_TOL: f64 = 1e-13;

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `[gain, a_1, ..., a_M]` from a valid LSP vector.
pub fn lsp_to_coeff(v: &MgcLspVector) -> Result<Vec<f64>> {
    v.validate()?;
    let m = v.order();
    let mut p = vec![1.0];
    let mut q = vec![1.0];
    for (i, &w) in v.lsp.iter().enumerate() {
        let factor = [1.0, -2.0 * w.cos(), 1.0];
        if i % 2 == 0 {
            p = poly_mul(&p, &factor);
        } else {
            q = poly_mul(&q, &factor);
        }
    }
    if m % 2 == 0 {
        p = poly_mul(&p, &[1.0, 1.0]);
        q = poly_mul(&q, &[1.0, -1.0]);
    } else {
        q = poly_mul(&q, &[1.0, 0.0, -1.0]);
    }
    debug_assert_eq!(p.len(), m + 2);
    debug_assert_eq!(q.len(), m + 2);
    let mut out = Vec::with_capacity(m + 1);
    out.push(v.gain);
    out.extend((1..=m).map(|k| 0.5 * (p[k] + q[k])));
    Ok(out)
}

/// Value of a symmetric polynomial `s_0 .. s_2h` at `e^{jw}`, with the linear
/// phase removed: `s_h + 2 sum_k s_{h-k} T_k(cos w)`, summed by Clenshaw.
fn symmetric_response(s: &[f64], x: f64) -> f64 {
    let h = (s.len() - 1) / 2;
    // coefficients of T_k: c_0 = s_h, c_k = 2 s_{h-k}
    let coef = |k: usize| if k == 0 { s[h] } else { 2.0 * s[h - k] };
    let (mut b1, mut b2) = (0.0, 0.0);
    for k in (1..=h).rev() {
        let b0 = coef(k) + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coef(0) + x * b1 - b2
}

fn find_roots(s: &[f64]) -> Vec<f64> {
    let f = |w: f64| symmetric_response(s, w.cos());
    let step = PI / GRID_INTERVALS as f64;
    let mut roots = Vec::new();
    let mut lo = 0.0;
    let mut f_lo = f(lo);
    for i in 1..=GRID_INTERVALS {
        let hi = if i == GRID_INTERVALS { PI } else { i as f64 * step };
        let f_hi = f(hi);
        if f_lo == 0.0 && lo > 0.0 {
            roots.push(lo);
        } else if f_lo * f_hi < 0.0 {
            let (mut a, mut b, mut fa) = (lo, hi, f_lo);
            while b - a > BISECTION_TOL {
                let mid = 0.5 * (a + b);
                let fm = f(mid);
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if fa * fm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        lo = hi;
        f_lo = f_hi;
    }
    roots
}

/// LSP vector from `[gain, a_1, ..., a_M]`. Fails when the sum/difference
/// polynomials do not have exactly `M` interlaced roots in `(0, pi)`.
pub fn coeff_to_lsp(coeffs: &[f64]) -> Result<MgcLspVector> {
    if coeffs.len() < 2 {
        return Err(Error::shape("coefficient vector", ">= 2 values", coeffs.len()));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidValue("non-finite coefficient".into()));
    }
    let m = coeffs.len() - 1;
    let a = |k: usize| -> f64 {
        match k {
            0 => 1.0,
            k if k <= m => coeffs[k],
            _ => 0.0,
        }
    };
    let p: Vec<f64> = (0..=m + 1).map(|k| a(k) + a(m + 1 - k)).collect();
    let q: Vec<f64> = (0..=m + 1).map(|k| a(k) - a(m + 1 - k)).collect();

    // Deflate the trivial roots at z = -1 and/or z = 1.
    let (p, q) = if m % 2 == 0 {
        let mut pd = vec![0.0; m + 1];
        let mut qd = vec![0.0; m + 1];
        for k in 0..=m {
            pd[k] = p[k] - if k > 0 { pd[k - 1] } else { 0.0 };
            qd[k] = q[k] + if k > 0 { qd[k - 1] } else { 0.0 };
        }
        (pd, qd)
    } else {
        let mut qd = vec![0.0; m];
        for k in 0..m {
            qd[k] = q[k] + if k > 1 { qd[k - 2] } else { 0.0 };
        }
        (p, qd)
    };

    let rp = find_roots(&p);
    let rq = if q.len() > 1 { find_roots(&q) } else { Vec::new() };
    if rp.len() + rq.len() != m {
        return Err(Error::Unstable(format!(
            "found {} + {} line spectral frequencies, expected {m}",
            rp.len(),
            rq.len()
        )));
    }
    let mut lsp = Vec::with_capacity(m);
    for i in 0..m {
        let src = if i % 2 == 0 { rp.get(i / 2) } else { rq.get(i / 2) };
        lsp.push(*src.ok_or_else(|| Error::Unstable("roots do not interlace".into()))?);
    }
    if lsp.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Unstable("roots of P and Q do not interlace".into()));
    }
    MgcLspVector::new(coeffs[0], lsp)
}
