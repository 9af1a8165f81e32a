use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidates below this frequency are treated as spectral tilt, not formants.
pub const MIN_FORMANT_HZ: f64 = 90.0;
/// Candidates wider than this are rejected.
pub const MAX_BANDWIDTH_HZ: f64 = 400.0;

/// Burg autoregressive fit of order `order`.
///
/// Returns `a[1..=order]` for the model `x[n] = sum_k a[k] x[n-k] + e[n]`. Burg's
/// reflection coefficients have magnitude below one, so the prediction polynomial
/// has every root strictly inside the unit circle.
pub fn lpc_burg(frame: &[f64], order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::InvalidArgument("LPC order must be positive".into()));
    }
    if frame.len() <= order {
        return Err(Error::InvalidArgument(format!(
            "frame of {} samples is too short for order {order}",
            frame.len()
        )));
    }
    if frame.iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("all-zero frame".into()));
    }
    let n = frame.len();
    let mut fwd = frame.to_vec();
    let mut bwd = frame.to_vec();
    // inverse filter A(z) = 1 + sum poly[k] z^-k
    let mut poly = vec![0.0; order + 1];
    poly[0] = 1.0;
    for k in 1..=order {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in k..n {
            num += fwd[i] * bwd[i - 1];
            den += fwd[i] * fwd[i] + bwd[i - 1] * bwd[i - 1];
        }
        if den <= f64::MIN_POSITIVE {
            // the signal is already perfectly predicted
            break;
        }
        let refl = -2.0 * num / den;
        let prev = poly.clone();
        for i in 1..=k {
            poly[i] = prev[i] + refl * prev[k - i];
        }
        for i in (k..n).rev() {
            let f = fwd[i];
            let b = bwd[i - 1];
            fwd[i] = f + refl * b;
            bwd[i] = b + refl * f;
        }
    }
    Ok(poly[1..].iter().map(|c| -c).collect())
}

/// Roots of `z^p - a1 z^(p-1) - ... - ap`, via the companion matrix.
pub fn lpc_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let p = coeffs.len();
    if p == 0 {
        return Vec::new();
    }
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            coeffs[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .map(|&z| polish_root(coeffs, z))
        .collect()
}

fn polish_root(coeffs: &[f64], mut z: Complex<f64>) -> Complex<f64> {
    for _ in 0..3 {
        // Horner for P(z) = z^p - sum a_k z^(p-k) and its derivative
        let mut val = Complex::new(1.0, 0.0);
        let mut der = Complex::new(0.0, 0.0);
        for &a in coeffs {
            der = der * z + val;
            val = val * z - a;
        }
        if der.norm() == 0.0 {
            break;
        }
        let next = z - val / der;
        if !next.re.is_finite() || !next.im.is_finite() {
            break;
        }
        z = next;
    }
    z
}

/// A formant candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub frequency: f64,
    pub bandwidth: f64,
}

/// Maps upper-half-plane roots to (frequency, bandwidth) pairs, sorted by frequency.
///
/// Roots outside the unit circle are reflected inside first. Candidates below
/// 90 Hz or wider than 400 Hz are dropped.
pub fn formants_from_lpc(coeffs: &[f64], sample_rate: f64) -> Vec<Resonance> {
    let mut out: Vec<Resonance> = lpc_roots(coeffs)
        .into_iter()
        .filter(|r| r.im > 0.0)
        .map(|r| {
            let r = if r.norm() > 1.0 { Complex::new(1.0, 0.0) / r.conj() } else { r };
            Resonance {
                frequency: r.arg() * sample_rate / (2.0 * PI),
                bandwidth: -r.norm().ln() * sample_rate / PI,
            }
        })
        .filter(|f| f.frequency >= MIN_FORMANT_HZ && f.bandwidth <= MAX_BANDWIDTH_HZ)
        .collect();
    out.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    out
}
