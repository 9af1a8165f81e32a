use serde::{Deserialize, Serialize};

use super::lpc::{formants_from_lpc, lpc_burg};
use super::resample::resample;
use crate::align::VowelToken;
use crate::error::{Error, Result};
use crate::signal::{Waveform, Window};

/// Single-window midpoint analysis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormantConfig {
    /// Formant ceiling in Hz; audio is resampled to twice this rate.
    pub ceiling_hz: f64,
    pub window_s: f64,
    pub pre_emphasis: f64,
    pub lpc_order: usize,
}

impl Default for FormantConfig {
    fn default() -> Self {
        Self {
            ceiling_hz: 5000.0,
            window_s: 0.025,
            pre_emphasis: 0.97,
            lpc_order: 10,
        }
    }
}

impl FormantConfig {
    /// Usual ceiling for lower-pitched (typically male) voices.
    pub const LOW_PITCH_CEILING: f64 = 5000.0;
    /// Usual ceiling for higher-pitched (typically female) voices.
    pub const HIGH_PITCH_CEILING: f64 = 5500.0;

    pub fn with_ceiling(ceiling_hz: f64) -> Self {
        Self {
            ceiling_hz,
            ..Self::default()
        }
    }

    pub fn fingerprint(&self) -> String {
        format!(
            "burg{}-ceil{}-win{}ms-pre{}",
            self.lpc_order,
            self.ceiling_hz,
            self.window_s * 1000.0,
            self.pre_emphasis
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormantMeasurement {
    pub token: VowelToken,
    pub f1: f64,
    pub f2: f64,
    pub b1: f64,
    pub b2: f64,
    pub ceiling_used: f64,
}

/// F1/F2 (with bandwidths) from one analysis window centered at `midpoint`.
pub fn analyze_midpoint(w: &Waveform, midpoint: f64, cfg: &FormantConfig) -> Result<[(f64, f64); 2]> {
    if !(3500.0..=7000.0).contains(&cfg.ceiling_hz) {
        return Err(Error::InvalidArgument(format!(
            "formant ceiling {} Hz outside [3500, 7000]",
            cfg.ceiling_hz
        )));
    }
    if !(0.0..=w.duration()).contains(&midpoint) {
        return Err(Error::InvalidArgument(format!(
            "midpoint {midpoint} s outside audio of {} s",
            w.duration()
        )));
    }
    let sr = w.sample_rate() as f64;
    let target_sr = 2.0 * cfg.ceiling_hz;

    // take the window plus a margin for the resampling kernel and pre-emphasis, zero-padded
    let margin = 0.5 * cfg.window_s + 0.01;
    let first = ((midpoint - margin) * sr).floor() as i64;
    let last = ((midpoint + margin) * sr).ceil() as i64;
    let samples = w.samples();
    let segment: Vec<f64> = (first..=last)
        .map(|i| usize::try_from(i).ok().and_then(|i| samples.get(i)).copied().unwrap_or(0.0))
        .collect();
    let seg_start_time = first as f64 / sr;

    let mut x = resample(&segment, sr, target_sr);
    for n in (1..x.len()).rev() {
        x[n] -= cfg.pre_emphasis * x[n - 1];
    }

    let win_len = (cfg.window_s * target_sr).round() as usize;
    let center = ((midpoint - seg_start_time) * target_sr).round() as usize;
    let start = center.saturating_sub(win_len / 2);
    let end = (start + win_len).min(x.len());
    let window = Window::Hann.coefficients(end - start);
    let frame: Vec<f64> = x[start..end].iter().zip(&window).map(|(s, c)| s * c).collect();

    let coeffs = lpc_burg(&frame, cfg.lpc_order).map_err(|e| match e {
        Error::Degenerate(m) => Error::FormantExtraction(format!("at {midpoint:.3} s: {m}")),
        other => other,
    })?;
    let candidates = formants_from_lpc(&coeffs, target_sr);
    match candidates.as_slice() {
        [f1, f2, ..] => Ok([(f1.frequency, f1.bandwidth), (f2.frequency, f2.bandwidth)]),
        _ => Err(Error::FormantExtraction(format!(
            "only {} formant candidate(s) at {midpoint:.3} s",
            candidates.len()
        ))),
    }
}

/// First two formant frequencies at `midpoint`, analyzed up to `ceiling` Hz.
pub fn extract_f1f2(w: &Waveform, midpoint: f64, ceiling: f64) -> Result<(f64, f64)> {
    let [(f1, _), (f2, _)] = analyze_midpoint(w, midpoint, &FormantConfig::with_ceiling(ceiling))?;
    Ok((f1, f2))
}

pub fn measure_token(w: &Waveform, token: &VowelToken, cfg: &FormantConfig) -> Result<FormantMeasurement> {
    let [(f1, b1), (f2, b2)] = analyze_midpoint(w, token.midpoint, cfg)?;
    Ok(FormantMeasurement {
        token: token.clone(),
        f1,
        f2,
        b1,
        b2,
        ceiling_used: cfg.ceiling_hz,
    })
}

pub mod synth {
    //! Two-resonator cascade vowel synthesizer with known F1/F2 targets.

    use std::f64::consts::PI;

    use crate::signal::Waveform;

    /// Second-order digital resonator with unit gain at DC.
    fn resonate(x: &[f64], freq: f64, bw: f64, sr: f64) -> Vec<f64> {
        let t = 1.0 / sr;
        let c = -(-2.0 * PI * bw * t).exp();
        let b = 2.0 * (-PI * bw * t).exp() * (2.0 * PI * freq * t).cos();
        let a = 1.0 - b - c;
        let mut y = vec![0.0; x.len()];
        for n in 0..x.len() {
            let y1 = if n >= 1 { y[n - 1] } else { 0.0 };
            let y2 = if n >= 2 { y[n - 2] } else { 0.0 };
            y[n] = a * x[n] + b * y1 + c * y2;
        }
        y
    }

    /// Impulse train at `f0` shaped by a glottal low-pass, F1 and F2 resonators and lip radiation.
    pub fn vowel(f1: f64, f2: f64, f0: f64, sr: u32, duration: f64) -> Waveform {
        let srf = sr as f64;
        let n = (duration * srf) as usize;
        let period = srf / f0;
        let mut source = vec![0.0; n];
        let mut next = 0.0;
        while (next as usize) < n {
            source[next as usize] = 1.0;
            next += period;
        }
        // glottal spectral tilt: two real poles near DC
        let mut glottal = source.clone();
        for _ in 0..2 {
            let mut prev = 0.0;
            for v in glottal.iter_mut() {
                prev = *v + 0.95 * prev;
                *v = prev;
            }
        }
        let y = resonate(&glottal, f1, 60.0 + 0.05 * f1, srf);
        let mut y = resonate(&y, f2, 80.0 + 0.03 * f2, srf);
        // lip radiation: first difference
        for n in (1..y.len()).rev() {
            y[n] -= y[n - 1];
        }
        let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Waveform::new(y.iter().map(|v| 0.5 * v / peak).collect(), sr).unwrap()
    }
}
