//! Mel-frequency cepstra and DTW-aligned mel cepstral distortion.
//!
//! The front end is magnitude STFT, HTK-spaced triangular mel filters, natural
//! log with a floor of 1e-10 and an orthonormal DCT-II. MCD skips `c0`, so it
//! ignores overall level.

use std::f64::consts::{LN_10, PI};
use std::io::BufRead;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dtw::{dtw, DtwResult};
use crate::error::{Error, Result};
use crate::signal::{frame_signal, Waveform, Window};

const LOG_FLOOR: f64 = 1e-10;

/// `10 * sqrt(2) / ln 10`, the dB scale factor of MCD.
pub const MCD_SCALE: f64 = 10.0 * std::f64::consts::SQRT_2 / LN_10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CepstrumConfig {
    pub frame_s: f64,
    pub hop_s: f64,
    pub n_mels: usize,
    /// Highest coefficient index kept; tracks hold `c0..=cK`.
    pub order: usize,
    pub fmin: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub fmax: Option<f64>,
}

impl Default for CepstrumConfig {
    fn default() -> Self {
        Self {
            frame_s: 0.025,
            hop_s: 0.010,
            n_mels: 40,
            order: 13,
            fmin: 0.0,
            fmax: None,
        }
    }
}

impl CepstrumConfig {
    fn fingerprint(&self, sample_rate: u32) -> String {
        let fmax = self.fmax.unwrap_or(sample_rate as f64 / 2.0);
        format!(
            "mfcc-sr{sample_rate}-win{}ms-hop{}ms-hann-mel{}-{}-{}Hz-K{}",
            self.frame_s * 1000.0,
            self.hop_s * 1000.0,
            self.n_mels,
            self.fmin,
            fmax,
            self.order
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CepstrumTrack {
    /// One row of `c0..=cK` per frame.
    pub frames: Vec<Vec<f64>>,
    pub hop: f64,
    pub config_fingerprint: String,
}

impl CepstrumTrack {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filter weights, `n_mels` rows over `n_fft / 2 + 1` bins.
fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: f64, fmin: f64, fmax: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bins = n_fft / 2 + 1;
    (0..n_mels)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate / n_fft as f64;
                    let rise = (f - left) / (center - left);
                    let fall = (right - f) / (right - center);
                    rise.min(fall).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II, first `keep` outputs.
fn dct2(x: &[f64], keep: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..keep)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                .sum();
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            s * scale
        })
        .collect()
}

pub fn mel_cepstrum(w: &Waveform, cfg: &CepstrumConfig) -> Result<CepstrumTrack> {
    if w.is_empty() {
        return Err(Error::EmptyInput("waveform has no samples".into()));
    }
    if cfg.order < 10 || cfg.order >= cfg.n_mels {
        return Err(Error::InvalidArgument(format!(
            "cepstral order {} must be in [10, n_mels)",
            cfg.order
        )));
    }
    let sr = w.sample_rate() as f64;
    let fmax = cfg.fmax.unwrap_or(sr / 2.0);
    if !(cfg.fmin >= 0.0 && cfg.fmin < fmax && fmax <= sr / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "mel range [{}, {fmax}] Hz invalid at {sr} Hz",
            cfg.fmin
        )));
    }
    let framed = frame_signal(w, cfg.frame_s, cfg.hop_s, Window::Hann)?;
    let n_fft = framed.frame_length.next_power_of_two();
    let bank = mel_filterbank(cfg.n_mels, n_fft, sr, cfg.fmin, fmax);
    let fft = FftPlanner::new().plan_fft_forward(n_fft);

    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let frames = framed
        .frames
        .iter()
        .map(|frame| {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (b, &s) in buf.iter_mut().zip(frame) {
                b.re = s;
            }
            fft.process(&mut buf);
            let mag: Vec<f64> = buf[..n_fft / 2 + 1].iter().map(|c| c.norm()).collect();
            let log_mel: Vec<f64> = bank
                .iter()
                .map(|filt| {
                    let e: f64 = filt.iter().zip(&mag).map(|(f, m)| f * m).sum();
                    e.max(LOG_FLOOR).ln()
                })
                .collect();
            dct2(&log_mel, cfg.order + 1)
        })
        .collect();
    Ok(CepstrumTrack {
        frames,
        hop: cfg.hop_s,
        config_fingerprint: cfg.fingerprint(w.sample_rate()),
    })
}

fn frame_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .skip(1)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// DTW over `c1..cK` with Euclidean local cost.
pub fn dtw_cepstra(a: &CepstrumTrack, b: &CepstrumTrack) -> Result<DtwResult> {
    if a.config_fingerprint != b.config_fingerprint {
        return Err(Error::Incompatible(format!(
            "cepstra computed with {} and {}",
            a.config_fingerprint, b.config_fingerprint
        )));
    }
    let width = a.frames.first().map_or(0, Vec::len);
    if a.frames.iter().chain(&b.frames).any(|f| f.len() != width) {
        return Err(Error::Incompatible("cepstral frames differ in length".into()));
    }
    dtw(a.num_frames(), b.num_frames(), |i, j| {
        frame_distance(&a.frames[i], &b.frames[j])
    })
}

/// Mel cepstral distortion in dB, averaged over the DTW path.
pub fn mcd(a: &CepstrumTrack, b: &CepstrumTrack) -> Result<f64> {
    Ok(MCD_SCALE * dtw_cepstra(a, b)?.mean_cost)
}

/// MCD together with the alignment, which the F0 metrics reuse.
pub fn mcd_with_path(a: &CepstrumTrack, b: &CepstrumTrack) -> Result<(f64, DtwResult)> {
    let path = dtw_cepstra(a, b)?;
    Ok((MCD_SCALE * path.mean_cost, path))
}

/// Cache layout: `#hop=`, `#config=`, then one comma-separated row per frame.
pub fn write_cepstrum(track: &CepstrumTrack) -> String {
    let mut out = format!("#hop={}\n#config={}\n", track.hop, track.config_fingerprint);
    for row in &track.frames {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn load_cepstrum<R: BufRead>(reader: R) -> Result<CepstrumTrack> {
    let mut hop = None;
    let mut config = None;
    let mut frames: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("hop=") {
                hop = Some(v.trim().parse::<f64>().map_err(|e| {
                    Error::parse(format!("cepstrum line {lineno}"), format!("bad hop value: {e}"))
                })?);
            } else if let Some(v) = comment.strip_prefix("config=") {
                config = Some(v.trim().to_string());
            }
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|f| {
                let v = f.trim().parse::<f64>().map_err(|e| {
                    Error::parse(format!("cepstrum line {lineno}"), format!("{f:?}: {e}"))
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::parse(format!("cepstrum line {lineno}"), "non-finite value"))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = frames.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    format!("cepstrum line {lineno}"),
                    format!("{} coefficients, expected {}", row.len(), first.len()),
                ));
            }
        }
        frames.push(row);
    }
    Ok(CepstrumTrack {
        frames,
        hop: hop.ok_or_else(|| Error::parse("cepstrum header", "missing #hop=<seconds> line"))?,
        config_fingerprint: config.unwrap_or_default(),
    })
}
