//! YIN pitch tracking and the frame-paired F0 metrics.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::dtw::DtwResult;
use crate::error::{Error, Result};
use crate::signal::{frame_signal, Waveform, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchConfig {
    pub fmin: f64,
    pub fmax: f64,
    pub frame_s: f64,
    pub hop_s: f64,
    /// Cumulative-mean-normalized difference threshold.
    pub threshold: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            fmin: 50.0,
            fmax: 600.0,
            frame_s: 0.040,
            hop_s: 0.010,
            threshold: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Track {
    /// Hz, 0 where unvoiced.
    pub f0: Vec<f64>,
    pub periodicity: Vec<f64>,
    pub voiced: Vec<bool>,
    pub hop: f64,
}

impl F0Track {
    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    fn empty(hop: f64) -> Self {
        Self {
            f0: Vec::new(),
            periodicity: Vec::new(),
            voiced: Vec::new(),
            hop,
        }
    }
}

/// Cumulative-mean-normalized difference d'(tau) for tau in 0..=max_lag.
fn cmnd(frame: &[f64], max_lag: usize) -> Vec<f64> {
    let width = frame.len() - max_lag;
    let mut d = vec![0.0; max_lag + 1];
    for (tau, slot) in d.iter_mut().enumerate().skip(1) {
        *slot = (0..width).map(|j| (frame[j] - frame[j + tau]).powi(2)).sum();
    }
    let mut out = vec![1.0; max_lag + 1];
    let mut running = 0.0;
    for tau in 1..=max_lag {
        running += d[tau];
        out[tau] = if running > 0.0 { d[tau] * tau as f64 / running } else { 1.0 };
    }
    out
}

/// Vertex offset of the parabola through three neighbouring samples.
fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom.abs() < f64::EPSILON {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Per-frame (f0, periodicity), f0 = 0 when no lag qualifies.
fn analyze_frame(frame: &[f64], sr: f64, min_lag: usize, max_lag: usize, cfg: &PitchConfig) -> (f64, f64) {
    if frame.iter().all(|&x| x == 0.0) {
        return (0.0, 0.0);
    }
    let dn = cmnd(frame, max_lag);
    let mut tau = min_lag;
    let mut found = None;
    while tau < max_lag {
        if dn[tau] < cfg.threshold {
            while tau + 1 < max_lag && dn[tau + 1] < dn[tau] {
                tau += 1;
            }
            found = Some(tau);
            break;
        }
        tau += 1;
    }
    let Some(tau) = found else {
        let best = dn[min_lag..max_lag].iter().cloned().fold(f64::INFINITY, f64::min);
        return (0.0, (1.0 - best).clamp(0.0, 1.0));
    };
    let periodicity = (1.0 - dn[tau]).clamp(0.0, 1.0);
    let refined = tau as f64 + parabolic_offset(dn[tau - 1], dn[tau], dn[tau + 1]);
    let f0 = sr / refined;
    if (cfg.fmin..=cfg.fmax).contains(&f0) {
        (f0, periodicity)
    } else {
        (0.0, periodicity)
    }
}

pub fn estimate_f0(w: &Waveform, cfg: &PitchConfig) -> Result<F0Track> {
    if !(cfg.fmin > 0.0 && cfg.fmin < cfg.fmax) {
        return Err(Error::InvalidArgument(format!(
            "pitch range [{}, {}] Hz is empty",
            cfg.fmin, cfg.fmax
        )));
    }
    let sr = w.sample_rate() as f64;
    if sr < 8.0 * cfg.fmax {
        return Err(Error::InvalidArgument(format!(
            "sample rate {sr} Hz is below 8 x fmax = {} Hz",
            8.0 * cfg.fmax
        )));
    }
    let max_lag = (sr / cfg.fmin).ceil() as usize + 1;
    let min_lag = ((sr / cfg.fmax).floor() as usize).max(2);
    let frame_len = (cfg.frame_s * sr).round() as usize;
    if frame_len <= max_lag {
        return Err(Error::InvalidArgument(format!(
            "{} ms frame cannot hold a {} Hz period",
            cfg.frame_s * 1000.0,
            cfg.fmin
        )));
    }
    let framed = match frame_signal(w, cfg.frame_s, cfg.hop_s, Window::Rectangular) {
        Ok(f) => f,
        Err(Error::EmptyInput(_)) => return Ok(F0Track::empty(cfg.hop_s)),
        Err(e) => return Err(e),
    };
    let mut track = F0Track::empty(cfg.hop_s);
    for frame in &framed.frames {
        let (f0, per) = analyze_frame(frame, sr, min_lag, max_lag, cfg);
        track.f0.push(f0);
        track.periodicity.push(per);
        track.voiced.push(f0 > 0.0);
    }
    Ok(track)
}

/// `f0_rmse` and `f0_pcc` are `None` when fewer than two path steps are voiced in
/// both tracks; `f0_pcc` is also `None` when either side has no F0 variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Metrics {
    pub f0_rmse: Option<f64>,
    pub per_rmse: f64,
    pub f0_pcc: Option<f64>,
    pub co_voiced: usize,
}

fn rmse(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (sum, n) = pairs.fold((0.0, 0usize), |(s, n), (x, y)| (s + (x - y).powi(2), n + 1));
    (sum / n as f64).sqrt()
}

/// Pearson correlation; `None` if either side is constant.
pub fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn f0_metrics(a: &F0Track, b: &F0Track, path: &DtwResult) -> Result<F0Metrics> {
    if (a.hop - b.hop).abs() > 1e-9 {
        return Err(Error::Incompatible(format!("F0 hops {} s and {} s differ", a.hop, b.hop)));
    }
    if path.path.is_empty() {
        return Err(Error::EmptyInput("alignment path is empty".into()));
    }
    if let Some(&(i, j)) = path.path.iter().find(|&&(i, j)| i >= a.len() || j >= b.len()) {
        return Err(Error::Incompatible(format!(
            "path step ({i}, {j}) outside tracks of {} and {} frames",
            a.len(),
            b.len()
        )));
    }
    let per_rmse = rmse(path.path.iter().map(|&(i, j)| (a.periodicity[i], b.periodicity[j])));
    let voiced: Vec<(f64, f64)> = path
        .path
        .iter()
        .filter(|&&(i, j)| a.voiced[i] && b.voiced[j])
        .map(|&(i, j)| (a.f0[i], b.f0[j]))
        .collect();
    let (f0_rmse, f0_pcc) = if voiced.len() < 2 {
        (None, None)
    } else {
        (Some(rmse(voiced.iter().copied())), pearson(&voiced))
    };
    Ok(F0Metrics {
        f0_rmse,
        per_rmse,
        f0_pcc,
        co_voiced: voiced.len(),
    })
}

/// Cache layout: `#hop=`, header `frame,f0,periodicity,voiced`, one row per frame.
pub fn write_f0(track: &F0Track) -> String {
    let mut out = format!("#hop={}\nframe,f0,periodicity,voiced\n", track.hop);
    for i in 0..track.len() {
        out.push_str(&format!(
            "{i},{},{},{}\n",
            track.f0[i],
            track.periodicity[i],
            u8::from(track.voiced[i])
        ));
    }
    out
}

pub fn load_f0<R: BufRead>(reader: R) -> Result<F0Track> {
    let mut hop = None;
    let mut track = F0Track::empty(0.0);
    let mut header_seen = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let ctx = || format!("F0 line {}", idx + 1);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(c) = trimmed.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("hop=") {
                hop = Some(v.trim().parse::<f64>().map_err(|e| Error::parse(ctx(), e.to_string()))?);
            }
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse(ctx(), format!("{} fields, expected 4", fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse(ctx(), format!("{s:?}: {e}")));
        let f0 = num(fields[1])?;
        let per = num(fields[2])?;
        let voiced = match fields[3] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(Error::parse(ctx(), format!("voiced flag {other:?}"))),
        };
        if voiced != (f0 > 0.0) || !(0.0..=1.0).contains(&per) {
            return Err(Error::parse(ctx(), "inconsistent voicing, f0 or periodicity"));
        }
        track.f0.push(f0);
        track.periodicity.push(per);
        track.voiced.push(voiced);
    }
    track.hop = hop.ok_or_else(|| Error::parse("F0 header", "missing #hop=<seconds> line"))?;
    Ok(track)
}
