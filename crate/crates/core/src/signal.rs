//! Mono waveforms, RIFF/WAVE decoding and framing.
//!
//! Integer PCM is scaled by 1/32768. Multi-channel audio is mixed down by
//! averaging channels. No resampling happens here; consumers that need a
//! particular rate do it themselves or reject mismatched inputs.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;
const WAVE_FORMAT_PCM: u16 = 1;
const WAVE_FORMAT_IEEE_FLOAT: u16 = 3;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Single-channel audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Window applied to each frame by [`frame_signal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
    Hamming,
}

impl Window {
    /// Symmetric window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![1.0];
        }
        let denom = (n - 1) as f64;
        (0..n)
            .map(|i| {
                let phase = 2.0 * PI * i as f64 / denom;
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => 0.5 - 0.5 * phase.cos(),
                    Window::Hamming => 0.54 - 0.46 * phase.cos(),
                }
            })
            .collect()
    }
}

/// Frames cut from a waveform, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Vec<f64>>,
    /// Hop between frame starts, in seconds.
    pub hop: f64,
    /// Frame length in samples.
    pub frame_length: usize,
    /// Start time of each frame, in seconds.
    pub start_times: Vec<f64>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Sample index at which frame `index` starts.
pub fn frame_start_sample(index: usize, hop_s: f64, sample_rate: u32) -> usize {
    (index as f64 * hop_s * sample_rate as f64).round() as usize
}

/// Number of whole frames that fit into `len` samples.
pub fn frame_count(len: usize, frame_length: usize, hop_s: f64, sample_rate: u32) -> usize {
    if frame_length == 0 || len < frame_length {
        return 0;
    }
    let mut count = 0;
    while frame_start_sample(count, hop_s, sample_rate) + frame_length <= len {
        count += 1;
    }
    count
}

/// Cuts left-aligned frames; the trailing partial frame is dropped.
pub fn frame_signal(
    w: &Waveform,
    frame_length_s: f64,
    hop_s: f64,
    window: Window,
) -> Result<FrameSequence> {
    if !(hop_s > 0.0) || !(frame_length_s >= hop_s) {
        return Err(Error::InvalidArgument(format!(
            "need frame length >= hop > 0, got frame {frame_length_s} s, hop {hop_s} s"
        )));
    }
    let sr = w.sample_rate();
    let frame_length = (frame_length_s * sr as f64).round() as usize;
    let count = frame_count(w.len(), frame_length, hop_s, sr);
    if count == 0 {
        return Err(Error::EmptyInput(format!(
            "{} samples is shorter than one {frame_length}-sample frame",
            w.len()
        )));
    }
    let coeffs = window.coefficients(frame_length);
    let samples = w.samples();
    let frames = (0..count)
        .map(|i| {
            let start = frame_start_sample(i, hop_s, sr);
            samples[start..start + frame_length]
                .iter()
                .zip(&coeffs)
                .map(|(s, c)| s * c)
                .collect()
        })
        .collect();
    Ok(FrameSequence {
        frames,
        hop: hop_s,
        frame_length,
        start_times: (0..count).map(|i| i as f64 * hop_s).collect(),
    })
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    if body.len() < 16 {
        return Err(Error::parse("fmt chunk", format!("{} bytes, need at least 16", body.len())));
    }
    let mut format = read_u16(body, 0);
    let channels = read_u16(body, 2);
    let sample_rate = read_u32(body, 4);
    let bits_per_sample = read_u16(body, 14);
    if format == WAVE_FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(Error::parse("fmt chunk", "truncated WAVE_FORMAT_EXTENSIBLE header"));
        }
        // first two bytes of the sub-format GUID carry the actual format tag
        format = read_u16(body, 24);
    }
    if channels == 0 {
        return Err(Error::parse("fmt chunk", "zero channels"));
    }
    if sample_rate == 0 {
        return Err(Error::parse("fmt chunk", "zero sample rate"));
    }
    Ok(FmtChunk {
        format,
        channels,
        sample_rate,
        bits_per_sample,
    })
}

/// Decodes a RIFF/WAVE byte stream holding 16-bit PCM or 32-bit float samples.
pub fn load_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::parse("RIFF header", "missing RIFF/WAVE signature"));
    }
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let name = String::from_utf8_lossy(id).into_owned();
        let body_end = body_start.checked_add(size).filter(|&e| e <= bytes.len());
        let body = match (body_end, id) {
            (Some(end), _) => &bytes[body_start..end],
            // tolerate writers that leave a streaming-size placeholder in the data chunk
            (None, b"data") => &bytes[body_start..],
            (None, _) => {
                return Err(Error::parse(
                    format!("'{name}' chunk"),
                    format!("declared size {size} exceeds remaining {} bytes", bytes.len() - body_start),
                ))
            }
        };
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_start + body.len() + (body.len() & 1);
    }
    let fmt = fmt.ok_or_else(|| Error::parse("fmt chunk", "missing"))?;
    let data = data.ok_or_else(|| Error::parse("data chunk", "missing"))?;
    let channels = fmt.channels as usize;

    let interleaved: Vec<f64> = match (fmt.format, fmt.bits_per_sample) {
        (WAVE_FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / PCM16_SCALE)
            .collect(),
        (WAVE_FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        (format, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "format tag {format} with {bits} bits per sample (need PCM 16-bit or float 32-bit)"
            )))
        }
    };
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    Waveform::new(samples, fmt.sample_rate)
        .map_err(|e| Error::parse("data chunk", e.to_string()))
}

pub fn load_wav_file(path: impl AsRef<Path>) -> Result<Waveform> {
    let bytes = std::fs::read(path.as_ref())?;
    load_wav(&bytes)
}

/// Encodes a waveform as mono 16-bit PCM. Samples are clamped to the int16 range.
pub fn write_wav_pcm16(w: &Waveform) -> Vec<u8> {
    let data_len = w.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate().to_le_bytes());
    out.extend_from_slice(&(w.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in w.samples() {
        let v = (s * PCM16_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
