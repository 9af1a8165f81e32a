//! Objective metrics for accent similarity between generated and reference speech.
//!
//! The crate is organized bottom-up:
//!
//! - [`signal`]: WAV decoding, framing and windows.
//! - [`align`]: Praat TextGrid parsing, vowel token extraction and cross-utterance pairing.
//! - [`formant`]: Burg LPC, root solving, F1/F2 at vowel midpoints, VF RMSE and vowel-space summaries.
//! - [`dtw`]: the DTW engine shared by posteriorgram distances, MCD and F0 alignment.
//! - [`ppg`]: posteriorgram loading and cosine / Jensen-Shannon pronunciation distances.
//! - [`spectral`]: mel cepstra and mel cepstral distortion.
//! - [`pitch`]: YIN F0 tracking and F0 RMSE / periodicity RMSE / PCC.
//! - [`text`] and [`embedding`]: WER/CER and embedding cosine similarity.
//! - [`stats`]: rank correlation, Student-t machinery, listener preference statistics.

pub mod align;
pub mod dtw;
pub mod embedding;
pub mod error;
pub mod formant;
pub mod pitch;
pub mod ppg;
pub mod signal;
pub mod spectral;
pub mod stats;
pub mod text;

pub use error::{Error, Result};
