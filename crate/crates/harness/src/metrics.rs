//! Metric catalogue and the `--metrics` selector.

use std::fmt;

use accent_eval_core::stats::Direction;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::manifest::EvalManifest;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    VfRmse,
    PpgCosSim,
    PpgJs,
    /// Accent-embedding cosine similarity for one embedding source.
    AccentCosSim(String),
    SpeakerCosSim,
    Wer,
    Cer,
    Mcd,
    F0Rmse,
    F0PerRmse,
    F0Pcc,
}

/// A file kind a metric reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Input {
    Audio,
    Alignment,
    Ppg,
    AccentEmbedding(String),
    SpeakerEmbedding,
    Transcript,
}

impl Input {
    pub fn describe(&self) -> String {
        match self {
            Input::Audio => "audio".into(),
            Input::Alignment => "alignment".into(),
            Input::Ppg => "ppg".into(),
            Input::AccentEmbedding(t) => format!("accent embedding {t:?}"),
            Input::SpeakerEmbedding => "speaker embedding".into(),
            Input::Transcript => "transcript".into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Sides {
    pub ground_truth: bool,
    pub system: bool,
}

const FIXED: [&str; 10] = [
    "vf_rmse",
    "ppg_cossim",
    "ppg_js",
    "speaker_cossim",
    "wer",
    "cer",
    "mcd",
    "f0_rmse",
    "f0_per_rmse",
    "f0_pcc",
];

impl Metric {
    pub fn name(&self) -> String {
        match self {
            Metric::VfRmse => "vf_rmse".into(),
            Metric::PpgCosSim => "ppg_cossim".into(),
            Metric::PpgJs => "ppg_js".into(),
            Metric::AccentCosSim(tag) => format!("accent_cossim:{tag}"),
            Metric::SpeakerCosSim => "speaker_cossim".into(),
            Metric::Wer => "wer".into(),
            Metric::Cer => "cer".into(),
            Metric::Mcd => "mcd".into(),
            Metric::F0Rmse => "f0_rmse".into(),
            Metric::F0PerRmse => "f0_per_rmse".into(),
            Metric::F0Pcc => "f0_pcc".into(),
        }
    }

    fn from_fixed_name(name: &str) -> Option<Self> {
        Some(match name {
            "vf_rmse" => Metric::VfRmse,
            "ppg_cossim" => Metric::PpgCosSim,
            "ppg_js" => Metric::PpgJs,
            "speaker_cossim" => Metric::SpeakerCosSim,
            "wer" => Metric::Wer,
            "cer" => Metric::Cer,
            "mcd" => Metric::Mcd,
            "f0_rmse" => Metric::F0Rmse,
            "f0_per_rmse" => Metric::F0PerRmse,
            "f0_pcc" => Metric::F0Pcc,
            _ => return None,
        })
    }

    pub fn direction(&self) -> Direction {
        match self {
            Metric::PpgCosSim | Metric::AccentCosSim(_) | Metric::SpeakerCosSim | Metric::F0Pcc => {
                Direction::HigherBetter
            }
            _ => Direction::LowerBetter,
        }
    }

    pub fn inputs(&self) -> Vec<Input> {
        match self {
            Metric::VfRmse => vec![Input::Audio, Input::Alignment],
            Metric::PpgCosSim | Metric::PpgJs => vec![Input::Ppg],
            Metric::AccentCosSim(tag) => vec![Input::AccentEmbedding(tag.clone())],
            Metric::SpeakerCosSim => vec![Input::SpeakerEmbedding],
            Metric::Wer | Metric::Cer => vec![Input::Transcript],
            Metric::Mcd | Metric::F0Rmse | Metric::F0PerRmse | Metric::F0Pcc => vec![Input::Audio],
        }
    }

    /// Transcripts are compared with the manifest text, so only systems need them.
    pub fn input_sides(&self, input: &Input) -> Sides {
        Sides {
            ground_truth: *input != Input::Transcript,
            system: true,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses `all`, `available` or a comma list. `accent_cossim` alone expands to
/// every accent-embedding tag shared by the ground-truth entries.
pub fn select_metrics(selector: &str, manifest: &EvalManifest) -> Result<Vec<Metric>> {
    let tags = manifest.accent_tags();
    let everything = || {
        let mut v: Vec<Metric> = FIXED.iter().filter_map(|n| Metric::from_fixed_name(n)).collect();
        v.extend(tags.iter().map(|t| Metric::AccentCosSim(t.clone())));
        v.sort();
        v
    };
    let selector = selector.trim();
    let mut out = match selector {
        "all" => everything(),
        "available" => {
            let systems: Vec<_> = manifest.systems.iter().collect();
            everything()
                .into_iter()
                .filter(|m| manifest.check_inputs(std::slice::from_ref(m), &systems).is_ok())
                .collect()
        }
        _ => {
            let mut v = Vec::new();
            for part in selector.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                if let Some(m) = Metric::from_fixed_name(part) {
                    v.push(m);
                } else if part == "accent_cossim" {
                    if tags.is_empty() {
                        return Err(HarnessError::Config(
                            "accent_cossim selected but ground truth has no accent embeddings".into(),
                        ));
                    }
                    v.extend(tags.iter().map(|t| Metric::AccentCosSim(t.clone())));
                } else if let Some(tag) = part.strip_prefix("accent_cossim:") {
                    v.push(Metric::AccentCosSim(tag.to_string()));
                } else {
                    return Err(HarnessError::Config(format!(
                        "unknown metric {part:?}; known: {}, accent_cossim[:tag], all, available",
                        FIXED.join(", ")
                    )));
                }
            }
            v.sort();
            v
        }
    };
    out.dedup();
    if out.is_empty() {
        return Err(HarnessError::Config(format!("metric selector {selector:?} selects nothing")));
    }
    Ok(out)
}
