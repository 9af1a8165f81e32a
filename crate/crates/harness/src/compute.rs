//! Per-file feature extraction and per-pair metric values.
//!
//! Failures are kept as strings next to the values so one bad file only
//! removes the metrics that depend on it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use accent_eval_core::align::{
    decode_textgrid_bytes, extract_vowels, pair_vowel_tokens, parse_textgrid, AlignmentTier, VowelInventory, VowelToken,
};
use accent_eval_core::dtw::DtwResult;
use accent_eval_core::embedding::{cosine_similarity, load_embedding_file, EmbeddingVector};
use accent_eval_core::formant::{measure_token, vf_rmse, FormantConfig, FormantMeasurement};
use accent_eval_core::pitch::{estimate_f0, f0_metrics, F0Track, PitchConfig};
use accent_eval_core::ppg::{load_ppg_file, ppg_similarity, Posteriorgram};
use accent_eval_core::signal::{load_wav_file, Waveform};
use accent_eval_core::spectral::{mcd_with_path, mel_cepstrum, CepstrumConfig, CepstrumTrack};
use accent_eval_core::text::{cer, wer, TranscriptPair};
use serde::{Deserialize, Serialize};

use crate::manifest::{Entry, Settings};
use crate::metrics::Metric;

pub type Val<T> = std::result::Result<T, String>;

/// Analysis settings shared by every item of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub formant: FormantConfig,
    pub cepstrum: CepstrumConfig,
    pub pitch: PitchConfig,
    pub inventory: VowelInventory,
    pub alignment_tier: Option<String>,
}

impl Analysis {
    pub fn from_settings(s: &Settings) -> Self {
        Self {
            formant: FormantConfig::with_ceiling(s.formant_ceiling_hz),
            cepstrum: CepstrumConfig::default(),
            pitch: PitchConfig::default(),
            inventory: VowelInventory {
                exclude_reduced: s.exclude_reduced_vowels,
                ..VowelInventory::default()
            },
            alignment_tier: s.alignment_tier.clone(),
        }
    }
}

/// Which features a metric set needs from one entry.
#[derive(Debug, Clone, Default)]
pub struct Needs {
    pub audio: bool,
    pub vowels: bool,
    pub cepstrum: bool,
    pub f0: bool,
    pub ppg: bool,
    pub accent: BTreeSet<String>,
    pub speaker: bool,
    pub transcript: bool,
}

impl Needs {
    pub fn for_metrics(metrics: &[Metric]) -> Self {
        let mut n = Needs::default();
        for m in metrics {
            match m {
                Metric::VfRmse => {
                    n.audio = true;
                    n.vowels = true;
                }
                Metric::PpgCosSim | Metric::PpgJs => n.ppg = true,
                Metric::AccentCosSim(tag) => {
                    n.accent.insert(tag.clone());
                }
                Metric::SpeakerCosSim => n.speaker = true,
                Metric::Wer | Metric::Cer => n.transcript = true,
                Metric::Mcd => {
                    n.audio = true;
                    n.cepstrum = true;
                }
                Metric::F0Rmse | Metric::F0PerRmse | Metric::F0Pcc => {
                    n.audio = true;
                    n.cepstrum = true;
                    n.f0 = true;
                }
            }
        }
        n
    }

    /// Ground truth is never transcribed.
    pub fn without_transcript(&self) -> Self {
        Self {
            transcript: false,
            ..self.clone()
        }
    }
}

#[derive(Debug, Default)]
pub struct Features {
    pub audio: Option<Val<Waveform>>,
    pub vowels: Option<Val<Vec<VowelToken>>>,
    pub cepstrum: Option<Val<CepstrumTrack>>,
    pub f0: Option<Val<F0Track>>,
    pub ppg: Option<Val<Posteriorgram>>,
    pub accent: BTreeMap<String, Val<EmbeddingVector>>,
    pub speaker: Option<Val<EmbeddingVector>>,
    pub transcript: Option<Val<String>>,
}

fn show(path: &Path, e: impl std::fmt::Display) -> String {
    format!("{}: {e}", path.display())
}

fn missing(what: &str) -> String {
    format!("no {what} in manifest entry")
}

pub fn read_vowels(path: &Path, tier: Option<&str>, inventory: &VowelInventory) -> Val<Vec<VowelToken>> {
    let bytes = std::fs::read(path).map_err(|e| show(path, e))?;
    let text = decode_textgrid_bytes(&bytes).map_err(|e| show(path, e))?;
    let tiers = parse_textgrid(&text).map_err(|e| show(path, e))?;
    let chosen = match tier {
        Some(name) => AlignmentTier::find(&tiers, name).ok_or_else(|| show(path, format!("no tier {name:?}")))?,
        None => tiers.first().ok_or_else(|| show(path, "no interval tier"))?,
    };
    Ok(extract_vowels(chosen, inventory))
}

pub fn extract(entry: &Entry, needs: &Needs, an: &Analysis) -> Features {
    let mut f = Features::default();
    if needs.audio {
        let audio = entry
            .audio
            .as_deref()
            .ok_or_else(|| missing("audio"))
            .and_then(|p| load_wav_file(p).map_err(|e| show(p, e)));
        if needs.cepstrum {
            f.cepstrum = Some(
                audio
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(|w| mel_cepstrum(w, &an.cepstrum).map_err(|e| e.to_string())),
            );
        }
        if needs.f0 {
            f.f0 = Some(
                audio
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(|w| estimate_f0(w, &an.pitch).map_err(|e| e.to_string())),
            );
        }
        f.audio = Some(audio);
    }
    if needs.vowels {
        f.vowels = Some(
            entry
                .alignment
                .as_deref()
                .ok_or_else(|| missing("alignment"))
                .and_then(|p| read_vowels(p, an.alignment_tier.as_deref(), &an.inventory)),
        );
    }
    if needs.ppg {
        f.ppg = Some(
            entry
                .ppg
                .as_deref()
                .ok_or_else(|| missing("ppg"))
                .and_then(|p| load_ppg_file(p).map_err(|e| show(p, e))),
        );
    }
    let embedding = |p: &Path| {
        load_embedding_file(p)
            .and_then(|r| r.vector())
            .map_err(|e| show(p, e))
    };
    for tag in &needs.accent {
        let v = entry
            .accent_embeddings
            .get(tag)
            .ok_or_else(|| missing(&format!("accent embedding {tag:?}")))
            .and_then(|p| embedding(p));
        f.accent.insert(tag.clone(), v);
    }
    if needs.speaker {
        f.speaker = Some(
            entry
                .speaker_embedding
                .as_deref()
                .ok_or_else(|| missing("speaker embedding"))
                .and_then(embedding),
        );
    }
    if needs.transcript {
        f.transcript = Some(
            entry
                .transcript
                .as_deref()
                .ok_or_else(|| missing("transcript"))
                .and_then(|p| std::fs::read_to_string(p).map_err(|e| show(p, e))),
        );
    }
    f
}

fn get<'a, T>(slot: &'a Option<Val<T>>, side: &str) -> Val<&'a T> {
    match slot {
        Some(Ok(v)) => Ok(v),
        Some(Err(e)) => Err(format!("{side}: {e}")),
        None => Err(format!("{side}: feature not extracted")),
    }
}

/// Keeps the path steps that fall inside both F0 tracks. Pitch frames are
/// longer than cepstral frames, so the tracks can be a frame or two shorter.
pub fn clip_path(path: &DtwResult, len_a: usize, len_b: usize) -> DtwResult {
    let (steps, costs): (Vec<_>, Vec<_>) = path
        .path
        .iter()
        .zip(&path.step_costs)
        .filter(|((i, j), _)| *i < len_a && *j < len_b)
        .map(|(&s, &c)| (s, c))
        .unzip();
    let mean_cost = if costs.is_empty() { 0.0 } else { costs.iter().sum::<f64>() / costs.len() as f64 };
    DtwResult {
        path: steps,
        step_costs: costs,
        mean_cost,
    }
}

/// Measures both sides of every paired vowel; pairs with a failed side are dropped.
pub fn paired_measurements(
    gt_audio: &Waveform,
    gt_vowels: &[VowelToken],
    sys_audio: &Waveform,
    sys_vowels: &[VowelToken],
    cfg: &FormantConfig,
) -> (Vec<(FormantMeasurement, FormantMeasurement)>, usize) {
    let mut failed = 0;
    let mut out = Vec::new();
    for (a, b) in pair_vowel_tokens(gt_vowels, sys_vowels) {
        match (measure_token(gt_audio, &a, cfg), measure_token(sys_audio, &b, cfg)) {
            (Ok(ma), Ok(mb)) => out.push((ma, mb)),
            _ => failed += 1,
        }
    }
    (out, failed)
}

/// All selected metric values for one (ground truth, system) pair.
pub fn evaluate(
    gt: &Features,
    sys: &Features,
    reference_text: &str,
    metrics: &[Metric],
    an: &Analysis,
) -> BTreeMap<Metric, Val<f64>> {
    let mut ppg = None;
    let mut mcd = None;
    let mut f0 = None;
    let mut out = BTreeMap::new();
    for m in metrics {
        let v = match m {
            Metric::VfRmse => (|| {
                let (ga, sa) = (get(&gt.audio, "ground truth")?, get(&sys.audio, "system")?);
                let (gv, sv) = (get(&gt.vowels, "ground truth")?, get(&sys.vowels, "system")?);
                let (pairs, failed) = paired_measurements(ga, gv, sa, sv, &an.formant);
                if failed > 0 {
                    log::debug!("{failed} vowel pair(s) failed formant extraction");
                }
                vf_rmse(&pairs)
                    .map(|r| r.pooled)
                    .map_err(|e| format!("{e} ({failed} pair(s) failed extraction)"))
            })(),
            Metric::PpgCosSim | Metric::PpgJs => {
                let sim = ppg.get_or_insert_with(|| {
                    let (a, b) = (get(&gt.ppg, "ground truth")?, get(&sys.ppg, "system")?);
                    ppg_similarity(a, b).map_err(|e| e.to_string())
                });
                sim.clone()
                    .map(|s| if *m == Metric::PpgCosSim { s.ppg_cossim } else { s.ppg_js })
            }
            Metric::AccentCosSim(tag) => (|| {
                let side = |f: &Features, name: &str| match f.accent.get(tag) {
                    Some(Ok(v)) => Ok(v.clone()),
                    Some(Err(e)) => Err(format!("{name}: {e}")),
                    None => Err(format!("{name}: accent embedding {tag:?} not extracted")),
                };
                cosine_similarity(&side(gt, "ground truth")?, &side(sys, "system")?).map_err(|e| e.to_string())
            })(),
            Metric::SpeakerCosSim => (|| {
                cosine_similarity(get(&gt.speaker, "ground truth")?, get(&sys.speaker, "system")?)
                    .map_err(|e| e.to_string())
            })(),
            Metric::Wer | Metric::Cer => (|| {
                let pair = TranscriptPair {
                    reference: reference_text.to_string(),
                    hypothesis: get(&sys.transcript, "system")?.clone(),
                };
                let r = if *m == Metric::Wer { wer(&pair) } else { cer(&pair) };
                r.map_err(|e| e.to_string())
            })(),
            Metric::Mcd | Metric::F0Rmse | Metric::F0PerRmse | Metric::F0Pcc => {
                let aligned = mcd.get_or_insert_with(|| {
                    let (a, b) = (get(&gt.cepstrum, "ground truth")?, get(&sys.cepstrum, "system")?);
                    mcd_with_path(a, b).map_err(|e| e.to_string())
                });
                if *m == Metric::Mcd {
                    aligned.as_ref().map(|(d, _)| *d).map_err(Clone::clone)
                } else {
                    let fm = f0.get_or_insert_with(|| {
                        let (_, path) = aligned.as_ref().map_err(Clone::clone)?;
                        let (a, b) = (get(&gt.f0, "ground truth")?, get(&sys.f0, "system")?);
                        f0_metrics(a, b, &clip_path(path, a.len(), b.len())).map_err(|e| e.to_string())
                    });
                    match (m, fm) {
                        (_, Err(e)) => Err(e.clone()),
                        (Metric::F0PerRmse, Ok(r)) => Ok(r.per_rmse),
                        (Metric::F0Rmse, Ok(r)) => r
                            .f0_rmse
                            .ok_or_else(|| format!("only {} co-voiced frame(s)", r.co_voiced)),
                        (_, Ok(r)) => r.f0_pcc.ok_or_else(|| {
                            format!("PCC undefined ({} co-voiced frames, or constant F0)", r.co_voiced)
                        }),
                    }
                }
            }
        };
        out.insert(m.clone(), v);
    }
    out
}
