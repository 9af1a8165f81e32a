//! Per-speaker, per-vowel normalized formant summaries for ground truth and systems.

use std::collections::BTreeMap;

use accent_eval_core::formant::{measure_token, vowel_space_summary, FormantMeasurement, VowelSpaceSummary};
use accent_eval_core::signal::load_wav_file;
use rayon::prelude::*;

use crate::compute::{read_vowels, Analysis};
use crate::error::{HarnessError, Result};
use crate::manifest::{Entry, EvalManifest};
use crate::metrics::Metric;

pub const GROUND_TRUTH_KEY: &str = "ground_truth";

/// Rendition name to speaker to vowel statistics.
pub type VowelSpaceExport = BTreeMap<String, BTreeMap<String, VowelSpaceSummary>>;

fn measure_entry(entry: &Entry, an: &Analysis) -> Result<(Vec<FormantMeasurement>, usize)> {
    let audio_path = entry.audio.as_deref().expect("checked before");
    let tg_path = entry.alignment.as_deref().expect("checked before");
    let audio = load_wav_file(audio_path)?;
    let vowels = read_vowels(tg_path, an.alignment_tier.as_deref(), &an.inventory).map_err(HarnessError::Parse)?;
    let mut failed = 0;
    let mut out = Vec::new();
    for t in &vowels {
        match measure_token(&audio, t, &an.formant) {
            Ok(m) => out.push(m),
            Err(e) => {
                failed += 1;
                log::warn!("{}: vowel {} at {:.3} s skipped: {e}", audio_path.display(), t.base_label, t.midpoint);
            }
        }
    }
    Ok((out, failed))
}

/// `systems = None` exports every system; an empty list exports nothing.
pub fn export_vowel_space(m: &EvalManifest, systems: Option<&[String]>, jobs: usize) -> Result<VowelSpaceExport> {
    m.validate()?;
    let chosen: Vec<String> = match systems {
        None => m.systems.iter().map(|s| s.name.clone()).collect(),
        Some([]) => return Ok(BTreeMap::new()),
        Some(list) => list.to_vec(),
    };
    let specs = chosen
        .iter()
        .map(|name| {
            m.systems
                .iter()
                .find(|s| &s.name == name)
                .ok_or_else(|| HarnessError::Config(format!("unknown system {name:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if chosen.iter().any(|n| n == GROUND_TRUTH_KEY) {
        return Err(HarnessError::Config(format!("system name {GROUND_TRUTH_KEY:?} is reserved")));
    }
    m.check_inputs(&[Metric::VfRmse], &specs)?;
    let an = Analysis::from_settings(&m.settings);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;

    let mut renditions: Vec<(String, Vec<&Entry>)> =
        vec![(GROUND_TRUTH_KEY.to_string(), m.utterances.iter().map(|u| &m.ground_truth[&u.id]).collect())];
    for name in &chosen {
        renditions.push((name.clone(), m.utterances.iter().map(|u| m.system_entry(name, &u.id)).collect()));
    }
    pool.install(|| {
        renditions
            .par_iter()
            .map(|(name, entries)| {
                let mut by_speaker: BTreeMap<String, Vec<FormantMeasurement>> = BTreeMap::new();
                for (utt, entry) in m.utterances.iter().zip(entries) {
                    let (tokens, _) = measure_entry(entry, &an)?;
                    by_speaker.entry(utt.speaker.clone()).or_default().extend(tokens);
                }
                Ok((name.clone(), vowel_space_summary(&by_speaker)?))
            })
            .collect()
    })
}
