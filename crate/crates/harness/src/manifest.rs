//! Evaluation manifest: systems, utterances and per-(system, utterance) input files.
//!
//! Paths are resolved relative to the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::metrics::{Input, Metric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub name: String,
    pub hypothesized_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceSpec {
    pub id: String,
    /// Reference text for WER/CER.
    #[serde(default)]
    pub text: String,
    /// Groups tokens for vowel-space normalization.
    #[serde(default = "default_speaker")]
    pub speaker: String,
}

fn default_speaker() -> String {
    "speaker".into()
}

/// Files for one rendition of one utterance. Every field is optional; the
/// selected metrics decide which are required.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub audio: Option<PathBuf>,
    /// Praat TextGrid with a phone tier.
    pub alignment: Option<PathBuf>,
    /// Posteriorgram CSV.
    pub ppg: Option<PathBuf>,
    /// Accent embeddings keyed by source tag, e.g. `genaid`.
    #[serde(default)]
    pub accent_embeddings: BTreeMap<String, PathBuf>,
    pub speaker_embedding: Option<PathBuf>,
    /// Plain-text ASR hypothesis.
    pub transcript: Option<PathBuf>,
}

impl Entry {
    pub fn has(&self, input: &Input) -> bool {
        match input {
            Input::Audio => self.audio.is_some(),
            Input::Alignment => self.alignment.is_some(),
            Input::Ppg => self.ppg.is_some(),
            Input::AccentEmbedding(tag) => self.accent_embeddings.contains_key(tag),
            Input::SpeakerEmbedding => self.speaker_embedding.is_some(),
            Input::Transcript => self.transcript.is_some(),
        }
    }

    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        self.audio
            .iter()
            .chain(&self.alignment)
            .chain(&self.ppg)
            .chain(self.accent_embeddings.values())
            .chain(&self.speaker_embedding)
            .chain(&self.transcript)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.audio, &mut self.alignment, &mut self.ppg, &mut self.speaker_embedding, &mut self.transcript]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        self.accent_embeddings.values_mut().for_each(fix);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub formant_ceiling_hz: f64,
    /// Tier holding phone labels; the first tier when absent.
    pub alignment_tier: Option<String>,
    pub exclude_reduced_vowels: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            formant_ceiling_hz: 5000.0,
            alignment_tier: None,
            exclude_reduced_vowels: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalManifest {
    pub systems: Vec<SystemSpec>,
    pub utterances: Vec<UtteranceSpec>,
    /// Utterance id to reference files.
    pub ground_truth: BTreeMap<String, Entry>,
    /// System name to utterance id to files.
    pub outputs: BTreeMap<String, BTreeMap<String, Entry>>,
    #[serde(default)]
    pub settings: Settings,
}

impl EvalManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Parse(format!("manifest: {e}")))
    }

    /// Reads, parses and resolves relative paths against the manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::io(format!("reading manifest {}", path.display()), e))?;
        let mut m = Self::from_json(&text)?;
        m.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(m)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.ground_truth.values_mut().for_each(|e| e.resolve(base));
        for per_utt in self.outputs.values_mut() {
            per_utt.values_mut().for_each(|e| e.resolve(base));
        }
    }

    pub fn system_entry(&self, system: &str, utterance: &str) -> &Entry {
        &self.outputs[system][utterance]
    }

    /// Accent-embedding tags present in every ground-truth entry.
    pub fn accent_tags(&self) -> BTreeSet<String> {
        let mut entries = self.ground_truth.values();
        let Some(first) = entries.next() else {
            return BTreeSet::new();
        };
        let mut tags: BTreeSet<String> = first.accent_embeddings.keys().cloned().collect();
        for e in entries {
            tags.retain(|t| e.accent_embeddings.contains_key(t));
        }
        tags
    }

    /// Structural checks independent of the metric selection.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut names = BTreeSet::new();
        for s in &self.systems {
            if !names.insert(s.name.as_str()) {
                problems.push(format!("duplicate system {:?}", s.name));
            }
        }
        let mut ranks: Vec<u32> = self.systems.iter().map(|s| s.hypothesized_rank).collect();
        ranks.sort_unstable();
        if ranks.iter().enumerate().any(|(i, &r)| r as usize != i + 1) {
            problems.push(format!("hypothesized ranks {ranks:?} are not a permutation of 1..{}", ranks.len()));
        }
        let mut ids = BTreeSet::new();
        for u in &self.utterances {
            if !ids.insert(u.id.as_str()) {
                problems.push(format!("duplicate utterance id {:?}", u.id));
            }
            if !self.ground_truth.contains_key(&u.id) {
                problems.push(format!("utterance {:?} has no ground-truth entry", u.id));
            }
        }
        for s in &self.systems {
            match self.outputs.get(&s.name) {
                None => problems.push(format!("system {:?} has no outputs", s.name)),
                Some(per_utt) => {
                    for u in &self.utterances {
                        if !per_utt.contains_key(&u.id) {
                            problems.push(format!("system {:?} lacks utterance {:?}", s.name, u.id));
                        }
                    }
                }
            }
        }
        for name in self.outputs.keys() {
            if !names.contains(name.as_str()) {
                problems.push(format!("outputs for undeclared system {name:?}"));
            }
        }
        finish(problems)
    }

    /// Every selected metric has its inputs on both sides of every pair, and all
    /// referenced files exist.
    pub fn check_inputs(&self, metrics: &[Metric], systems: &[&SystemSpec]) -> Result<()> {
        let mut problems = Vec::new();
        for metric in metrics {
            for input in metric.inputs() {
                let sides = metric.input_sides(&input);
                for u in &self.utterances {
                    if sides.ground_truth && !self.ground_truth[&u.id].has(&input) {
                        problems.push(format!("{}: ground truth {:?} lacks {}", metric.name(), u.id, input.describe()));
                    }
                    if sides.system {
                        for s in systems {
                            if !self.system_entry(&s.name, &u.id).has(&input) {
                                problems.push(format!(
                                    "{}: system {:?} utterance {:?} lacks {}",
                                    metric.name(),
                                    s.name,
                                    u.id,
                                    input.describe()
                                ));
                            }
                        }
                    }
                }
            }
        }
        if metrics.iter().any(|m| matches!(m, Metric::Wer | Metric::Cer)) {
            for u in self.utterances.iter().filter(|u| u.text.trim().is_empty()) {
                problems.push(format!("WER/CER need reference text for utterance {:?}", u.id));
            }
        }
        let entries = self
            .utterances
            .iter()
            .map(|u| &self.ground_truth[&u.id])
            .chain(systems.iter().flat_map(|s| self.utterances.iter().map(|u| self.system_entry(&s.name, &u.id))));
        let mut missing = BTreeSet::new();
        for e in entries {
            for p in e.paths() {
                if !p.exists() {
                    missing.insert(p.display().to_string());
                }
            }
        }
        problems.extend(missing.into_iter().map(|p| format!("file not found: {p}")));
        finish(problems)
    }
}

fn finish(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        return Ok(());
    }
    let shown: Vec<&str> = problems.iter().take(10).map(String::as_str).collect();
    let more = problems.len().saturating_sub(shown.len());
    let mut msg = shown.join("; ");
    if more > 0 {
        msg.push_str(&format!("; and {more} more"));
    }
    Err(HarnessError::Config(msg))
}
