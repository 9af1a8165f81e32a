//! Wire and storage types of the XAB listening test.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ListenError;

/// Which candidate; in stored answers this is the underlying candidate, never the screen slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl Choice {
    pub fn flipped(self) -> Self {
        match self {
            Choice::A => Choice::B,
            Choice::B => Choice::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Variant {
    #[serde(default)]
    pub show_transcript: bool,
    #[serde(default)]
    pub require_highlight: bool,
}

impl Variant {
    /// Short design name: `XAB`, `XAB+trans` or `XAB+trans+highlight`.
    pub fn label(&self) -> &'static str {
        match (self.show_transcript, self.require_highlight) {
            (false, false) => "XAB",
            (true, false) => "XAB+trans",
            (true, true) => "XAB+trans+highlight",
            (false, true) => "XAB+highlight",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XabItem {
    pub item_id: String,
    /// X, the accent reference.
    pub reference_audio_id: String,
    pub candidate_a_audio_id: String,
    pub candidate_b_audio_id: String,
    #[serde(default)]
    pub transcript: String,
    /// Mixed into the per-listener A/B position draw.
    #[serde(default)]
    pub ab_assignment_seed: u64,
}

impl XabItem {
    pub fn transcript_len(&self) -> usize {
        self.transcript.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionItem {
    #[serde(flatten)]
    pub item: XabItem,
    pub expected: Choice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AidQuestion {
    pub prompt: String,
    pub accepted_keywords: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestDefinition {
    pub test_id: String,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub instructions: String,
    pub items: Vec<XabItem>,
    #[serde(default)]
    pub attention_items: Vec<AttentionItem>,
    pub aid_question: Option<AidQuestion>,
    pub target_valid_submissions: u32,
    /// Base seed of the A/B position randomization.
    #[serde(default)]
    pub seed: u64,
    /// Tests sharing a group refuse a listener who already took any of them.
    #[serde(default)]
    pub exclusive_group: Option<String>,
}

impl TestDefinition {
    pub fn validate(&self) -> Result<(), ListenError> {
        let bad = |m: String| Err(ListenError::Validation(m));
        if self.test_id.trim().is_empty() {
            return bad("test_id is empty".into());
        }
        if self.items.is_empty() {
            return bad("a test needs at least one item".into());
        }
        let mut ids = BTreeSet::new();
        let all = self.items.iter().chain(self.attention_items.iter().map(|a| &a.item));
        for item in all {
            if !ids.insert(item.item_id.as_str()) {
                return bad(format!("duplicate item_id {:?}", item.item_id));
            }
            let audio = [
                &item.reference_audio_id,
                &item.candidate_a_audio_id,
                &item.candidate_b_audio_id,
            ];
            if audio.iter().any(|a| a.is_empty()) {
                return bad(format!("item {:?} has an empty audio id", item.item_id));
            }
            if audio[0] == audio[1] || audio[0] == audio[2] || audio[1] == audio[2] {
                return bad(format!("item {:?} reuses an audio id", item.item_id));
            }
            if self.variant.show_transcript && item.transcript.trim().is_empty() {
                return bad(format!("item {:?} needs a transcript in this variant", item.item_id));
            }
        }
        if let Some(aid) = &self.aid_question {
            if aid.accepted_keywords.is_empty() || aid.accepted_keywords.iter().any(|k| k.trim().is_empty()) {
                return bad("AID screening needs non-empty keywords".into());
            }
            if aid.accepted_keywords.iter().any(|k| k.to_lowercase() != *k) {
                return bad("AID keywords must be lowercase".into());
            }
        }
        if self.target_valid_submissions == 0 {
            return bad("target_valid_submissions must be positive".into());
        }
        Ok(())
    }

    pub fn find_item(&self, item_id: &str) -> Option<(&XabItem, Option<Choice>)> {
        self.items
            .iter()
            .find(|i| i.item_id == item_id)
            .map(|i| (i, None))
            .or_else(|| {
                self.attention_items
                    .iter()
                    .find(|a| a.item.item_id == item_id)
                    .map(|a| (&a.item, Some(a.expected)))
            })
    }
}

/// Half-open character range over the transcript's Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub char_start: usize,
    pub char_end: usize,
}

/// Sorts and merges overlapping or touching spans.
pub fn merge_spans(spans: &[HighlightSpan]) -> Vec<HighlightSpan> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    let mut out: Vec<HighlightSpan> = Vec::with_capacity(sorted.len());
    for s in sorted {
        match out.last_mut() {
            Some(last) if s.char_start <= last.char_end => last.char_end = last.char_end.max(s.char_end),
            _ => out.push(s),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Real,
    Attention,
}

/// One slot of a listener's presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderEntry {
    pub item_id: String,
    pub kind: ItemKind,
    /// True when candidate B is shown in the A slot.
    pub swapped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemAnswer {
    pub item_id: String,
    pub screen_choice: Choice,
    pub choice: Choice,
    pub swapped: bool,
    pub elapsed_ms: u64,
    pub highlights: Vec<HighlightSpan>,
    /// Pass or fail against the expected answer, attention items only.
    pub attention_passed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScreeningReason {
    AttentionFailed { item_ids: Vec<String> },
    AidFailed { aid_answer: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub valid: bool,
    pub reasons: Vec<ScreeningReason>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningOverride {
    pub valid: bool,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub submission_id: String,
    pub test_id: String,
    pub listener_id: String,
    pub answers: Vec<ItemAnswer>,
    pub aid_answer: String,
    pub screening: ScreeningResult,
    pub completed_at: String,
    pub manual_override: Option<ScreeningOverride>,
    /// Recruitment-platform fields, stored verbatim.
    #[serde(default)]
    pub listener_metadata: BTreeMap<String, String>,
}

impl Submission {
    /// Validity after any manual adjudication.
    pub fn is_valid(&self) -> bool {
        self.manual_override.as_ref().map_or(self.screening.valid, |o| o.valid)
    }
}
