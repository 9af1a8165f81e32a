//! Vowel tokens at interval midpoints and their pairing across two renditions of one text.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::textgrid::AlignmentTier;

/// Monophthongs and diphthongs of the ARPABET set used by US-English aligner dictionaries.
pub const ARPABET_VOWELS: [&str; 15] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW",
];

/// Labels that mark silence or noise; never vowels.
pub fn is_silence_label(label: &str) -> bool {
    matches!(label.trim(), "" | "sil" | "sp" | "spn" | "<eps>")
}

/// Removes a trailing ARPABET stress digit (`AH0` becomes `AH`).
pub fn strip_stress(label: &str) -> &str {
    label.trim().trim_end_matches(|c: char| c.is_ascii_digit())
}

/// Set of base vowel labels to keep, plus the reduced-vowel switch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VowelInventory {
    pub vowels: BTreeSet<String>,
    /// Drop unstressed `AH0` (schwa) tokens.
    #[serde(default)]
    pub exclude_reduced: bool,
}

impl Default for VowelInventory {
    fn default() -> Self {
        Self {
            vowels: ARPABET_VOWELS.iter().map(|v| v.to_string()).collect(),
            exclude_reduced: false,
        }
    }
}

impl VowelInventory {
    /// Base label if `label` counts as a vowel under this inventory.
    pub fn classify<'a>(&self, label: &'a str) -> Option<&'a str> {
        if is_silence_label(label) {
            return None;
        }
        let label = label.trim();
        let base = strip_stress(label);
        if !self.vowels.contains(&base.to_ascii_uppercase()) {
            return None;
        }
        if self.exclude_reduced && base.eq_ignore_ascii_case("AH") && label.ends_with('0') {
            return None;
        }
        Some(base)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VowelToken {
    /// Upper-case ARPABET vowel without stress digit.
    pub base_label: String,
    /// Midpoint of the source interval, seconds.
    pub midpoint: f64,
    /// Ordinal among the vowels of the utterance.
    pub source_index: usize,
}

pub fn extract_vowels(tier: &AlignmentTier, inventory: &VowelInventory) -> Vec<VowelToken> {
    tier.intervals
        .iter()
        .filter_map(|iv| {
            inventory
                .classify(&iv.label)
                .map(|base| (base.to_ascii_uppercase(), iv.midpoint()))
        })
        .enumerate()
        .map(|(source_index, (base_label, midpoint))| VowelToken {
            base_label,
            midpoint,
            source_index,
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Step {
    Start,
    Diagonal,
    SkipA,
    SkipB,
}

/// Aligns two vowel sequences by unit-cost edit distance and returns the identical-label matches.
///
/// Among minimum-cost alignments the one with the most matches wins; remaining
/// ties are broken in a fixed orientation chosen from the label sequences, so
/// swapping the arguments swaps each returned pair and nothing else.
pub fn pair_vowel_tokens(a: &[VowelToken], b: &[VowelToken]) -> Vec<(VowelToken, VowelToken)> {
    let labels = |s: &[VowelToken]| s.iter().map(|t| t.base_label.clone()).collect::<Vec<_>>();
    let order = labels(a)
        .cmp(&labels(b))
        .then_with(|| {
            let mids = |s: &[VowelToken]| s.iter().map(|t| t.midpoint).collect::<Vec<_>>();
            mids(a)
                .partial_cmp(&mids(b))
                .unwrap_or(Ordering::Equal)
        });
    if order == Ordering::Greater {
        return align_matches(b, a)
            .into_iter()
            .map(|(x, y)| (y, x))
            .collect();
    }
    align_matches(a, b)
}

fn align_matches(a: &[VowelToken], b: &[VowelToken]) -> Vec<(VowelToken, VowelToken)> {
    let (n, m) = (a.len(), b.len());
    // (cost, -matches) compared lexicographically
    let mut score = vec![vec![(0usize, 0isize); m + 1]; n + 1];
    let mut step = vec![vec![Step::Start; m + 1]; n + 1];
    for i in 1..=n {
        score[i][0] = (i, 0);
        step[i][0] = Step::SkipA;
    }
    for j in 1..=m {
        score[0][j] = (j, 0);
        step[0][j] = Step::SkipB;
    }
    for i in 1..=n {
        for j in 1..=m {
            let same = a[i - 1].base_label == b[j - 1].base_label;
            let (dc, dm) = score[i - 1][j - 1];
            let diag = (dc + usize::from(!same), dm - isize::from(same));
            let up = (score[i - 1][j].0 + 1, score[i - 1][j].1);
            let left = (score[i][j - 1].0 + 1, score[i][j - 1].1);
            let (mut best, mut best_step) = (diag, Step::Diagonal);
            if up < best {
                best = up;
                best_step = Step::SkipA;
            }
            if left < best {
                best = left;
                best_step = Step::SkipB;
            }
            score[i][j] = best;
            step[i][j] = best_step;
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match step[i][j] {
            Step::Diagonal => {
                if a[i - 1].base_label == b[j - 1].base_label {
                    pairs.push((a[i - 1].clone(), b[j - 1].clone()));
                }
                i -= 1;
                j -= 1;
            }
            Step::SkipA => i -= 1,
            Step::SkipB => j -= 1,
            Step::Start => break,
        }
    }
    pairs.reverse();
    pairs
}
