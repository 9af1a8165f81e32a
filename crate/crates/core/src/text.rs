//! WER and CER over externally produced transcripts.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptPair {
    pub reference: String,
    pub hypothesis: String,
}

/// One line of a transcripts JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub utterance_id: String,
    pub reference: String,
    pub hypothesis: String,
}

impl TranscriptRecord {
    pub fn pair(&self) -> TranscriptPair {
        TranscriptPair {
            reference: self.reference.clone(),
            hypothesis: self.hypothesis.clone(),
        }
    }
}

fn is_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    )
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-' | '\u{2010}')
}

/// Lowercases, drops punctuation (keeping apostrophes and hyphens between
/// alphanumerics), collapses whitespace and trims.
pub fn normalize_text(s: &str) -> String {
    let chars: Vec<char> = s.chars().flat_map(char::to_lowercase).collect();
    let mut kept = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        if is_punctuation(c) {
            let inner = i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_alphanumeric()
                && chars[i + 1].is_alphanumeric();
            if is_joiner(c) && inner {
                kept.push(if c == '\u{2019}' { '\'' } else if c == '\u{2010}' { '-' } else { c });
            }
            continue;
        }
        kept.push(c);
    }
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Unit-cost Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn prepare(s: &str, normalize: bool) -> String {
    if normalize {
        normalize_text(s)
    } else {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

/// Word error rate over normalized text.
pub fn wer(t: &TranscriptPair) -> Result<f64> {
    wer_with(t, true)
}

pub fn wer_with(t: &TranscriptPair, normalize: bool) -> Result<f64> {
    let r = prepare(&t.reference, normalize);
    let h = prepare(&t.hypothesis, normalize);
    let rw: Vec<&str> = r.split(' ').filter(|w| !w.is_empty()).collect();
    let hw: Vec<&str> = h.split(' ').filter(|w| !w.is_empty()).collect();
    if rw.is_empty() {
        return Err(Error::UndefinedMetric("reference has no words".into()));
    }
    Ok(edit_distance(&rw, &hw) as f64 / rw.len() as f64)
}

/// Character error rate over normalized text, spaces included.
pub fn cer(t: &TranscriptPair) -> Result<f64> {
    cer_with(t, true)
}

pub fn cer_with(t: &TranscriptPair, normalize: bool) -> Result<f64> {
    let rc: Vec<char> = prepare(&t.reference, normalize).chars().collect();
    let hc: Vec<char> = prepare(&t.hypothesis, normalize).chars().collect();
    if rc.is_empty() {
        return Err(Error::UndefinedMetric("reference has no characters".into()));
    }
    Ok(edit_distance(&rc, &hc) as f64 / rc.len() as f64)
}

pub fn load_transcripts<R: BufRead>(reader: R) -> Result<Vec<TranscriptRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TranscriptRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("transcripts line {}", idx + 1), e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_transcripts_file(path: impl AsRef<std::path::Path>) -> Result<Vec<TranscriptRecord>> {
    let file = std::fs::File::open(path)?;
    load_transcripts(std::io::BufReader::new(file))
}
