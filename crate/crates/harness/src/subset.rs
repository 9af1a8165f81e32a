//! Listener-preference input for the `subset-curve` command.

use accent_eval_core::stats::PreferenceSet;
use accent_listen::model::{Choice, Submission};
use serde::Deserialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Deserialize)]
struct ListenerRow {
    proportion: f64,
    #[serde(default = "yes")]
    valid: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct AggregateDoc {
    listeners: Vec<ListenerRow>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Doc {
    Proportions(Vec<f64>),
    Submissions(Vec<Submission>),
    Aggregate(AggregateDoc),
}

/// Share of real (non-attention) items on which candidate A was chosen.
pub fn submission_proportion(s: &Submission) -> Option<f64> {
    let real: Vec<_> = s.answers.iter().filter(|a| a.attention_passed.is_none()).collect();
    if real.is_empty() {
        return None;
    }
    Some(real.iter().filter(|a| a.choice == Choice::A).count() as f64 / real.len() as f64)
}

/// Accepts a bare array of proportions, an array of stored submissions, or
/// the listening service's aggregate document. Invalid submissions are dropped.
pub fn load_preferences(json: &str) -> Result<PreferenceSet> {
    let doc: Doc =
        serde_json::from_str(json).map_err(|e| HarnessError::Parse(format!("submissions: {e}")))?;
    let props: Vec<f64> = match doc {
        Doc::Proportions(p) => p,
        Doc::Submissions(subs) => subs
            .iter()
            .filter(|s| s.is_valid())
            .filter_map(submission_proportion)
            .collect(),
        Doc::Aggregate(a) => a.listeners.into_iter().filter(|l| l.valid).map(|l| l.proportion).collect(),
    };
    PreferenceSet::new(props).map_err(|e| HarnessError::Config(e.to_string()))
}
