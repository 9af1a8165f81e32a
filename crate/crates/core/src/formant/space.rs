use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::extract::FormantMeasurement;
use crate::error::{Error, Result};

/// Per-vowel statistics of Lobanov-normalized (zF1, zF2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VowelStats {
    pub mean: [f64; 2],
    /// Sample covariance; zero when the vowel has a single token.
    pub cov: [[f64; 2]; 2],
    pub n: usize,
}

/// Vowel label to statistics, for one speaker or system.
pub type VowelSpaceSummary = BTreeMap<String, VowelStats>;

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(speaker: &str, tokens: &[FormantMeasurement]) -> Result<VowelSpaceSummary> {
    if tokens.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "speaker {speaker} has {} token(s); z-scores need at least 2",
            tokens.len()
        )));
    }
    let f1: Vec<f64> = tokens.iter().map(|t| t.f1).collect();
    let f2: Vec<f64> = tokens.iter().map(|t| t.f2).collect();
    let (m1, s1) = mean_sd(&f1);
    let (m2, s2) = mean_sd(&f2);
    if s1 == 0.0 || s2 == 0.0 {
        return Err(Error::Degenerate(format!("speaker {speaker} has zero formant variance")));
    }
    let mut by_vowel: BTreeMap<String, Vec<[f64; 2]>> = BTreeMap::new();
    for t in tokens {
        by_vowel
            .entry(t.token.base_label.clone())
            .or_default()
            .push([(t.f1 - m1) / s1, (t.f2 - m2) / s2]);
    }
    Ok(by_vowel
        .into_iter()
        .map(|(label, z)| {
            let n = z.len();
            let nf = n as f64;
            let mean = [
                z.iter().map(|p| p[0]).sum::<f64>() / nf,
                z.iter().map(|p| p[1]).sum::<f64>() / nf,
            ];
            let mut cov = [[0.0; 2]; 2];
            if n > 1 {
                for p in &z {
                    let d = [p[0] - mean[0], p[1] - mean[1]];
                    for r in 0..2 {
                        for c in 0..2 {
                            cov[r][c] += d[r] * d[c] / (nf - 1.0);
                        }
                    }
                }
            }
            (label, VowelStats { mean, cov, n })
        })
        .collect())
}

/// Lobanov-normalizes each speaker's F1/F2, then summarizes per vowel.
pub fn vowel_space_summary(
    measurements: &BTreeMap<String, Vec<FormantMeasurement>>,
) -> Result<BTreeMap<String, VowelSpaceSummary>> {
    measurements
        .iter()
        .map(|(speaker, tokens)| Ok((speaker.clone(), summarize(speaker, tokens)?)))
        .collect()
}
