use serde::{Deserialize, Serialize};

use super::extract::FormantMeasurement;
use crate::error::{Error, Result};

/// Pairwise vowel-formant RMSE in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VfRmse {
    /// RMSE over the pooled {dF1, dF2} differences of every pair.
    pub pooled: f64,
    pub f1: f64,
    pub f2: f64,
    pub pairs: usize,
}

pub fn vf_rmse(pairs: &[(FormantMeasurement, FormantMeasurement)]) -> Result<VfRmse> {
    if pairs.is_empty() {
        return Err(Error::UndefinedMetric("VF RMSE needs at least one vowel pair".into()));
    }
    if let Some((a, b)) = pairs.iter().find(|(a, b)| a.token.base_label != b.token.base_label) {
        return Err(Error::InvalidArgument(format!(
            "pair has mismatched vowels {} / {}",
            a.token.base_label, b.token.base_label
        )));
    }
    let n = pairs.len() as f64;
    let sq1: f64 = pairs.iter().map(|(a, b)| (a.f1 - b.f1).powi(2)).sum();
    let sq2: f64 = pairs.iter().map(|(a, b)| (a.f2 - b.f2).powi(2)).sum();
    Ok(VfRmse {
        pooled: ((sq1 + sq2) / (2.0 * n)).sqrt(),
        f1: (sq1 / n).sqrt(),
        f2: (sq2 / n).sqrt(),
        pairs: pairs.len(),
    })
}
