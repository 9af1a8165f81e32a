//! Vowel formants: Burg LPC, polynomial roots, F1/F2 at vowel midpoints,
//! the pairwise VF RMSE metric and per-speaker normalized vowel-space summaries.

mod extract;
mod lpc;
mod resample;
mod rmse;
mod space;

pub use extract::{synth, extract_f1f2, measure_token, FormantConfig, FormantMeasurement};
pub use lpc::{formants_from_lpc, lpc_burg, lpc_roots, Resonance};
pub use resample::resample;
pub use rmse::{vf_rmse, VfRmse};
pub use space::{vowel_space_summary, VowelSpaceSummary, VowelStats};
