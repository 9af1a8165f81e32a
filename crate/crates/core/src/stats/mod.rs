//! Rank correlation against a hypothesized ranking, AB preference tests and
//! the supporting Student-t distribution.

mod dist;
mod preference;
mod rank;

pub use dist::{ln_gamma, reg_inc_beta, student_t_cdf, student_t_quantile, student_t_sf};
pub use preference::{
    preference_test, preference_test_strict, pvalue_vs_subset_size, subset_curve_csv, PreferenceResult,
    PreferenceSet, SubsetPoint,
};
pub use rank::{
    rank_with_ties, spearman, spearman_with, srcc_vs_hypothesis, srcc_vs_hypothesis_with, Direction,
    MetricColumn, MetricTable, Spearman, SpearmanPValue, SrccRow,
};
