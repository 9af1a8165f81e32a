//! AB preference tests across listeners and the subset-size p-value curve.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dist::{student_t_quantile, student_t_sf};
use crate::error::{Error, Result};

/// Per-listener share of items on which system A was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSet {
    proportions: Vec<f64>,
}

impl PreferenceSet {
    pub fn new(proportions: Vec<f64>) -> Result<Self> {
        if proportions.is_empty() {
            return Err(Error::EmptyInput("preference set has no listeners".into()));
        }
        if let Some(p) = proportions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Validation(format!("proportion {p} outside [0, 1]")));
        }
        Ok(Self { proportions })
    }

    /// Collapses each listener's per-item choices (true = A) to one proportion.
    pub fn from_choices<I, C>(listeners: I) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[bool]>,
    {
        let proportions = listeners
            .into_iter()
            .map(|c| {
                let c = c.as_ref();
                if c.is_empty() {
                    return Err(Error::EmptyInput("listener with no choices".into()));
                }
                Ok(c.iter().filter(|&&a| a).count() as f64 / c.len() as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(proportions)
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn len(&self) -> usize {
        self.proportions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proportions.is_empty()
    }

    fn subset(&self, idx: impl Iterator<Item = usize>) -> Self {
        Self {
            proportions: idx.map(|i| self.proportions[i]).collect(),
        }
    }
}

/// Mean and t-based 95% half-width with `n - 1` degrees of freedom.
fn mean_ci(x: &[f64]) -> (f64, Option<f64>, Option<f64>) {
    let n = x.len() as f64;
    if x.iter().all(|&v| v == x[0]) {
        // exact, so the zero-variance conventions are not defeated by rounding
        return (x[0], (x.len() > 1).then_some(0.0), (x.len() > 1).then_some(0.0));
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let half = student_t_quantile(0.975, n - 1.0) * sd / n.sqrt();
    (mean, Some(sd), Some(half))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceResult {
    pub n: usize,
    pub mean_pct: f64,
    /// `None` with fewer than two listeners.
    pub ci95_halfwidth_pct: Option<f64>,
    /// One-sided p for H0 "A is not preferred" (mean <= 50%); `None` with fewer than two listeners.
    pub p_one_sided: Option<f64>,
}

/// One-sided t-test of the listener proportions against 0.5; the CI spans listeners.
pub fn preference_test(s: &PreferenceSet) -> PreferenceResult {
    let (mean, sd, half) = mean_ci(&s.proportions);
    let p = sd.map(|sd| {
        if sd == 0.0 {
            if mean > 0.5 {
                0.0
            } else if mean < 0.5 {
                1.0
            } else {
                0.5
            }
        } else {
            let n = s.len() as f64;
            student_t_sf((mean - 0.5) / (sd / n.sqrt()), n - 1.0)
        }
    });
    PreferenceResult {
        n: s.len(),
        mean_pct: 100.0 * mean,
        ci95_halfwidth_pct: half.map(|h| 100.0 * h),
        p_one_sided: p,
    }
}

/// Like [`preference_test`] but failing when the t statistics are undefined.
pub fn preference_test_strict(s: &PreferenceSet) -> Result<PreferenceResult> {
    let r = preference_test(s);
    if r.p_one_sided.is_none() {
        return Err(Error::UndefinedMetric(format!(
            "t-test needs at least 2 listeners, have {} (mean {:.1}%)",
            r.n, r.mean_pct
        )));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetPoint {
    pub k: usize,
    pub mean_p: f64,
    /// Half-width over the repeats; `None` when only one repeat was drawn.
    pub ci95: Option<f64>,
}

/// Generator for one (k, repeat) cell; independent of thread scheduling.
fn cell_rng(seed: u64, k: usize, repeat: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((k as u64) << 32) | repeat as u64);
    rng
}

/// Expected one-sided p-value as a function of the number of listeners.
pub fn pvalue_vs_subset_size(s: &PreferenceSet, repeats: usize, seed: u64) -> Result<Vec<SubsetPoint>> {
    let n = s.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("subset curve needs at least 3 listeners, have {n}")));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("need at least one repeat".into()));
    }
    if repeats > u32::MAX as usize || n > u32::MAX as usize {
        return Err(Error::InvalidArgument("too many repeats or listeners".into()));
    }
    Ok((2..=n)
        .map(|k| {
            let ps: Vec<f64> = (0..repeats)
                .into_par_iter()
                .map(|r| {
                    let mut rng = cell_rng(seed, k, r);
                    // listener order fixed so equal subsets give bit-identical p-values
                    let mut idx = sample(&mut rng, n, k).into_vec();
                    idx.sort_unstable();
                    preference_test(&s.subset(idx.into_iter()))
                        .p_one_sided
                        .expect("k >= 2")
                })
                .collect();
            let (mean_p, _, ci95) = mean_ci(&ps);
            SubsetPoint { k, mean_p, ci95 }
        })
        .collect())
}

pub fn subset_curve_csv(points: &[SubsetPoint]) -> String {
    let mut out = String::from("k,mean_p,ci95\n");
    for p in points {
        let ci = p.ci95.map(|c| c.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{ci}\n", p.k, p.mean_p));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(p: &[f64]) -> PreferenceSet {
        PreferenceSet::new(p.to_vec()).unwrap()
    }

    #[test]
    fn null_exactly() {
        let r = preference_test(&set(&[0.5, 0.5, 0.5]));
        assert_eq!(r.mean_pct, 50.0);
        assert_eq!(r.p_one_sided, Some(0.5));
    }

    #[test]
    fn zero_variance_conventions() {
        assert_eq!(preference_test(&set(&[1.0, 1.0, 1.0])).p_one_sided, Some(0.0));
        assert_eq!(preference_test(&set(&[0.2, 0.2])).p_one_sided, Some(1.0));
        assert_eq!(preference_test(&set(&[1.0, 1.0, 1.0])).ci95_halfwidth_pct, Some(0.0));
    }

    #[test]
    fn three_listener_example() {
        // t = 0.2 / (0.1 / sqrt 3) = 3.4641, df 2; closed form P(T > t) = 1/2 - t / (2 sqrt(2 + t^2))
        let t = 0.2 / (0.1 / 3f64.sqrt());
        let oracle = 0.5 - t / (2.0 * (2.0 + t * t).sqrt());
        let r = preference_test(&set(&[0.6, 0.7, 0.8]));
        assert!((r.mean_pct - 70.0).abs() < 1e-9);
        assert!((r.p_one_sided.unwrap() - oracle).abs() < 1e-12);
        assert!((r.p_one_sided.unwrap() - 0.0371).abs() < 1e-3);
        // half-width = t(0.975, 2) * 0.1 / sqrt 3
        assert!((r.ci95_halfwidth_pct.unwrap() - 100.0 * 4.302_652_729_749_464 * 0.1 / 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn single_listener_keeps_mean() {
        let r = preference_test(&set(&[0.9]));
        assert_eq!(r.mean_pct, 90.0);
        assert_eq!(r.p_one_sided, None);
        assert!(matches!(preference_test_strict(&set(&[0.9])), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn ci_spans_listeners_not_utterances() {
        // listeners answered different numbers of items; pooling items would weight
        // the talkative listener and shrink the interval
        let choices: Vec<Vec<bool>> = vec![
            [vec![true; 18], vec![false; 2]].concat(),
            vec![true, false, false, false],
            vec![true, true, false, false],
            vec![false, true, false, false],
        ];
        let s = PreferenceSet::from_choices(&choices).unwrap();
        assert_eq!(s.proportions(), [0.9, 0.25, 0.5, 0.25]);
        let r = preference_test(&s);

        let listener_mean = (0.9 + 0.25 + 0.5 + 0.25) / 4.0;
        let listener_sd = ([0.9, 0.25, 0.5, 0.25].iter().map(|p: &f64| (p - listener_mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        let listener_half = 100.0 * 3.182_446_305_284_263 * listener_sd / 2.0;
        assert!((r.mean_pct - 100.0 * listener_mean).abs() < 1e-9);
        assert!((r.ci95_halfwidth_pct.unwrap() - listener_half).abs() < 1e-6);

        let items: Vec<f64> = choices.iter().flatten().map(|&c| f64::from(u8::from(c))).collect();
        let item_mean = items.iter().sum::<f64>() / items.len() as f64;
        let item_sd = (items.iter().map(|v| (v - item_mean).powi(2)).sum::<f64>() / (items.len() - 1) as f64).sqrt();
        let item_half = 100.0 * student_t_quantile(0.975, items.len() as f64 - 1.0) * item_sd / (items.len() as f64).sqrt();
        assert!((r.mean_pct - 100.0 * item_mean).abs() > 5.0);
        assert!((r.ci95_halfwidth_pct.unwrap() - item_half).abs() > 10.0);
    }

    #[test]
    fn full_subset_collapses() {
        let s = set(&[0.6, 0.7, 0.8, 0.55, 0.9]);
        let curve = pvalue_vs_subset_size(&s, 50, 1).unwrap();
        assert_eq!(curve.len(), 4);
        let last = curve.last().unwrap();
        assert_eq!(last.k, 5);
        assert_eq!(last.ci95, Some(0.0));
        assert!((last.mean_p - preference_test(&s).p_one_sided.unwrap()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_under_seed() {
        let s = set(&[0.6, 0.7, 0.8, 0.55, 0.9, 0.3, 0.65, 0.75]);
        let a = pvalue_vs_subset_size(&s, 200, 42).unwrap();
        let b = pvalue_vs_subset_size(&s, 200, 42).unwrap();
        assert_eq!(a, b);
        let c = pvalue_vs_subset_size(&s, 200, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn identical_listeners_give_monotone_curve() {
        let s = set(&[0.8; 12]);
        let curve = pvalue_vs_subset_size(&s, 20, 7).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].mean_p <= w[0].mean_p);
        }
    }

    #[test]
    fn preconditions() {
        assert!(pvalue_vs_subset_size(&set(&[0.5, 0.6]), 10, 0).is_err());
        assert!(pvalue_vs_subset_size(&set(&[0.5, 0.6, 0.7]), 0, 0).is_err());
        assert!(PreferenceSet::new(vec![1.2]).is_err());
        assert!(PreferenceSet::new(vec![]).is_err());
    }

    #[test]
    fn csv_layout() {
        let csv = subset_curve_csv(&[SubsetPoint { k: 2, mean_p: 0.25, ci95: Some(0.1) }]);
        assert_eq!(csv, "k,mean_p,ci95\n2,0.25,0.1\n");
    }

    proptest! {
        #[test]
        fn order_invariant(mut p in proptest::collection::vec(0.0f64..=1.0, 2..15), rot in 0usize..15) {
            let a = preference_test(&set(&p));
            let len = p.len();
            p.rotate_left(rot % len);
            p.reverse();
            let b = preference_test(&set(&p));
            prop_assert!((a.mean_pct - b.mean_pct).abs() < 1e-9);
            prop_assert!((a.ci95_halfwidth_pct.unwrap() - b.ci95_halfwidth_pct.unwrap()).abs() < 1e-9);
            let p = a.p_one_sided.unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
