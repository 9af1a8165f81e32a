//! Pronunciation distance between phonetic posteriorgrams.
//!
//! Two posteriorgrams are DTW-aligned with either a cosine or a Jensen-Shannon
//! local cost, and the mean cost over alignment steps is the distance. There is
//! no normalization against a reference phone-similarity matrix.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::dtw::{dtw, CostAveraging, DtwResult};
use crate::error::{Error, Result};

/// Rows off by more than this from unit sum are rejected on load.
pub const ROW_SUM_REJECT: f64 = 0.05;
/// Rows within this of unit sum are accepted as they are.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

/// Frames x classes matrix of phone posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posteriorgram {
    rows: Vec<Vec<f64>>,
    class_labels: Vec<String>,
    hop: f64,
}

impl Posteriorgram {
    /// Validates and renormalizes rows.
    pub fn new(rows: Vec<Vec<f64>>, class_labels: Vec<String>, hop: f64) -> Result<Self> {
        if class_labels.len() < 2 {
            return Err(Error::Validation(format!(
                "posteriorgram needs at least 2 classes, got {}",
                class_labels.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Validation("posteriorgram has no frames".into()));
        }
        if !(hop > 0.0) {
            return Err(Error::Validation(format!("hop must be positive, got {hop}")));
        }
        let mut rows = rows;
        for (i, row) in rows.iter_mut().enumerate() {
            if row.len() != class_labels.len() {
                return Err(Error::Validation(format!(
                    "frame {i} has {} values for {} classes",
                    row.len(),
                    class_labels.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::Validation(format!("frame {i} has invalid probability {v}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_REJECT {
                return Err(Error::Validation(format!("frame {i} sums to {sum}")));
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(Self {
            rows,
            class_labels,
            hop,
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn hop(&self) -> f64 {
        self.hop
    }

    pub fn num_frames(&self) -> usize {
        self.rows.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_labels.len()
    }
}

/// Reads the CSV layout: `#hop=<seconds>`, a header of class labels, then one row per frame.
pub fn load_ppg<R: BufRead>(reader: R) -> Result<Posteriorgram> {
    let mut hop = None;
    let mut labels: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("hop=") {
                hop = Some(v.trim().parse::<f64>().map_err(|e| {
                    Error::parse(format!("PPG line {lineno}"), format!("bad hop value: {e}"))
                })?);
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        match &labels {
            None => labels = Some(fields.iter().map(|s| s.to_string()).collect()),
            Some(l) => {
                if fields.len() != l.len() {
                    return Err(Error::parse(
                        format!("PPG line {lineno}"),
                        format!("{} fields, header has {}", fields.len(), l.len()),
                    ));
                }
                let row = fields
                    .iter()
                    .map(|f| {
                        f.parse::<f64>().map_err(|e| {
                            Error::parse(format!("PPG line {lineno}"), format!("{f:?}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(row);
            }
        }
    }
    let hop = hop.ok_or_else(|| Error::parse("PPG header", "missing #hop=<seconds> line"))?;
    let labels = labels.ok_or_else(|| Error::parse("PPG header", "missing class label row"))?;
    Posteriorgram::new(rows, labels, hop)
}

pub fn load_ppg_file(path: impl AsRef<std::path::Path>) -> Result<Posteriorgram> {
    let file = std::fs::File::open(path)?;
    load_ppg(std::io::BufReader::new(file))
}

/// Writes the same CSV layout [`load_ppg`] reads.
pub fn write_ppg(ppg: &Posteriorgram) -> String {
    let mut out = format!("#hop={}\n{}\n", ppg.hop, ppg.class_labels.join(","));
    for row in &ppg.rows {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Local cost used by [`dtw_ppg`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PpgCost {
    Cosine,
    Js,
}

/// `1 - cos(p, q)`; in [0, 1] for non-negative rows.
pub fn cosine_cost(p: &[f64], q: &[f64]) -> Result<f64> {
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let np = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nq = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if np == 0.0 || nq == 0.0 {
        return Err(Error::Degenerate("zero-norm posterior row".into()));
    }
    Ok((1.0 - dot / (np * nq)).clamp(0.0, 1.0))
}

/// Jensen-Shannon distance with base-2 logarithms, so the value lies in [0, 1].
pub fn js_cost(p: &[f64], q: &[f64]) -> f64 {
    let mut div = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        let term = |x: f64| if x > 0.0 { x * (x / m).log2() } else { 0.0 };
        // summing the two halves first keeps js_cost(p, q) == js_cost(q, p) bit for bit
        div += 0.5 * (term(a) + term(b));
    }
    div.clamp(0.0, 1.0).sqrt()
}

/// DTW-aligns two posteriorgrams over identical class inventories.
pub fn dtw_ppg(a: &Posteriorgram, b: &Posteriorgram, cost: PpgCost) -> Result<DtwResult> {
    if a.class_labels != b.class_labels {
        return Err(Error::Incompatible(format!(
            "class labels differ ({} vs {} classes)",
            a.num_classes(),
            b.num_classes()
        )));
    }
    let (ra, rb) = (&a.rows, &b.rows);
    match cost {
        PpgCost::Js => dtw(ra.len(), rb.len(), |i, j| js_cost(&ra[i], &rb[j])),
        PpgCost::Cosine => {
            let mut failure = None;
            let r = dtw(ra.len(), rb.len(), |i, j| {
                cosine_cost(&ra[i], &rb[j]).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    0.0
                })
            })?;
            match failure {
                Some(e) => Err(e),
                None => Ok(r),
            }
        }
    }
}

/// PPG CosSim (similarity direction) and PPG JS (distance direction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpgSimilarity {
    pub ppg_cossim: f64,
    pub ppg_js: f64,
}

pub fn ppg_similarity(a: &Posteriorgram, b: &Posteriorgram) -> Result<PpgSimilarity> {
    ppg_similarity_with(a, b, CostAveraging::PathLength)
}

pub fn ppg_similarity_with(
    a: &Posteriorgram,
    b: &Posteriorgram,
    averaging: CostAveraging,
) -> Result<PpgSimilarity> {
    let cos = dtw_ppg(a, b, PpgCost::Cosine)?;
    let js = dtw_ppg(a, b, PpgCost::Js)?;
    Ok(PpgSimilarity {
        ppg_cossim: 1.0 - cos.averaged(averaging),
        ppg_js: js.averaged(averaging),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtw::oracle::brute_force;
    use proptest::prelude::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    fn ppg(rows: Vec<Vec<f64>>) -> Posteriorgram {
        let k = rows[0].len();
        Posteriorgram::new(rows, labels(k), 0.01).unwrap()
    }

    #[test]
    fn loads_csv() {
        let p = load_ppg("#hop=0.02\na,b,c\n1,0,0\n0,1,0\n".as_bytes()).unwrap();
        assert_eq!(p.rows(), &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        assert_eq!(p.hop(), 0.02);
        assert_eq!(p.class_labels(), ["a", "b", "c"]);
    }

    #[test]
    fn renormalizes_small_deviation() {
        let p = load_ppg("#hop=0.01\na,b,c\n0.5,0.5,0.001\n".as_bytes()).unwrap();
        let sum: f64 = p.rows()[0].iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_rows() {
        let e = load_ppg("#hop=0.01\na,b,c\n0.2,0.2,0.2\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
        let e = load_ppg("#hop=0.01\na,b,c\n1.1,-0.1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
        let e = load_ppg("#hop=0.01\na,b,c\n1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
        let e = load_ppg("a,b\n1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
    }

    #[test]
    fn csv_round_trip() {
        let p = ppg(vec![vec![0.25, 0.75], vec![0.6, 0.4]]);
        assert_eq!(load_ppg(write_ppg(&p).as_bytes()).unwrap(), p);
    }

    #[test]
    fn cosine_examples() {
        assert!(cosine_cost(&[0.5, 0.5], &[0.5, 0.5]).unwrap().abs() < 1e-15);
        assert_eq!(cosine_cost(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        let c = cosine_cost(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((c - (1.0 - 0.5 / 0.5f64.sqrt())).abs() < 1e-12);
        assert!((c - 0.29289).abs() < 1e-5);
        assert!(cosine_cost(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn js_examples() {
        assert_eq!(js_cost(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        assert_eq!(js_cost(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        // brute force: m = (0.75, 0.25)
        let kl_pm = 1.0 * (1.0f64 / 0.75).log2();
        let kl_qm = 0.5 * (0.5f64 / 0.75).log2() + 0.5 * (0.5f64 / 0.25).log2();
        let expected = (0.5 * kl_pm + 0.5 * kl_qm).sqrt();
        assert!((js_cost(&[1.0, 0.0], &[0.5, 0.5]) - expected).abs() < 1e-12);
        assert!((expected - 0.557923).abs() < 1e-6);
    }

    #[test]
    fn identity_and_repetition() {
        let a = ppg(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1], vec![0.2, 0.2, 0.6]]);
        for c in [PpgCost::Cosine, PpgCost::Js] {
            let r = dtw_ppg(&a, &a, c).unwrap();
            assert!(r.mean_cost.abs() < 1e-12);
            assert_eq!(r.path, vec![(0, 0), (1, 1), (2, 2)]);
        }
        let one = ppg(vec![vec![1.0, 0.0]]);
        let three = ppg(vec![vec![1.0, 0.0]; 3]);
        let r = dtw_ppg(&one, &three, PpgCost::Cosine).unwrap();
        assert_eq!(r.mean_cost, 0.0);
        assert_eq!(r.path.len(), 3);
    }

    #[test]
    fn point_mass_grid_against_enumeration() {
        let e = |k: usize| {
            let mut v = vec![0.0; 3];
            v[k] = 1.0;
            v
        };
        let a = ppg(vec![e(0), e(1), e(2)]);
        let b = ppg(vec![e(0), e(2), e(2)]);
        let r = dtw_ppg(&a, &b, PpgCost::Cosine).unwrap();
        let (total, len) = brute_force(3, 3, &|i, j| cosine_cost(&a.rows()[i], &b.rows()[j]).unwrap());
        assert_eq!((total, len), (1.0, 3));
        assert_eq!(r.mean_cost, 1.0 / 3.0);
        assert_eq!(r.path, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn similarity_directions() {
        let a = ppg(vec![vec![0.6, 0.4], vec![0.1, 0.9]]);
        let s = ppg_similarity(&a, &a).unwrap();
        assert!((s.ppg_cossim - 1.0).abs() < 1e-12 && s.ppg_js.abs() < 1e-12);
        let x = ppg(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let y = ppg(vec![vec![0.0, 1.0], vec![0.0, 1.0]]);
        let s = ppg_similarity(&x, &y).unwrap();
        assert_eq!((s.ppg_cossim, s.ppg_js), (0.0, 1.0));
    }

    #[test]
    fn label_mismatch() {
        let a = ppg(vec![vec![0.5, 0.5]]);
        let b = Posteriorgram::new(vec![vec![0.5, 0.5]], vec!["x".into(), "y".into()], 0.01).unwrap();
        assert!(matches!(dtw_ppg(&a, &b, PpgCost::Js), Err(Error::Incompatible(_))));
    }

    fn simplex_rows(max_frames: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, k), 1..=max_frames).prop_map(
            |rows| {
                rows.into_iter()
                    .map(|r| {
                        let r: Vec<f64> = r.iter().map(|v| v + 1e-3).collect();
                        let s: f64 = r.iter().sum();
                        r.iter().map(|v| v / s).collect()
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in simplex_rows(6, 4), b in simplex_rows(6, 4)) {
            let (a, b) = (ppg(a), ppg(b));
            for c in [PpgCost::Cosine, PpgCost::Js] {
                let ab = dtw_ppg(&a, &b, c).unwrap().mean_cost;
                let ba = dtw_ppg(&b, &a, c).unwrap().mean_cost;
                prop_assert!((ab - ba).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&ab));
            }
        }
    }
}
