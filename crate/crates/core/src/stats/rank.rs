//! Rank correlation against a hypothesized system ranking.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dist::student_t_sf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    /// Annotation used in table headers.
    pub fn tag(self) -> &'static str {
        match self {
            Direction::HigherBetter => "up",
            Direction::LowerBetter => "down",
        }
    }

    pub fn arrow(self) -> &'static str {
        match self {
            Direction::HigherBetter => "↑",
            Direction::LowerBetter => "↓",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" | "higher" | "higher-better" => Ok(Direction::HigherBetter),
            "down" | "lower" | "lower-better" => Ok(Direction::LowerBetter),
            other => Err(Error::InvalidArgument(format!("unknown direction {other:?}"))),
        }
    }
}

/// Ranks with 1 for the best value; ties share the average of their positions.
pub fn rank_with_ties(values: &[f64], direction: Direction) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 values to rank, got {}", values.len())));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("cannot rank NaN".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        match direction {
            Direction::LowerBetter => ord,
            Direction::HigherBetter => ord.reverse(),
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    Ok(ranks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    pub p: f64,
}

/// How the SRCC p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpearmanPValue {
    /// Two-sided Student-t approximation with n - 2 degrees of freedom.
    #[default]
    TApprox,
    /// Two-sided exact permutation test, for n <= 8.
    Exact,
}

fn pearson_of(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Rounds away the last few ulps so that |rho| = 1 is recognized exactly.
fn snap(rho: f64) -> f64 {
    if (rho.abs() - 1.0).abs() < 1e-12 {
        rho.signum()
    } else {
        rho
    }
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    spearman_with(x, y, SpearmanPValue::TApprox)
}

pub fn spearman_with(x: &[f64], y: &[f64], method: SpearmanPValue) -> Result<Spearman> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("lengths {} and {} differ", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("spearman needs n >= 3, got {n}")));
    }
    let rx = rank_with_ties(x, Direction::LowerBetter)?;
    let ry = rank_with_ties(y, Direction::LowerBetter)?;
    let rho = pearson_of(&rx, &ry)
        .map(snap)
        .ok_or_else(|| Error::UndefinedMetric("all values tied on one side".into()))?;
    let p = match method {
        SpearmanPValue::TApprox => {
            if rho.abs() == 1.0 {
                0.0
            } else {
                let df = (n - 2) as f64;
                let t = rho * (df / (1.0 - rho * rho)).sqrt();
                (2.0 * student_t_sf(t.abs(), df)).min(1.0)
            }
        }
        SpearmanPValue::Exact => {
            if n > 8 {
                return Err(Error::InvalidArgument(format!("exact permutation p limited to n <= 8, got {n}")));
            }
            exact_permutation_p(&rx, &ry, rho)
        }
    };
    Ok(Spearman { rho, p })
}

/// Share of all orderings of `ry` whose |rho| reaches the observed one.
fn exact_permutation_p(rx: &[f64], ry: &[f64], rho: f64) -> f64 {
    let mut perm: Vec<usize> = (0..ry.len()).collect();
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut permuted = vec![0.0; ry.len()];
    loop {
        for (slot, &i) in permuted.iter_mut().zip(&perm) {
            *slot = ry[i];
        }
        let r = pearson_of(rx, &permuted).unwrap_or(0.0);
        if r.abs() >= rho.abs() - 1e-12 {
            hits += 1;
        }
        total += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    hits as f64 / total as f64
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("pivot has a successor");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricColumn {
    pub name: String,
    pub direction: Direction,
    pub values: Vec<f64>,
}

/// Per-system metric means with the hypothesized ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    systems: Vec<String>,
    hypothesized_rank: Vec<u32>,
    metrics: Vec<MetricColumn>,
}

impl MetricTable {
    pub fn new(systems: Vec<String>, hypothesized_rank: Vec<u32>, metrics: Vec<MetricColumn>) -> Result<Self> {
        let n = systems.len();
        if hypothesized_rank.len() != n {
            return Err(Error::Validation(format!("{} ranks for {n} systems", hypothesized_rank.len())));
        }
        let mut sorted = hypothesized_rank.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().any(|(i, &r)| r as usize != i + 1) {
            return Err(Error::Validation(format!(
                "hypothesized ranks {hypothesized_rank:?} are not a permutation of 1..{n}"
            )));
        }
        for m in &metrics {
            if m.values.len() != n {
                return Err(Error::Validation(format!(
                    "metric {:?} has {} values for {n} systems",
                    m.name,
                    m.values.len()
                )));
            }
        }
        Ok(Self {
            systems,
            hypothesized_rank,
            metrics,
        })
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn hypothesized_rank(&self) -> &[u32] {
        &self.hypothesized_rank
    }

    pub fn metrics(&self) -> &[MetricColumn] {
        &self.metrics
    }

    /// Parses the TSV layout: header `system<TAB>hyp_rank<TAB>name:up|down...`, one row per system.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::parse("metric table", "no header row"))?;
        let cols: Vec<&str> = header.split('\t').collect();
        if cols.len() < 2 {
            return Err(Error::parse("metric table line 1", "need system and rank columns"));
        }
        let mut metrics = cols[2..]
            .iter()
            .map(|c| {
                let (name, dir) = c.rsplit_once(':').ok_or_else(|| {
                    Error::parse("metric table header", format!("column {c:?} lacks :up or :down"))
                })?;
                let direction = dir
                    .parse()
                    .map_err(|_| Error::parse("metric table header", format!("bad direction in {c:?}")))?;
                Ok(MetricColumn {
                    name: name.trim().to_string(),
                    direction,
                    values: Vec::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut systems = Vec::new();
        let mut ranks = Vec::new();
        for (idx, line) in lines {
            let ctx = format!("metric table line {}", idx + 1);
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != cols.len() {
                return Err(Error::parse(ctx, format!("{} fields, header has {}", fields.len(), cols.len())));
            }
            systems.push(fields[0].trim().to_string());
            ranks.push(
                fields[1]
                    .trim()
                    .parse::<u32>()
                    .map_err(|e| Error::parse(ctx.clone(), format!("rank {:?}: {e}", fields[1])))?,
            );
            for (m, f) in metrics.iter_mut().zip(&fields[2..]) {
                m.values.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::parse(ctx.clone(), format!("{f:?}: {e}")))?,
                );
            }
        }
        Self::new(systems, ranks, metrics)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("system\thyp_rank");
        for m in &self.metrics {
            out.push_str(&format!("\t{}:{}", m.name, m.direction.tag()));
        }
        out.push('\n');
        for (i, s) in self.systems.iter().enumerate() {
            out.push_str(&format!("{s}\t{}", self.hypothesized_rank[i]));
            for m in &self.metrics {
                out.push_str(&format!("\t{}", m.values[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// SRCC of one metric against the hypothesized ranking. `rho` is positive when the
/// metric orders systems the same way as the hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrccRow {
    pub metric: String,
    pub direction: Direction,
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub significant: Option<bool>,
    /// Why `rho` is missing, if it is.
    pub note: Option<String>,
}

pub fn srcc_vs_hypothesis(t: &MetricTable) -> Vec<SrccRow> {
    srcc_vs_hypothesis_with(t, SpearmanPValue::TApprox)
}

pub fn srcc_vs_hypothesis_with(t: &MetricTable, method: SpearmanPValue) -> Vec<SrccRow> {
    let hyp: Vec<f64> = t.hypothesized_rank.iter().map(|&r| r as f64).collect();
    t.metrics
        .iter()
        .map(|m| {
            let outcome = rank_with_ties(&m.values, m.direction).and_then(|r| spearman_with(&r, &hyp, method));
            match outcome {
                Ok(s) => SrccRow {
                    metric: m.name.clone(),
                    direction: m.direction,
                    rho: Some(s.rho),
                    p: Some(s.p),
                    significant: Some(s.p < 0.05),
                    note: None,
                },
                Err(e) => SrccRow {
                    metric: m.name.clone(),
                    direction: m.direction,
                    rho: None,
                    p: None,
                    significant: None,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect()
}
