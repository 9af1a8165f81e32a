//! Batch evaluation over a manifest: per-system means with an SRCC footer.

use std::collections::BTreeMap;

use accent_eval_core::stats::{srcc_vs_hypothesis, Direction, MetricColumn, MetricTable, SrccRow};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compute::{evaluate, extract, Analysis, Needs};
use crate::error::{HarnessError, Result};
use crate::manifest::EvalManifest;
use crate::metrics::Metric;

pub const AGGREGATION: &str = "per-utterance values, arithmetic mean per system";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricInfo {
    pub name: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    /// `None` when every utterance failed.
    pub mean: Option<f64>,
    pub count: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub system: String,
    pub hypothesized_rank: u32,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceValue {
    pub system: String,
    pub utterance: String,
    pub metric: String,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub toolkit_version: String,
    pub timestamp: String,
    pub aggregation: String,
    pub analysis: Analysis,
    /// SHA-256 of the report serialized with empty timestamp and hash fields.
    pub determinism_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metadata: ReportMetadata,
    pub metrics: Vec<MetricInfo>,
    pub systems: Vec<SystemRow>,
    pub srcc: Vec<SrccRow>,
    pub warnings: Vec<String>,
    pub utterances: Vec<UtteranceValue>,
}

impl MetricReport {
    pub fn compute_hash(&self) -> String {
        let mut copy = self.clone();
        copy.metadata.timestamp.clear();
        copy.metadata.determinism_hash.clear();
        let json = serde_json::to_vec(&copy).expect("report serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn summary(&self, system: &str, metric: &str) -> Option<&MetricSummary> {
        self.systems
            .iter()
            .find(|s| s.system == system)?
            .metrics
            .iter()
            .find(|m| m.metric == metric)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Means table with SRCC and p footer rows; skipped counts and warnings as `#` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# accent-eval {} {} hash={}\n# {}\n",
            self.metadata.toolkit_version, self.metadata.timestamp, self.metadata.determinism_hash, self.metadata.aggregation
        );
        out.push_str("system\thyp_rank");
        for m in &self.metrics {
            out.push_str(&format!("\t{}:{}", m.name, m.direction.tag()));
        }
        out.push('\n');
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.6}"));
        for s in &self.systems {
            out.push_str(&format!("{}\t{}", s.system, s.hypothesized_rank));
            for m in &s.metrics {
                out.push_str(&format!("\t{}", fmt(m.mean)));
            }
            out.push('\n');
        }
        let footer = |label: &str, f: &dyn Fn(&SrccRow) -> Option<f64>| {
            let mut line = format!("{label}\t");
            for r in &self.srcc {
                line.push_str(&format!("\t{}", r_fmt(f(r))));
            }
            line + "\n"
        };
        out.push_str(&footer("SRCC", &|r| r.rho));
        out.push_str(&footer("p", &|r| r.p));
        for s in &self.systems {
            for m in s.metrics.iter().filter(|m| m.skipped > 0) {
                out.push_str(&format!(
                    "# {} {}: {} utterance(s), {} skipped\n",
                    s.system, m.metric, m.count, m.skipped
                ));
            }
        }
        for w in &self.warnings {
            out.push_str(&format!("# warning: {w}\n"));
        }
        out
    }
}

fn r_fmt(v: Option<f64>) -> String {
    v.map_or("NA".to_string(), |x| format!("{x:.4}"))
}

pub struct ReportOptions {
    pub jobs: usize,
    pub timestamp: String,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            jobs: 0,
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

/// SRCC footer from per-system means. Metrics with a missing mean, or whose
/// means are all tied, get `None` and a warning.
pub fn srcc_footer(
    systems: &[SystemRow],
    metrics: &[MetricInfo],
    warnings: &mut Vec<String>,
) -> Vec<SrccRow> {
    let names: Vec<String> = systems.iter().map(|s| s.system.clone()).collect();
    let ranks: Vec<u32> = systems.iter().map(|s| s.hypothesized_rank).collect();
    metrics
        .iter()
        .enumerate()
        .map(|(k, info)| {
            let undefined = |note: String| SrccRow {
                metric: info.name.clone(),
                direction: info.direction,
                rho: None,
                p: None,
                significant: None,
                note: Some(note),
            };
            let means: Option<Vec<f64>> = systems.iter().map(|s| s.metrics[k].mean).collect();
            let Some(values) = means else {
                let note = "undefined: some system has no value".to_string();
                warnings.push(format!("{}: SRCC {note}", info.name));
                return undefined(note);
            };
            let distinct = {
                let mut v = values.clone();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.len()
            };
            if distinct < values.len() && distinct > 1 {
                warnings.push(format!("{}: tied system means, average ranks used", info.name));
            }
            let column = MetricColumn {
                name: info.name.clone(),
                direction: info.direction,
                values,
            };
            let row = MetricTable::new(names.clone(), ranks.clone(), vec![column])
                .map(|t| srcc_vs_hypothesis(&t).remove(0))
                .unwrap_or_else(|e| undefined(e.to_string()));
            if let Some(note) = &row.note {
                let tie = if distinct <= 1 { " (all system means tied)" } else { "" };
                warnings.push(format!("{}: SRCC undefined{tie}: {note}", info.name));
            }
            row
        })
        .collect()
}

pub fn run_report(manifest: &EvalManifest, metrics: &[Metric], opts: &ReportOptions) -> Result<MetricReport> {
    manifest.validate()?;
    let systems: Vec<_> = manifest.systems.iter().collect();
    manifest.check_inputs(metrics, &systems)?;
    let analysis = Analysis::from_settings(&manifest.settings);
    let needs = Needs::for_metrics(metrics);
    let gt_needs = needs.without_transcript();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;

    let (gt, items) = pool.install(|| {
        let gt: Vec<_> = manifest
            .utterances
            .par_iter()
            .map(|u| extract(&manifest.ground_truth[&u.id], &gt_needs, &analysis))
            .collect();
        let work: Vec<(usize, usize)> = (0..systems.len())
            .flat_map(|s| (0..manifest.utterances.len()).map(move |u| (s, u)))
            .collect();
        let items: Vec<_> = work
            .par_iter()
            .map(|&(s, u)| {
                let utt = &manifest.utterances[u];
                let sys = extract(manifest.system_entry(&systems[s].name, &utt.id), &needs, &analysis);
                evaluate(&gt[u], &sys, &utt.text, metrics, &analysis)
            })
            .collect();
        (gt, items)
    });
    drop(gt);

    let infos: Vec<MetricInfo> = metrics
        .iter()
        .map(|m| MetricInfo {
            name: m.name(),
            direction: m.direction(),
        })
        .collect();
    let mut utterances = Vec::new();
    let mut rows = Vec::new();
    let n_utt = manifest.utterances.len();
    for (s, spec) in systems.iter().enumerate() {
        let mut sums: BTreeMap<&Metric, (f64, usize, usize)> = BTreeMap::new();
        for (u, utt) in manifest.utterances.iter().enumerate() {
            for (metric, value) in &items[s * n_utt + u] {
                let slot = sums.entry(metric).or_default();
                match value {
                    Ok(v) => {
                        slot.0 += v;
                        slot.1 += 1;
                        log::debug!("{}\t{}\t{}\t{v}", spec.name, utt.id, metric);
                    }
                    Err(e) => {
                        slot.2 += 1;
                        log::warn!("skipping {} {} {}: {e}", spec.name, utt.id, metric);
                    }
                }
                utterances.push(UtteranceValue {
                    system: spec.name.clone(),
                    utterance: utt.id.clone(),
                    metric: metric.name(),
                    value: value.as_ref().ok().copied(),
                    error: value.as_ref().err().cloned(),
                });
            }
        }
        rows.push(SystemRow {
            system: spec.name.clone(),
            hypothesized_rank: spec.hypothesized_rank,
            metrics: metrics
                .iter()
                .map(|m| {
                    let (sum, count, skipped) = sums.get(m).copied().unwrap_or_default();
                    MetricSummary {
                        metric: m.name(),
                        mean: (count > 0).then(|| sum / count as f64),
                        count,
                        skipped,
                    }
                })
                .collect(),
        });
    }
    let mut warnings = Vec::new();
    for r in &rows {
        for m in r.metrics.iter().filter(|m| m.mean.is_none()) {
            warnings.push(format!("{} {}: every utterance failed, metric undefined", r.system, m.metric));
        }
    }
    let srcc = srcc_footer(&rows, &infos, &mut warnings);
    let mut report = MetricReport {
        metadata: ReportMetadata {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: opts.timestamp.clone(),
            aggregation: AGGREGATION.to_string(),
            analysis,
            determinism_hash: String::new(),
        },
        metrics: infos,
        systems: rows,
        srcc,
        warnings,
        utterances,
    };
    report.metadata.determinism_hash = report.compute_hash();
    Ok(report)
}
