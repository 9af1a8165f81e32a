use std::path::{Path, PathBuf};
use std::process::ExitCode;

use accent_eval::error::{HarnessError, Result};
use accent_eval::report::{run_report, ReportOptions};
use accent_eval::subset::load_preferences;
use accent_eval::vowelspace::export_vowel_space;
use accent_eval::{select_metrics, EvalManifest};
use accent_eval_core::stats::{
    pvalue_vs_subset_size, srcc_vs_hypothesis_with, subset_curve_csv, MetricTable, SpearmanPValue, SrccRow,
};
use clap::{Parser, Subcommand, ValueEnum};

/// Objective accent-similarity evaluation.
#[derive(Debug, Parser)]
#[command(name = "accent-eval", version)]
struct Cli {
    /// Log per-utterance values and skipped items to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum JsonOnly {
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CurveFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute metrics for every (system, utterance) pair and the SRCC footer.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        /// `all`, `available`, or a comma list such as `vf_rmse,ppg_cossim,mcd`.
        #[arg(long, default_value = "all")]
        metrics: String,
        #[arg(long, value_enum, default_value = "tsv")]
        out: Format,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Export normalized vowel-space summaries for ground truth and systems.
    Vowelspace {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        out: JsonOnly,
        /// Comma list of systems; every system when omitted, nothing when empty.
        #[arg(long)]
        systems: Option<String>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// SRCC against the hypothesized ranking for a table of pre-computed means.
    Stats {
        /// TSV with header `system, hyp_rank, name:up|down...`.
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum, default_value = "tsv")]
        out: Format,
        /// Exact permutation p-values (at most 8 systems).
        #[arg(long)]
        exact: bool,
    },
    /// Preference p-value against the number of sampled listeners.
    SubsetCurve {
        /// Proportions array, stored submissions, or an aggregate document.
        #[arg(long)]
        submissions: PathBuf,
        #[arg(long, default_value_t = 1000)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        out: CurveFormat,
    },
}

fn read(path: &Path, what: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        context: format!("reading {what} {}", path.display()),
        source: e,
    })
}

fn srcc_tsv(rows: &[SrccRow]) -> String {
    let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
    let mut out = String::from("metric\tdirection\tsrcc\tp\tsignificant\tnote\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.metric,
            r.direction.tag(),
            f(r.rho),
            f(r.p),
            r.significant.map_or("NA".to_string(), |s| s.to_string()),
            r.note.as_deref().unwrap_or("")
        ));
    }
    out
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Report {
            manifest,
            metrics,
            out,
            jobs,
        } => {
            let m = EvalManifest::load(&manifest)?;
            let selected = select_metrics(&metrics, &m)?;
            let report = run_report(
                &m,
                &selected,
                &ReportOptions {
                    jobs,
                    ..ReportOptions::default()
                },
            )?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            Ok(match out {
                Format::Tsv => report.to_tsv(),
                Format::Json => report.to_json() + "\n",
            })
        }
        Command::Vowelspace {
            manifest,
            out: JsonOnly::Json,
            systems,
            jobs,
        } => {
            let m = EvalManifest::load(&manifest)?;
            let list: Option<Vec<String>> = systems.map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty())
                    .map(String::from)
                    .collect()
            });
            let export = export_vowel_space(&m, list.as_deref(), jobs)?;
            Ok(serde_json::to_string_pretty(&export).expect("export serializes") + "\n")
        }
        Command::Stats { table, out, exact } => {
            let t = MetricTable::from_tsv(&read(&table, "metric table")?)?;
            let method = if exact { SpearmanPValue::Exact } else { SpearmanPValue::TApprox };
            let rows = srcc_vs_hypothesis_with(&t, method);
            Ok(match out {
                Format::Tsv => srcc_tsv(&rows),
                Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
            })
        }
        Command::SubsetCurve {
            submissions,
            repeats,
            seed,
            out,
        } => {
            let set = load_preferences(&read(&submissions, "submissions")?)?;
            let points = pvalue_vs_subset_size(&set, repeats, seed).map_err(|e| HarnessError::Config(e.to_string()))?;
            Ok(match out {
                CurveFormat::Csv => subset_curve_csv(&points),
                CurveFormat::Json => serde_json::to_string_pretty(&points).expect("points serialize") + "\n",
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
