//! Output formatting: the 9-significant-digit float policy, TSV writers for
//! the tabular artifacts, and the serializable report envelopes.
//!
//! Every float that reaches a file goes through [`sig9`], so reruns and
//! different thread counts produce byte-identical artifacts as long as the
//! underlying values are equal.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::bias_eval::BiasEvaluation;
use crate::corpus::{BuildReport, WindowConfig};
use crate::diagnostics::DiagnosticsResult;
use crate::source_norm::SourceNormSummary;
use crate::synthgen::SynthReport;
use crate::target_norm::{FieldStatsEntry, MetricColumn, ALL_METRICS};

/// Version tag stamped into every JSON artifact.
pub const FORMAT_VERSION: &str = "1";

/// Round to 9 significant decimal digits. Zero loses its sign; non-finite
/// values pass through untouched.
pub fn sig9(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    // Render with 8 fractional digits in scientific notation (9 significant
    // digits, correctly rounded) and parse back.
    format!("{x:.8e}").parse().expect("scientific float round-trip")
}

/// Shortest decimal text of the 9-significant-digit rounding.
pub fn fmt_sig9(x: f64) -> String {
    format!("{}", sig9(x))
}

pub fn ser_f64_sig9<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(sig9(*x))
}

pub fn ser_map_sig9<S: Serializer>(
    m: &BTreeMap<String, f64>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|(k, v)| (k, sig9(*v))))
}

pub fn ser_opt_f64_sig9<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&sig9(*v)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("expected header {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
}

fn metrics_header() -> String {
    let mut h = String::from("paper_id");
    for m in ALL_METRICS {
        h.push('\t');
        h.push_str(m);
    }
    h
}

/// Serialize the indicator grid. Missing cells (papers without a field under
/// the normalization grouping) are empty.
pub fn metrics_to_tsv(paper_ids: &[String], columns: &[MetricColumn]) -> String {
    assert_eq!(columns.len(), ALL_METRICS.len());
    let mut s = metrics_header();
    s.push('\n');
    for (i, id) in paper_ids.iter().enumerate() {
        s.push_str(id);
        for c in columns {
            s.push('\t');
            if let Some(v) = c.values[i] {
                s.push_str(&fmt_sig9(v));
            }
        }
        s.push('\n');
    }
    s
}

/// Parse a metrics table produced by [`metrics_to_tsv`].
pub fn parse_metrics_tsv(text: &str) -> Result<(Vec<String>, Vec<MetricColumn>), TableError> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    let expected = metrics_header();
    match lines.next() {
        Some(h) if h == expected => {}
        other => {
            return Err(TableError::BadHeader {
                expected,
                found: other.unwrap_or_default().to_string(),
            })
        }
    }
    let mut paper_ids = Vec::new();
    let mut columns: Vec<MetricColumn> = ALL_METRICS
        .iter()
        .map(|m| MetricColumn { metric_id: m.to_string(), values: Vec::new() })
        .collect();
    for (i, raw) in lines.enumerate() {
        let line = i + 2;
        if raw.is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split('\t').collect();
        if cells.len() != ALL_METRICS.len() + 1 {
            return Err(TableError::BadRow {
                line,
                reason: format!("expected {} columns, found {}", ALL_METRICS.len() + 1, cells.len()),
            });
        }
        paper_ids.push(cells[0].to_string());
        for (c, cell) in columns.iter_mut().zip(cells[1..].iter()) {
            if cell.is_empty() {
                c.values.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| TableError::BadRow {
                    line,
                    reason: format!("unparseable number {cell:?}"),
                })?;
                c.values.push(Some(v));
            }
        }
    }
    Ok((paper_ids, columns))
}

pub const BIAS_PLOT_HEADER: &str = "metric\tz\td_m\tci_low\tci_high\twithin_ci";

/// Plot-ready table of observed distances and null intervals.
pub fn bias_plot_tsv(rows: &[BiasEvaluation]) -> String {
    let mut s = String::from(BIAS_PLOT_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.metric,
            r.z,
            fmt_sig9(r.d_m),
            fmt_sig9(r.null.ci_low),
            fmt_sig9(r.null.ci_high),
            r.within_ci,
        ));
    }
    s
}

/// `field_stats.json` payload.
#[derive(Debug, Serialize)]
pub struct FieldStatsReport {
    pub format_version: &'static str,
    pub scheme_id: String,
    pub level: String,
    pub metrics: BTreeMap<String, BTreeMap<String, FieldStatsEntry>>,
}

/// `diagnostics.json` payload.
#[derive(Debug, Serialize)]
pub struct DiagnosticsReportFile {
    pub format_version: &'static str,
    /// Effective run configuration, echoed for reproducibility.
    pub config: serde_json::Value,
    pub diagnostics: DiagnosticsResult,
}

/// `synth_report.json` payload.
#[derive(Debug, Serialize)]
pub struct SynthReportFile {
    pub format_version: &'static str,
    /// Effective generator configuration, echoed for reproducibility.
    pub config: serde_json::Value,
    pub report: SynthReport,
}

/// `bias_report.json` payload.
#[derive(Debug, Serialize)]
pub struct BiasReportFile {
    pub format_version: &'static str,
    /// Effective run configuration, echoed for reproducibility.
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub null_samples: u64,
    pub evaluations: Vec<BiasEvaluation>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct InputSummary {
    pub papers_loaded: u64,
    pub papers_skipped: u64,
    pub citations_loaded: u64,
    pub citations_skipped: u64,
    pub citation_duplicates: u64,
    pub assignments_loaded: u64,
    pub assignments_skipped: u64,
    pub assignment_duplicates: u64,
}

/// `run_report.json` payload.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub format_version: &'static str,
    pub command: String,
    /// Effective run configuration, echoed for reproducibility.
    pub config: serde_json::Value,
    pub window: WindowConfig,
    pub inputs: InputSummary,
    pub build: BuildReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_norm: Option<SourceNormSummary>,
    pub warnings: Vec<String>,
}

/// Pretty JSON with a trailing newline, the shape all artifacts share.
pub fn to_json_file<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}
