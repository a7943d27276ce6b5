//! Target-side (cited-side) field normalization.
//!
//! Every base indicator column is rescaled against the statistics of the
//! cited paper's own field under a chosen grouping: the ratio form divides by
//! the field mean, the z-score form centers by the field mean and divides by
//! the field's population standard deviation. Together with the eight base
//! columns this yields a 24-column indicator grid per core paper.
//!
//! Degenerate fields are kept rather than dropped: a zero-mean field maps all
//! members to ratio 0, a zero-spread field maps all members to z-score 0, and
//! both cases are flagged in the per-field statistics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Corpus, GroupingData};
use crate::source_norm::MetricVector;

/// All 24 indicator column ids in output order.
pub const ALL_METRICS: [&str; 24] = [
    "c", "c_ln", "sc1", "sc2", "sc3", "sc1_ln", "sc2_ln", "sc3_ln", //
    "R_c", "R_c_ln", "R_sc1", "R_sc2", "R_sc3", "R_sc1_ln", "R_sc2_ln", "R_sc3_ln", //
    "Z_c", "Z_c_ln", "Z_sc1", "Z_sc2", "Z_sc3", "Z_sc1_ln", "Z_sc2_ln", "Z_sc3_ln",
];

/// One output column; `None` marks papers without a field assignment under
/// the normalization grouping (base columns are always `Some`).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricColumn {
    pub metric_id: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct FieldStatsEntry {
    pub n: u64,
    #[serde(serialize_with = "crate::report::ser_f64_sig9")]
    pub mean: f64,
    #[serde(serialize_with = "crate::report::ser_f64_sig9")]
    pub std: f64,
    /// Field mean is zero: ratio values for members are pinned to 0.
    pub ratio_degenerate: bool,
    /// Field spread is zero: z-score values for members are pinned to 0.
    pub z_degenerate: bool,
}

/// The full indicator grid for the core papers under one grouping.
#[derive(Debug, Clone)]
pub struct MetricMatrix {
    pub scheme_id: String,
    pub level: String,
    /// Core paper ids, ascending (corpus core order).
    pub paper_ids: Vec<String>,
    /// Field id per core paper under the normalization grouping.
    pub field_of: Vec<Option<String>>,
    /// Exactly the 24 columns of [`ALL_METRICS`], in order.
    pub columns: Vec<MetricColumn>,
    /// Per base metric, per field: the statistics normalization divided by.
    pub field_stats: BTreeMap<String, BTreeMap<String, FieldStatsEntry>>,
}

impl MetricMatrix {
    pub fn column(&self, metric_id: &str) -> Option<&MetricColumn> {
        self.columns.iter().find(|c| c.metric_id == metric_id)
    }
}

/// Mean and population standard deviation (denominator `n`, not `n - 1`).
pub fn population_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / n as f64).sqrt())
}

/// Divide by the mean; a zero mean degenerates to all-zero output.
pub fn ratio_normalize(values: &[f64]) -> (Vec<f64>, bool) {
    let (mean, _) = population_stats(values);
    if mean == 0.0 {
        (vec![0.0; values.len()], true)
    } else {
        (values.iter().map(|v| v / mean).collect(), false)
    }
}

/// Center and scale by the population standard deviation; zero spread
/// degenerates to all-zero output.
pub fn z_normalize(values: &[f64]) -> (Vec<f64>, bool) {
    let (mean, std) = population_stats(values);
    if std == 0.0 {
        (vec![0.0; values.len()], true)
    } else {
        (values.iter().map(|v| (v - mean) / std).collect(), false)
    }
}

/// Build the 24-column matrix for the corpus core under `grouping`.
///
/// `base` must be the eight base indicator columns in canonical order, each
/// aligned to `corpus.core_papers()`.
pub fn metric_matrix(
    corpus: &Corpus,
    grouping: &GroupingData,
    base: &[MetricVector],
) -> MetricMatrix {
    let core = corpus.core_papers();
    assert_eq!(base.len(), 8, "expected the eight base indicator columns");
    for m in base {
        assert_eq!(m.values.len(), core.len(), "base column not core-aligned");
    }

    let paper_ids: Vec<String> =
        core.iter().map(|&i| corpus.paper(i as usize).paper_id.clone()).collect();
    let field_idx: Vec<Option<u32>> =
        core.iter().map(|&i| grouping.field_of(i as usize)).collect();
    let field_of: Vec<Option<String>> = field_idx
        .iter()
        .map(|fi| fi.map(|f| grouping.field_ids[f as usize].clone()))
        .collect();

    // Member positions per field, ascending, which fixes summation order.
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); grouping.field_count()];
    for (pos, fi) in field_idx.iter().enumerate() {
        if let Some(f) = fi {
            members[*f as usize].push(pos as u32);
        }
    }

    struct NormalizedColumn {
        ratio: Vec<Option<f64>>,
        z: Vec<Option<f64>>,
        stats: BTreeMap<String, FieldStatsEntry>,
    }

    let normalized: Vec<NormalizedColumn> = base
        .par_iter()
        .map(|metric| {
            let n = metric.values.len();
            let mut ratio = vec![None; n];
            let mut z = vec![None; n];
            let mut stats = BTreeMap::new();
            for (f, positions) in members.iter().enumerate() {
                if positions.is_empty() {
                    continue;
                }
                let values: Vec<f64> =
                    positions.iter().map(|&p| metric.values[p as usize]).collect();
                let (mean, std) = population_stats(&values);
                let ratio_degenerate = mean == 0.0;
                let z_degenerate = std == 0.0;
                for (&p, &v) in positions.iter().zip(values.iter()) {
                    ratio[p as usize] =
                        Some(if ratio_degenerate { 0.0 } else { v / mean });
                    z[p as usize] = Some(if z_degenerate { 0.0 } else { (v - mean) / std });
                }
                stats.insert(
                    grouping.field_ids[f].clone(),
                    FieldStatsEntry {
                        n: positions.len() as u64,
                        mean,
                        std,
                        ratio_degenerate,
                        z_degenerate,
                    },
                );
            }
            NormalizedColumn { ratio, z, stats }
        })
        .collect();

    let mut columns: Vec<MetricColumn> = base
        .iter()
        .map(|m| MetricColumn {
            metric_id: m.metric_id.clone(),
            values: m.values.iter().map(|&v| Some(v)).collect(),
        })
        .collect();
    for (m, norm) in base.iter().zip(normalized.iter()) {
        columns.push(MetricColumn {
            metric_id: format!("R_{}", m.metric_id),
            values: norm.ratio.clone(),
        });
    }
    for (m, norm) in base.iter().zip(normalized.iter()) {
        columns.push(MetricColumn { metric_id: format!("Z_{}", m.metric_id), values: norm.z.clone() });
    }

    let mut field_stats = BTreeMap::new();
    for (m, norm) in base.iter().zip(normalized) {
        field_stats.insert(m.metric_id.clone(), norm.stats);
    }

    MetricMatrix {
        scheme_id: grouping.scheme_id.clone(),
        level: grouping.level.clone(),
        paper_ids,
        field_of,
        columns,
        field_stats,
    }
}
