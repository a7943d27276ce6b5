//! Source-side (citing-side) normalized citation indicators.
//!
//! Each citation received by a core paper is weighted by properties of the
//! citing paper rather than by properties of the cited paper's field:
//!
//! * `sc1`: weight `1 / r_i`, where `r_i` is the citing paper's full
//!   reference-list length (its declared `total_ref_count`, falling back to
//!   its in-corpus out-degree when the declaration is missing or zero).
//! * `sc2`: weight `1 / a_i`, where `a_i` counts the citing paper's active
//!   references, i.e. its retained citations to core papers.
//! * `sc3`: weight `1 / (a_i * p_i)`, where `p_i` is the fraction of the
//!   citing paper's journal's citing-year papers that are active (`a >= 1`).
//!
//! Raw citation counts `c` and natural-log transforms `ln(v + 1)` of all four
//! are emitted alongside, giving the eight base indicator columns.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Corpus;

/// Identifiers of the eight base indicator columns, in output order.
pub const BASE_METRICS: [&str; 8] =
    ["c", "c_ln", "sc1", "sc2", "sc3", "sc1_ln", "sc2_ln", "sc3_ln"];

/// One indicator column aligned to `corpus.core_papers()` order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricVector {
    pub metric_id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct JournalActivity {
    pub citing_papers: u64,
    pub active_papers: u64,
}

/// Per-citing-paper weights and corpus-wide data quality counters.
#[derive(Debug, Clone)]
pub struct CitingSideStats {
    /// Effective reference-list length per corpus paper (0 outside the citing set).
    r_eff: Vec<u32>,
    /// Active reference count per corpus paper.
    a: Vec<u32>,
    /// Journal activity share per corpus paper (0.0 outside the citing set).
    p: Vec<f64>,
    pub summary: SourceNormSummary,
    pub journal_activity: BTreeMap<String, JournalActivity>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SourceNormSummary {
    pub citing_papers: u64,
    pub active_citing_papers: u64,
    /// Citing papers without a usable declared reference count whose
    /// denominator fell back to the in-corpus out-degree.
    pub fallback_r_count: u64,
    /// Citing papers with no usable reference count at all; they contribute
    /// to no indicator.
    pub zero_ref_count: u64,
    /// Citing papers whose active reference count exceeds the declared total
    /// reference count (inconsistent source data, kept as declared).
    pub a_exceeds_r_count: u64,
    pub journals: u64,
    pub active_journals: u64,
}

impl CitingSideStats {
    pub fn r_eff(&self, paper: usize) -> u32 {
        self.r_eff[paper]
    }

    pub fn active_refs(&self, paper: usize) -> u32 {
        self.a[paper]
    }

    pub fn journal_share(&self, paper: usize) -> f64 {
        self.p[paper]
    }
}

pub fn compute_citing_stats(corpus: &Corpus) -> CitingSideStats {
    let n = corpus.len();
    let mut r_eff = vec![0u32; n];
    let mut a = vec![0u32; n];
    let mut p = vec![0f64; n];
    let mut summary = SourceNormSummary { citing_papers: corpus.citing_papers().len() as u64, ..Default::default() };
    let mut journal_activity: BTreeMap<String, JournalActivity> = BTreeMap::new();

    for &ci in corpus.citing_papers() {
        let i = ci as usize;
        let out = corpus.out_edges(i);
        let active = out.iter().filter(|&&t| corpus.is_core(t as usize)).count() as u32;
        a[i] = active;
        let declared = corpus.paper(i).total_ref_count;
        r_eff[i] = match declared {
            Some(r) if r > 0 => {
                if active > r {
                    summary.a_exceeds_r_count += 1;
                }
                r
            }
            _ => {
                let deg = out.len() as u32;
                if deg > 0 {
                    summary.fallback_r_count += 1;
                }
                deg
            }
        };
        if r_eff[i] == 0 {
            summary.zero_ref_count += 1;
        }
        if active > 0 {
            summary.active_citing_papers += 1;
        }
        let entry = journal_activity.entry(corpus.paper(i).journal_id.clone()).or_default();
        entry.citing_papers += 1;
        if active > 0 {
            entry.active_papers += 1;
        }
    }

    for &ci in corpus.citing_papers() {
        let i = ci as usize;
        let ja = &journal_activity[&corpus.paper(i).journal_id];
        p[i] = ja.active_papers as f64 / ja.citing_papers as f64;
    }

    summary.journals = journal_activity.len() as u64;
    summary.active_journals =
        journal_activity.values().filter(|j| j.active_papers > 0).count() as u64;

    CitingSideStats { r_eff, a, p, summary, journal_activity }
}

/// Compute the eight base indicator columns for the core papers.
///
/// Sums run over each core paper's incoming edges in ascending citing-paper
/// order, so results do not depend on thread count.
pub fn source_indicators(corpus: &Corpus, stats: &CitingSideStats) -> Vec<MetricVector> {
    let per_paper: Vec<[f64; 4]> = corpus
        .core_papers()
        .par_iter()
        .map(|&pi| {
            let mut c = 0f64;
            let mut sc1 = 0f64;
            let mut sc2 = 0f64;
            let mut sc3 = 0f64;
            for &src in corpus.in_edges(pi as usize) {
                let i = src as usize;
                c += 1.0;
                // Any paper citing a core paper has a >= 1 and r_eff >= 1:
                // the retained edge itself is an active reference.
                let a = stats.a[i] as f64;
                sc1 += 1.0 / stats.r_eff[i] as f64;
                sc2 += 1.0 / a;
                sc3 += 1.0 / (a * stats.p[i]);
            }
            [c, sc1, sc2, sc3]
        })
        .collect();

    let column = |k: usize| -> Vec<f64> { per_paper.iter().map(|row| row[k]).collect() };
    let ln1p = |v: &[f64]| -> Vec<f64> { v.iter().map(|&x| (x + 1.0).ln()).collect() };

    let c = column(0);
    let sc1 = column(1);
    let sc2 = column(2);
    let sc3 = column(3);
    vec![
        MetricVector { metric_id: "c".into(), values: c.clone() },
        MetricVector { metric_id: "c_ln".into(), values: ln1p(&c) },
        MetricVector { metric_id: "sc1".into(), values: sc1.clone() },
        MetricVector { metric_id: "sc2".into(), values: sc2.clone() },
        MetricVector { metric_id: "sc3".into(), values: sc3.clone() },
        MetricVector { metric_id: "sc1_ln".into(), values: ln1p(&sc1) },
        MetricVector { metric_id: "sc2_ln".into(), values: ln1p(&sc2) },
        MetricVector { metric_id: "sc3_ln".into(), values: ln1p(&sc3) },
    ]
}
