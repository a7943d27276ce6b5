//! Ranking-bias evaluation.
//!
//! For a chosen top share `z`, the papers are ranked by an indicator and the
//! field composition of the top segment is compared against proportional
//! representation using a Mahalanobis-style distance under the
//! multivariate-hypergeometric null:
//!
//! ```text
//! d_M = sum_i (k_i - mu_i)^2 / sigma_i^2 * (1 - K_i / N)
//! mu_i      = (z/100) * K_i
//! sigma_i^2 = gamma * K_i * (N - K_i)
//! gamma     = n * (N - n) / (N^2 * (N - 1))
//! ```
//!
//! where `N` is the number of evaluable papers, `K_i` the field sizes, `n`
//! the top-segment size, and `k_i` the per-field counts inside the top
//! segment. The `(1 - K_i/N)` factor downweights near-universal fields whose
//! complement carries no information. No square root is taken.
//!
//! Significance is judged against a Monte Carlo null: `S` uniform draws of
//! `n` papers from the evaluable set, each scored with the same statistic.
//! The null depends only on the field sizes and `z`, so one simulation is
//! shared by all indicator columns.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::report::{ser_f64_sig9, ser_map_sig9};
use crate::target_norm::{MetricColumn, ALL_METRICS};

#[derive(Debug, thiserror::Error)]
pub enum BiasError {
    #[error("top share z = {z} outside (0, 100]")]
    InvalidShare { z: f64 },
    #[error("top segment for z = {z} has n = {n_top} of N = {n_eval}; need 0 < n < N")]
    InvalidTopSet { z: f64, n_top: u64, n_eval: u64 },
    #[error("evaluable set has {n_eval} papers; need at least 2")]
    TooFewPapers { n_eval: u64 },
    #[error("evaluation grouping has {fields} populated field(s); need at least 2")]
    DegenerateGrouping { fields: u64 },
    #[error("inconsistent bias input: {0}")]
    Inconsistent(String),
    #[error("null model needs at least one sample")]
    NoSamples,
}

/// Field assignment of the papers being evaluated, aligned to the paper list.
#[derive(Debug, Clone)]
pub struct EvalGrouping {
    pub scheme_id: String,
    pub level: String,
    /// Sorted field id table; positions are the indices in `field_of`.
    pub field_ids: Vec<String>,
    pub field_of: Vec<Option<u32>>,
}

impl EvalGrouping {
    /// Resolve a corpus grouping against the corpus core papers.
    pub fn from_corpus(
        corpus: &crate::corpus::Corpus,
        grouping: &crate::corpus::GroupingData,
    ) -> EvalGrouping {
        EvalGrouping {
            scheme_id: grouping.scheme_id.clone(),
            level: grouping.level.clone(),
            field_ids: grouping.field_ids.clone(),
            field_of: corpus
                .core_papers()
                .iter()
                .map(|&i| grouping.field_of(i as usize))
                .collect(),
        }
    }

    /// Resolve loaded assignment rows for one (scheme, level) against an
    /// explicit paper list (e.g. the rows of a metrics table).
    pub fn from_assignments(
        paper_ids: &[String],
        rows: &[crate::corpus::FieldAssignment],
        scheme_id: &str,
        level: &str,
    ) -> EvalGrouping {
        let mut by_paper: BTreeMap<&str, &str> = BTreeMap::new();
        for r in rows {
            if r.scheme_id == scheme_id && r.level == level {
                by_paper.insert(&r.paper_id, &r.field_id);
            }
        }
        let mut field_ids: Vec<String> = Vec::new();
        for id in paper_ids {
            if let Some(f) = by_paper.get(id.as_str()) {
                field_ids.push((*f).to_string());
            }
        }
        field_ids.sort_unstable();
        field_ids.dedup();
        let field_of = paper_ids
            .iter()
            .map(|id| {
                by_paper
                    .get(id.as_str())
                    .map(|f| field_ids.binary_search(&(*f).to_string()).unwrap() as u32)
            })
            .collect();
        EvalGrouping { scheme_id: scheme_id.to_string(), level: level.to_string(), field_ids, field_of }
    }
}

#[derive(Debug, Clone)]
pub struct BiasOptions {
    /// Top shares in percent, each in (0, 100).
    pub z_values: Vec<f64>,
    /// Monte Carlo sample count S.
    pub null_samples: u64,
    /// Master seed; per-null seeds are derived from it by label.
    pub master_seed: u64,
}

impl Default for BiasOptions {
    fn default() -> Self {
        BiasOptions { z_values: vec![1.0, 5.0, 10.0], null_samples: 10_000, master_seed: 42 }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NullDistribution {
    pub s: u64,
    pub seed: u64,
    #[serde(serialize_with = "ser_f64_sig9")]
    pub ci_low: f64,
    #[serde(serialize_with = "ser_f64_sig9")]
    pub ci_high: f64,
    #[serde(serialize_with = "ser_f64_sig9")]
    pub p95: f64,
    #[serde(serialize_with = "ser_f64_sig9")]
    pub min: f64,
    #[serde(serialize_with = "ser_f64_sig9")]
    pub max: f64,
    #[serde(serialize_with = "ser_f64_sig9")]
    pub mean: f64,
    #[serde(serialize_with = "ser_map_sig9")]
    pub quantiles: BTreeMap<String, f64>,
    /// Set when S is too small (< 100) for stable interval estimates.
    pub degenerate: bool,
}

/// One evaluated (indicator, top share) pair.
#[derive(Debug, Clone, Serialize)]
pub struct BiasEvaluation {
    pub metric: String,
    pub scheme: String,
    pub level: String,
    pub z: f64,
    #[serde(rename = "N")]
    pub n_eval: u64,
    #[serde(rename = "n")]
    pub n_top: u64,
    #[serde(rename = "F")]
    pub fields: u64,
    #[serde(serialize_with = "ser_f64_sig9")]
    pub d_m: f64,
    /// Observed distance at or below the null's 97.5% quantile: the ranking
    /// is compatible with a field-neutral draw.
    pub within_ci: bool,
    pub null: NullDistribution,
    pub excluded_unassigned: u64,
}

/// FNV-1a hash of the master seed and a context label, used to give every
/// simulation its own reproducible seed.
pub fn derive_seed(master_seed: u64, label: &str) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    for b in master_seed.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    }
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// The ranking-bias distance. `share` is the nominal top share z/100.
pub fn mahalanobis_distance(
    share: f64,
    n_eval: u64,
    n_top: u64,
    field_counts: &[u64],
    top_counts: &[u64],
) -> Result<f64, BiasError> {
    if n_eval < 2 {
        return Err(BiasError::TooFewPapers { n_eval });
    }
    if n_top == 0 || n_top >= n_eval {
        return Err(BiasError::InvalidTopSet { z: share * 100.0, n_top, n_eval });
    }
    if field_counts.len() < 2 {
        return Err(BiasError::DegenerateGrouping { fields: field_counts.len() as u64 });
    }
    if field_counts.len() != top_counts.len() {
        return Err(BiasError::Inconsistent("field/top count length mismatch".into()));
    }
    if field_counts.iter().sum::<u64>() != n_eval {
        return Err(BiasError::Inconsistent("field counts do not sum to N".into()));
    }
    if top_counts.iter().sum::<u64>() != n_top {
        return Err(BiasError::Inconsistent("top counts do not sum to n".into()));
    }
    let nf = n_eval as f64;
    let n = n_top as f64;
    let gamma = n * (nf - n) / (nf * nf * (nf - 1.0));
    let mut d = 0.0;
    for (&big_k, &k) in field_counts.iter().zip(top_counts.iter()) {
        if big_k == 0 {
            return Err(BiasError::Inconsistent("field with zero papers in evaluation".into()));
        }
        if k > big_k {
            return Err(BiasError::Inconsistent("top count exceeds field size".into()));
        }
        let kf = big_k as f64;
        let mu = share * kf;
        let sigma2 = gamma * kf * (nf - kf);
        let dev = k as f64 - mu;
        d += dev * dev / sigma2 * (1.0 - kf / nf);
    }
    Ok(d)
}

/// Size of the top segment for share `z` (percent, half-up rounding).
pub fn top_segment_size(z: f64, n_eval: u64) -> Result<u64, BiasError> {
    if !(z > 0.0 && z <= 100.0) || !z.is_finite() {
        return Err(BiasError::InvalidShare { z });
    }
    Ok((z / 100.0 * n_eval as f64).round() as u64)
}

/// Rank `values` descending (ties: ascending paper id) and count how many of
/// the top-`z`% fall in each field. Returns `(n_top, counts)`.
///
/// All slices are aligned; `field_of[i]` must be a valid field index.
pub fn top_share_counts(
    values: &[f64],
    paper_ids: &[String],
    field_of: &[u32],
    field_count: usize,
    z: f64,
) -> Result<(u64, Vec<u64>), BiasError> {
    let n_eval = values.len() as u64;
    let n_top = top_segment_size(z, n_eval)?;
    let order = ranking_order(values, paper_ids);
    let mut counts = vec![0u64; field_count];
    for &pos in order.iter().take(n_top as usize) {
        counts[field_of[pos] as usize] += 1;
    }
    Ok((n_top, counts))
}

/// Descending-value ranking with ascending-id tie break. `-0.0` is treated
/// as `0.0` so the sign of a zero cannot influence ranks.
fn ranking_order(values: &[f64], paper_ids: &[String]) -> Vec<usize> {
    let canon = |v: f64| if v == 0.0 { 0.0 } else { v };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        canon(values[b])
            .total_cmp(&canon(values[a]))
            .then_with(|| paper_ids[a].cmp(&paper_ids[b]))
    });
    order
}

/// Linear-interpolation quantile of an ascending-sorted sample.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

const REPORT_QUANTILES: [(&str, f64); 9] = [
    ("0.01", 0.01),
    ("0.05", 0.05),
    ("0.10", 0.10),
    ("0.25", 0.25),
    ("0.50", 0.50),
    ("0.75", 0.75),
    ("0.90", 0.90),
    ("0.95", 0.95),
    ("0.99", 0.99),
];

/// Simulate the null distribution of the distance for the given field sizes.
///
/// Sample `j` uses an RNG on stream `j + 1` of the derived seed, so the set
/// of draws is independent of thread scheduling.
pub fn simulate_null(
    share: f64,
    field_counts: &[u64],
    n_top: u64,
    samples: u64,
    seed: u64,
) -> Result<NullDistribution, BiasError> {
    if samples == 0 {
        return Err(BiasError::NoSamples);
    }
    let n_eval: u64 = field_counts.iter().sum();
    if n_top == 0 || n_top >= n_eval {
        return Err(BiasError::InvalidTopSet { z: share * 100.0, n_top, n_eval });
    }
    // Field index per evaluable position, in block order; uniform draws of
    // positions make the layout irrelevant.
    let mut field_of: Vec<u32> = Vec::with_capacity(n_eval as usize);
    for (f, &big_k) in field_counts.iter().enumerate() {
        field_of.extend(std::iter::repeat_n(f as u32, big_k as usize));
    }

    let mut values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j + 1);
            let picks =
                rand::seq::index::sample(&mut rng, n_eval as usize, n_top as usize);
            let mut k = vec![0u64; field_counts.len()];
            for pos in picks {
                k[field_of[pos] as usize] += 1;
            }
            mahalanobis_distance(share, n_eval, n_top, field_counts, &k)
                .expect("null draw satisfies the distance preconditions")
        })
        .collect();

    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_unstable_by(f64::total_cmp);
    let mut quantiles = BTreeMap::new();
    for (key, p) in REPORT_QUANTILES {
        quantiles.insert(key.to_string(), quantile(&values, p));
    }
    Ok(NullDistribution {
        s: samples,
        seed,
        ci_low: quantile(&values, 0.025),
        ci_high: quantile(&values, 0.975),
        p95: quantile(&values, 0.95),
        min: values[0],
        max: values[values.len() - 1],
        mean,
        quantiles,
        degenerate: samples < 100,
    })
}

/// Evaluate every indicator column at every requested top share.
///
/// The evaluable set is the papers that carry values in all 24 columns and
/// an assignment under `eval`; its size `N` is therefore the same for every
/// column, and one null simulation per top share is shared across columns.
pub fn evaluate_bias(
    paper_ids: &[String],
    columns: &[MetricColumn],
    eval: &EvalGrouping,
    opts: &BiasOptions,
) -> Result<Vec<BiasEvaluation>, BiasError> {
    if columns.len() != ALL_METRICS.len() {
        return Err(BiasError::Inconsistent(format!(
            "expected {} columns, got {}",
            ALL_METRICS.len(),
            columns.len()
        )));
    }
    for (c, want) in columns.iter().zip(ALL_METRICS.iter()) {
        if c.metric_id != *want {
            return Err(BiasError::Inconsistent(format!(
                "column {:?} out of order, expected {:?}",
                c.metric_id, want
            )));
        }
        if c.values.len() != paper_ids.len() {
            return Err(BiasError::Inconsistent(format!(
                "column {:?} has {} rows, expected {}",
                c.metric_id,
                c.values.len(),
                paper_ids.len()
            )));
        }
    }
    if eval.field_of.len() != paper_ids.len() {
        return Err(BiasError::Inconsistent("eval grouping not aligned to papers".into()));
    }

    // Evaluable rows: every column present and an eval-grouping field known.
    let evaluable: Vec<usize> = (0..paper_ids.len())
        .filter(|&i| {
            eval.field_of[i].is_some() && columns.iter().all(|c| c.values[i].is_some())
        })
        .collect();
    let n_eval = evaluable.len() as u64;
    let excluded_unassigned = paper_ids.len() as u64 - n_eval;
    if n_eval < 2 {
        return Err(BiasError::TooFewPapers { n_eval });
    }

    // Compact field table over the evaluable rows only.
    let mut present = vec![false; eval.field_ids.len()];
    for &i in &evaluable {
        present[eval.field_of[i].unwrap() as usize] = true;
    }
    let kept: Vec<u32> =
        (0..eval.field_ids.len() as u32).filter(|&f| present[f as usize]).collect();
    if kept.len() < 2 {
        return Err(BiasError::DegenerateGrouping { fields: kept.len() as u64 });
    }
    let mut remap = vec![u32::MAX; eval.field_ids.len()];
    for (new, &old) in kept.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    let field_of: Vec<u32> =
        evaluable.iter().map(|&i| remap[eval.field_of[i].unwrap() as usize]).collect();
    let mut field_counts = vec![0u64; kept.len()];
    for &f in &field_of {
        field_counts[f as usize] += 1;
    }

    let ids: Vec<String> = evaluable.iter().map(|&i| paper_ids[i].clone()).collect();

    let mut z_values = opts.z_values.clone();
    z_values.sort_unstable_by(f64::total_cmp);
    z_values.dedup();

    // One null per top share, shared across all columns.
    let mut nulls: Vec<(f64, u64, NullDistribution)> = Vec::new();
    for &z in &z_values {
        let n_top = top_segment_size(z, n_eval)?;
        if n_top == 0 || n_top >= n_eval {
            return Err(BiasError::InvalidTopSet { z, n_top, n_eval });
        }
        let label = format!(
            "null:{scheme}:{level}:z={z}:N={n_eval}",
            scheme = eval.scheme_id,
            level = eval.level,
        );
        let seed = derive_seed(opts.master_seed, &label);
        let null = simulate_null(z / 100.0, &field_counts, n_top, opts.null_samples, seed)?;
        nulls.push((z, n_top, null));
    }

    let mut out = Vec::with_capacity(columns.len() * nulls.len());
    for column in columns {
        let values: Vec<f64> =
            evaluable.iter().map(|&i| column.values[i].unwrap()).collect();
        let order = ranking_order(&values, &ids);
        for (z, n_top, null) in &nulls {
            let mut k = vec![0u64; field_counts.len()];
            for &pos in order.iter().take(*n_top as usize) {
                k[field_of[pos] as usize] += 1;
            }
            let d_m =
                mahalanobis_distance(*z / 100.0, n_eval, *n_top, &field_counts, &k)?;
            out.push(BiasEvaluation {
                metric: column.metric_id.clone(),
                scheme: eval.scheme_id.clone(),
                level: eval.level.clone(),
                z: *z,
                n_eval,
                n_top: *n_top,
                fields: kept.len() as u64,
                d_m,
                within_ci: d_m <= null.ci_high,
                null: null.clone(),
                excluded_unassigned,
            });
        }
    }
    Ok(out)
}
