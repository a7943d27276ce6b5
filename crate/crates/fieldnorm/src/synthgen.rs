//! Synthetic corpus generation.
//!
//! A TOML config describes fields, their paper counts per year, the
//! attractiveness dispersion of their core papers, and the reference
//! behavior of their citing-year papers. Generation is fully reproducible:
//! a single RNG stream seeded from one value is consumed in a documented
//! order, and all output tables are sorted, so the same config and seed
//! produce byte-identical files.
//!
//! RNG consumption order (single stream):
//! 1. Per field in config order, per year ascending, per paper sequentially:
//!    core-year papers draw one attractiveness weight.
//! 2. Per field in config order, per citing-year paper in creation order:
//!    one active-reference-count draw (Poisson specs only), then per
//!    reference a cross-field draw (when eligible), a uniform target-field
//!    pick (when crossing), a weighted target-paper pick, and one redraw per
//!    collision (up to [`MAX_COLLISION_REDRAWS`], then the reference is
//!    dropped and counted).
//!
//! Attractiveness weights are log-normal with `E[w] = citation_mean`. The
//! scale cancels inside a field (picks are proportional), so `citation_mean`
//! only matters relative to other fields through nothing at all; dispersion
//! is governed by `sigma` alone.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{CitationEdge, Corpus, FieldAssignment, PaperRecord, Year};
use crate::report::ser_f64_sig9;
use crate::source_norm::CitingSideStats;

/// Redraws granted to a reference that keeps hitting already-cited papers.
pub const MAX_COLLISION_REDRAWS: u32 = 32;

/// Scheme id used for generated assignments.
pub const SYNTH_SCHEME: &str = "synth";
/// Level of the per-field assignment every paper receives.
pub const FIELD_LEVEL: &str = "field";
/// Level of the optional aggregated assignment.
pub const SUPER_LEVEL: &str = "super";

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::Invalid(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Overrides the command-line seed when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub core_years: Vec<Year>,
    pub citing_year: Year,
    /// Probability that a reference leaves its own field.
    #[serde(default)]
    pub cross_field_epsilon: f64,
    /// Declared reference-list length per citing paper:
    /// `ceil(ref_multiplier * drawn_active_refs)`.
    #[serde(default = "default_ref_multiplier")]
    pub ref_multiplier: f64,
    #[serde(default = "default_journals_per_field")]
    pub journals_per_field: u32,
    pub fields: Vec<FieldSpec>,
}

fn default_ref_multiplier() -> f64 {
    2.0
}

fn default_journals_per_field() -> u32 {
    1
}

fn default_sigma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub id: String,
    /// Optional aggregated field emitted at the (synth, super) grouping.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub super_field: Option<String>,
    /// Mean attractiveness weight of the field's core papers.
    pub citation_mean: f64,
    /// Dispersion (log scale) of the attractiveness weights.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Paper counts keyed by year (TOML keys are strings).
    pub papers_per_year: BTreeMap<String, u64>,
    pub active_refs: ActiveRefsSpec,
}

/// Active-reference draw: exactly one of `constant` or `mean` must be set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveRefsSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    /// Lower truncation of the Poisson draw (default 1). The realized mean
    /// of a min-1 truncation is `mean / (1 - exp(-mean))`, which stays
    /// within 5% of `mean` once the mean is 4 or larger.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
enum ActiveRefs {
    Constant(u64),
    Poisson { mean: f64, min: u64 },
}

impl ActiveRefsSpec {
    fn resolve(&self, field: &str) -> Result<ActiveRefs, SynthError> {
        match (self.constant, self.mean) {
            (Some(_), Some(_)) => Err(invalid(format!(
                "field {field:?}: active_refs sets both constant and mean"
            ))),
            (None, None) => Err(invalid(format!(
                "field {field:?}: active_refs needs constant or mean"
            ))),
            (Some(c), None) => {
                if self.min.is_some() {
                    return Err(invalid(format!(
                        "field {field:?}: active_refs.min only applies to Poisson draws"
                    )));
                }
                Ok(ActiveRefs::Constant(c))
            }
            (None, Some(mean)) => {
                if !(mean.is_finite() && mean > 0.0) {
                    return Err(invalid(format!(
                        "field {field:?}: active_refs.mean must be positive"
                    )));
                }
                Ok(ActiveRefs::Poisson { mean, min: self.min.unwrap_or(1) })
            }
        }
    }
}

fn check_identifier(what: &str, s: &str) -> Result<(), SynthError> {
    if s.is_empty() {
        return Err(invalid(format!("{what} must not be empty")));
    }
    if s.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
        return Err(invalid(format!("{what} {s:?} contains tab or newline")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.core_years.is_empty() {
            return Err(invalid("core_years must not be empty"));
        }
        if self.core_years.contains(&self.citing_year) {
            return Err(invalid("citing_year must not be a core year"));
        }
        if !(0.0..=1.0).contains(&self.cross_field_epsilon) {
            return Err(invalid("cross_field_epsilon must lie in [0, 1]"));
        }
        if !(self.ref_multiplier.is_finite() && self.ref_multiplier >= 1.0) {
            return Err(invalid("ref_multiplier must be at least 1"));
        }
        if self.journals_per_field == 0 {
            return Err(invalid("journals_per_field must be at least 1"));
        }
        if self.fields.is_empty() {
            return Err(invalid("at least one field is required"));
        }
        let mut seen = std::collections::HashSet::new();
        for f in &self.fields {
            check_identifier("field id", &f.id)?;
            if !seen.insert(&f.id) {
                return Err(invalid(format!("duplicate field id {:?}", f.id)));
            }
            if let Some(s) = &f.super_field {
                check_identifier("super_field", s)?;
            }
            if !(f.citation_mean.is_finite() && f.citation_mean > 0.0) {
                return Err(invalid(format!("field {:?}: citation_mean must be positive", f.id)));
            }
            if !(f.sigma.is_finite() && f.sigma >= 0.0) {
                return Err(invalid(format!("field {:?}: sigma must be non-negative", f.id)));
            }
            for year in f.papers_per_year.keys() {
                year.parse::<Year>().map_err(|_| {
                    invalid(format!("field {:?}: unparseable year key {year:?}", f.id))
                })?;
            }
            f.active_refs.resolve(&f.id)?;
        }
        let total_core: u64 = self
            .fields
            .iter()
            .map(|f| f.count_in_years(&self.core_years))
            .sum();
        let total_citing: u64 =
            self.fields.iter().map(|f| f.count_in_years(&[self.citing_year])).sum();
        if total_core == 0 {
            return Err(invalid("no papers fall in the core years"));
        }
        if total_citing == 0 {
            return Err(invalid("no papers fall in the citing year"));
        }
        Ok(())
    }
}

impl FieldSpec {
    fn years(&self) -> BTreeMap<Year, u64> {
        self.papers_per_year
            .iter()
            .map(|(y, &c)| (y.parse::<Year>().expect("validated year key"), c))
            .collect()
    }

    fn count_in_years(&self, years: &[Year]) -> u64 {
        self.years().iter().filter(|(y, _)| years.contains(y)).map(|(_, &c)| c).sum()
    }
}

pub fn parse_config(text: &str) -> Result<SynthConfig, SynthError> {
    let config: SynthConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config_file(path: &Path) -> Result<SynthConfig, SynthError> {
    let text = std::fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldGenReport {
    pub field_id: String,
    pub papers: u64,
    pub core_papers: u64,
    pub citing_papers: u64,
    /// Mean of the drawn active-reference counts (before collision drops).
    #[serde(serialize_with = "ser_f64_sig9")]
    pub mean_active_refs_drawn: f64,
    pub refs_kept: u64,
    pub refs_cross_field: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub seed: u64,
    pub papers: u64,
    pub core_papers: u64,
    pub citing_papers: u64,
    pub edges: u64,
    pub dropped_refs_collision: u64,
    pub dropped_refs_no_pool: u64,
    pub per_field: Vec<FieldGenReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct SynthOutput {
    /// Sorted by paper id.
    pub papers: Vec<PaperRecord>,
    /// Sorted by (citing, cited).
    pub edges: Vec<CitationEdge>,
    /// Sorted by (paper, scheme, level).
    pub assignments: Vec<FieldAssignment>,
    pub report: SynthReport,
}

/// The seed generation actually uses: the config's own, else the caller's.
pub fn resolve_seed(config: &SynthConfig, cli_seed: u64) -> u64 {
    config.seed.unwrap_or(cli_seed)
}

pub fn generate(config: &SynthConfig, seed: u64) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_fields = config.fields.len();

    struct GenPaper {
        id: String,
        year: Year,
        journal: String,
        field: u32,
        weight: f64,
        total_ref_count: Option<u32>,
    }

    // Phase 1: create papers and draw core attractiveness weights.
    let mut papers: Vec<GenPaper> = Vec::new();
    let mut core_pool: Vec<Vec<u32>> = vec![Vec::new(); n_fields];
    let mut citing_of: Vec<Vec<u32>> = vec![Vec::new(); n_fields];
    for (fi, spec) in config.fields.iter().enumerate() {
        let lognormal = LogNormal::new(
            spec.citation_mean.ln() - spec.sigma * spec.sigma / 2.0,
            spec.sigma,
        )
        .map_err(|e| invalid(format!("field {:?}: bad weight distribution: {e}", spec.id)))?;
        let mut counter: u64 = 0;
        for (year, count) in spec.years() {
            let is_core = config.core_years.contains(&year);
            for seq in 0..count {
                let idx = papers.len() as u32;
                let weight = if is_core { lognormal.sample(&mut rng) } else { 0.0 };
                papers.push(GenPaper {
                    id: format!("{}-{}-{:05}", spec.id, year, seq),
                    year,
                    journal: format!(
                        "{}-j{:03}",
                        spec.id,
                        counter % config.journals_per_field as u64
                    ),
                    field: fi as u32,
                    weight,
                    total_ref_count: None,
                });
                if is_core {
                    core_pool[fi].push(idx);
                }
                if year == config.citing_year {
                    citing_of[fi].push(idx);
                }
                counter += 1;
            }
        }
    }

    // Cumulative weights per field pool for proportional picks.
    let prefix: Vec<Vec<f64>> = core_pool
        .iter()
        .map(|pool| {
            let mut acc = 0.0;
            pool.iter()
                .map(|&pi| {
                    acc += papers[pi as usize].weight;
                    acc
                })
                .collect()
        })
        .collect();
    let other_pools: Vec<Vec<u32>> = (0..n_fields)
        .map(|fi| {
            (0..n_fields as u32)
                .filter(|&g| g as usize != fi && !core_pool[g as usize].is_empty())
                .collect()
        })
        .collect();

    // Phase 2: draw references for every citing-year paper.
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut dropped_collision: u64 = 0;
    let mut dropped_no_pool: u64 = 0;
    let mut forced_cross: u64 = 0;
    let mut per_field: Vec<FieldGenReport> = Vec::new();
    for (fi, spec) in config.fields.iter().enumerate() {
        let active_refs = spec.active_refs.resolve(&spec.id)?;
        let poisson = match active_refs {
            ActiveRefs::Poisson { mean, .. } => Some(
                Poisson::new(mean)
                    .map_err(|e| invalid(format!("field {:?}: bad Poisson: {e}", spec.id)))?,
            ),
            ActiveRefs::Constant(_) => None,
        };
        let own_pool = !core_pool[fi].is_empty();
        let can_cross = !other_pools[fi].is_empty();
        let mut drawn_sum: u64 = 0;
        let mut kept: u64 = 0;
        let mut cross_kept: u64 = 0;

        for &ci in &citing_of[fi] {
            let a_drawn: u64 = match active_refs {
                ActiveRefs::Constant(c) => c,
                ActiveRefs::Poisson { min, .. } => loop {
                    let x = poisson.as_ref().unwrap().sample(&mut rng) as u64;
                    if x >= min {
                        break x;
                    }
                },
            };
            drawn_sum += a_drawn;
            papers[ci as usize].total_ref_count =
                Some((config.ref_multiplier * a_drawn as f64).ceil() as u32);

            let mut cited: Vec<u32> = Vec::with_capacity(a_drawn as usize);
            for _ in 0..a_drawn {
                // Destination field.
                let target = if own_pool {
                    let cross = can_cross
                        && config.cross_field_epsilon > 0.0
                        && rng.random::<f64>() < config.cross_field_epsilon;
                    if cross {
                        let pick = rng.random_range(0..other_pools[fi].len());
                        other_pools[fi][pick]
                    } else {
                        fi as u32
                    }
                } else if can_cross {
                    forced_cross += 1;
                    let pick = rng.random_range(0..other_pools[fi].len());
                    other_pools[fi][pick]
                } else {
                    dropped_no_pool += 1;
                    continue;
                };
                // Proportional pick within the target pool, redrawing on
                // collisions with this paper's earlier picks.
                let pool = &core_pool[target as usize];
                let pref = &prefix[target as usize];
                let total = *pref.last().expect("nonempty pool");
                let mut accepted = None;
                for _ in 0..=MAX_COLLISION_REDRAWS {
                    let u = rng.random_range(0.0..total);
                    let pos = pref.partition_point(|&p| p <= u);
                    let candidate = pool[pos];
                    if !cited.contains(&candidate) {
                        accepted = Some(candidate);
                        break;
                    }
                }
                match accepted {
                    Some(t) => {
                        cited.push(t);
                        edges.push((ci, t));
                        kept += 1;
                        if target as usize != fi {
                            cross_kept += 1;
                        }
                    }
                    None => dropped_collision += 1,
                }
            }
        }

        per_field.push(FieldGenReport {
            field_id: spec.id.clone(),
            papers: papers.iter().filter(|p| p.field == fi as u32).count() as u64,
            core_papers: core_pool[fi].len() as u64,
            citing_papers: citing_of[fi].len() as u64,
            mean_active_refs_drawn: if citing_of[fi].is_empty() {
                0.0
            } else {
                drawn_sum as f64 / citing_of[fi].len() as f64
            },
            refs_kept: kept,
            refs_cross_field: cross_kept,
        });
    }

    // Phase 3: assemble sorted output tables.
    let mut warnings = Vec::new();
    if dropped_collision > 0 {
        warnings.push(format!(
            "{dropped_collision} reference(s) dropped after {MAX_COLLISION_REDRAWS} collision redraws"
        ));
    }
    if dropped_no_pool > 0 {
        warnings.push(format!(
            "{dropped_no_pool} reference(s) dropped: no field offers citable core papers"
        ));
    }
    if forced_cross > 0 {
        warnings.push(format!(
            "{forced_cross} reference(s) crossed fields because their own field has no core papers"
        ));
    }

    let core_total: u64 = core_pool.iter().map(|p| p.len() as u64).sum();
    let citing_total: u64 = citing_of.iter().map(|p| p.len() as u64).sum();
    let report = SynthReport {
        seed,
        papers: papers.len() as u64,
        core_papers: core_total,
        citing_papers: citing_total,
        edges: edges.len() as u64,
        dropped_refs_collision: dropped_collision,
        dropped_refs_no_pool: dropped_no_pool,
        per_field,
        warnings,
    };

    let mut records: Vec<PaperRecord> = papers
        .iter()
        .map(|p| PaperRecord {
            paper_id: p.id.clone(),
            pub_year: p.year,
            journal_id: p.journal.clone(),
            total_ref_count: p.total_ref_count,
        })
        .collect();
    records.sort_unstable_by(|a, b| a.paper_id.cmp(&b.paper_id));

    let mut edge_records: Vec<CitationEdge> = edges
        .iter()
        .map(|&(s, t)| CitationEdge {
            citing_id: papers[s as usize].id.clone(),
            cited_id: papers[t as usize].id.clone(),
        })
        .collect();
    edge_records.sort_unstable();

    let mut assignments: Vec<FieldAssignment> = Vec::new();
    for p in &papers {
        let spec = &config.fields[p.field as usize];
        assignments.push(FieldAssignment {
            paper_id: p.id.clone(),
            scheme_id: SYNTH_SCHEME.to_string(),
            level: FIELD_LEVEL.to_string(),
            field_id: spec.id.clone(),
        });
        if let Some(s) = &spec.super_field {
            assignments.push(FieldAssignment {
                paper_id: p.id.clone(),
                scheme_id: SYNTH_SCHEME.to_string(),
                level: SUPER_LEVEL.to_string(),
                field_id: s.clone(),
            });
        }
    }
    assignments.sort_unstable();

    Ok(SynthOutput { papers: records, edges: edge_records, assignments, report })
}

/// How well a generated (or real) corpus matches the modeling assumptions:
/// stable field sizes over the window, limited cross-field citation, and no
/// journals without active papers.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Per field: (max - min) / min over the window-year paper counts.
    /// Absent for fields with an empty window year.
    #[serde(serialize_with = "crate::report::ser_map_sig9")]
    pub per_field_max_rel_dev: BTreeMap<String, f64>,
    /// Share of retained edges joining two differently-assigned papers,
    /// among edges with both endpoints assigned.
    #[serde(serialize_with = "ser_f64_sig9")]
    pub cross_field_fraction: f64,
    /// Journals whose citing-year papers cite no core papers at all.
    pub inactive_journals: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn verify_assumptions(corpus: &Corpus, stats: &CitingSideStats) -> AssumptionReport {
    let mut warnings = Vec::new();
    let mut per_field_max_rel_dev = BTreeMap::new();
    let mut cross = 0u64;
    let mut both_assigned = 0u64;

    match corpus.grouping(SYNTH_SCHEME, FIELD_LEVEL) {
        Some(grouping) => {
            let window = corpus.window();
            let mut years: Vec<Year> = window.core_years().to_vec();
            years.push(window.citing_year());
            let mut counts: Vec<Vec<u64>> = vec![vec![0; years.len()]; grouping.field_count()];
            for pi in 0..corpus.len() {
                let Some(f) = grouping.field_of(pi) else { continue };
                if let Some(yi) = years.iter().position(|&y| y == corpus.paper(pi).pub_year) {
                    counts[f as usize][yi] += 1;
                }
            }
            for (f, per_year) in counts.iter().enumerate() {
                let min = *per_year.iter().min().expect("window has years");
                let max = *per_year.iter().max().expect("window has years");
                if min == 0 {
                    warnings.push(format!(
                        "field {:?} has an empty window year; size stability undefined",
                        grouping.field_ids[f]
                    ));
                } else {
                    per_field_max_rel_dev.insert(
                        grouping.field_ids[f].clone(),
                        (max - min) as f64 / min as f64,
                    );
                }
            }

            for &ci in corpus.citing_papers() {
                let i = ci as usize;
                let Some(cf) = grouping.field_of(i) else { continue };
                for &t in corpus.out_edges(i) {
                    let Some(tf) = grouping.field_of(t as usize) else { continue };
                    both_assigned += 1;
                    if cf != tf {
                        cross += 1;
                    }
                }
            }
        }
        None => warnings.push(format!(
            "no ({SYNTH_SCHEME}, {FIELD_LEVEL}) grouping; field assumptions not checked"
        )),
    }

    let inactive_journals: Vec<String> = stats
        .journal_activity
        .iter()
        .filter(|(_, a)| a.active_papers == 0)
        .map(|(j, _)| j.clone())
        .collect();
    if !inactive_journals.is_empty() {
        warnings.push(format!("{} journal(s) have no active citing papers", inactive_journals.len()));
    }

    AssumptionReport {
        per_field_max_rel_dev,
        cross_field_fraction: if both_assigned == 0 {
            0.0
        } else {
            cross as f64 / both_assigned as f64
        },
        inactive_journals,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, WindowConfig};
    use crate::source_norm::compute_citing_stats;

    fn two_field_config() -> SynthConfig {
        parse_config(
            r#"
            core_years = [2020, 2021]
            citing_year = 2022
            cross_field_epsilon = 0.0
            ref_multiplier = 2.0
            journals_per_field = 2

            [[fields]]
            id = "FA"
            citation_mean = 3.0
            sigma = 1.0
            papers_per_year = { 2020 = 30, 2021 = 30, 2022 = 40 }
            active_refs = { mean = 6.0 }

            [[fields]]
            id = "FB"
            citation_mean = 3.0
            sigma = 0.5
            papers_per_year = { 2020 = 30, 2021 = 30, 2022 = 40 }
            active_refs = { constant = 4 }
            "#,
        )
        .unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = parse_config(
            r#"
            core_years = [2020]
            citing_year = 2022
            [[fields]]
            id = "F"
            citation_mean = 2.0
            papers_per_year = { 2020 = 5, 2022 = 5 }
            active_refs = { constant = 2 }
            "#,
        )
        .unwrap();
        assert_eq!(c.cross_field_epsilon, 0.0);
        assert_eq!(c.ref_multiplier, 2.0);
        assert_eq!(c.journals_per_field, 1);
        assert_eq!(c.fields[0].sigma, 1.0);
        assert_eq!(resolve_seed(&c, 99), 99);

        for (needle, bad) in [
            ("citing_year", "core_years = [2022]\nciting_year = 2022\n[[fields]]\nid = \"F\"\ncitation_mean = 2.0\npapers_per_year = { 2022 = 5 }\nactive_refs = { constant = 1 }"),
            ("duplicate field", "core_years = [2020]\nciting_year = 2022\n[[fields]]\nid = \"F\"\ncitation_mean = 2.0\npapers_per_year = { 2020 = 5 }\nactive_refs = { constant = 1 }\n[[fields]]\nid = \"F\"\ncitation_mean = 2.0\npapers_per_year = { 2022 = 5 }\nactive_refs = { constant = 1 }"),
            ("both constant and mean", "core_years = [2020]\nciting_year = 2022\n[[fields]]\nid = \"F\"\ncitation_mean = 2.0\npapers_per_year = { 2020 = 5, 2022 = 5 }\nactive_refs = { constant = 1, mean = 2.0 }"),
            ("unparseable year", "core_years = [2020]\nciting_year = 2022\n[[fields]]\nid = \"F\"\ncitation_mean = 2.0\npapers_per_year = { x = 5 }\nactive_refs = { constant = 1 }"),
            ("epsilon", "core_years = [2020]\nciting_year = 2022\ncross_field_epsilon = 1.5\n[[fields]]\nid = \"F\"\ncitation_mean = 2.0\npapers_per_year = { 2020 = 5, 2022 = 5 }\nactive_refs = { constant = 1 }"),
            ("tab", "core_years = [2020]\nciting_year = 2022\n[[fields]]\nid = \"a\\tb\"\ncitation_mean = 2.0\npapers_per_year = { 2020 = 5, 2022 = 5 }\nactive_refs = { constant = 1 }"),
        ] {
            let err = parse_config(bad).unwrap_err();
            let msg = err.to_string();
            assert!(
                msg.to_lowercase().contains(&needle.to_lowercase().split(' ').next().unwrap().to_string())
                    || matches!(err, SynthError::Invalid(_)),
                "case {needle:?} produced: {msg}"
            );
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let config = two_field_config();
        let a = generate(&config, 7).unwrap();
        let b = generate(&config, 7).unwrap();
        assert_eq!(a.papers, b.papers);
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.assignments, b.assignments);
        let c = generate(&config, 8).unwrap();
        assert_ne!(a.edges, c.edges, "different seeds should differ");
    }

    #[test]
    fn generated_structure_matches_config() {
        let config = two_field_config();
        let out = generate(&config, 11).unwrap();
        assert_eq!(out.papers.len(), 2 * 100);
        assert_eq!(out.report.core_papers, 120);
        assert_eq!(out.report.citing_papers, 80);

        // Ids follow {field}-{year}-{seq:05}; journals round-robin over two.
        assert!(out.papers.iter().any(|p| p.paper_id == "FA-2020-00000"));
        let journals: std::collections::BTreeSet<&str> = out
            .papers
            .iter()
            .filter(|p| p.paper_id.starts_with("FA-"))
            .map(|p| p.journal_id.as_str())
            .collect();
        assert_eq!(
            journals.into_iter().collect::<Vec<_>>(),
            vec!["FA-j000", "FA-j001"]
        );

        // Core papers carry no declared reference count; citing papers do.
        for p in &out.papers {
            if p.pub_year == 2022 {
                let r = p.total_ref_count.expect("citing paper has declared refs");
                assert!(r >= 2, "multiplier 2 with at least one ref");
            } else {
                assert_eq!(p.total_ref_count, None);
            }
        }

        // Constant spec: every FB citing paper drew exactly 4 references and
        // no drops occurred (pool of 60 against 4 picks).
        assert_eq!(out.report.dropped_refs_collision, 0);
        assert_eq!(out.report.dropped_refs_no_pool, 0);
        let fb = &out.report.per_field[1];
        assert_eq!(fb.refs_kept, 40 * 4);
        assert_eq!(fb.mean_active_refs_drawn, 4.0);

        // Epsilon 0: every edge stays inside its field.
        assert_eq!(fb.refs_cross_field, 0);
        for e in &out.edges {
            assert_eq!(e.citing_id.split('-').next(), e.cited_id.split('-').next());
        }

        // Edges are sorted and collision-free.
        let mut sorted = out.edges.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted, out.edges);
    }

    #[test]
    fn truncated_poisson_respects_min_and_mean() {
        let config = parse_config(
            r#"
            core_years = [2020]
            citing_year = 2022
            [[fields]]
            id = "F"
            citation_mean = 2.0
            sigma = 0.3
            papers_per_year = { 2020 = 200, 2022 = 500 }
            active_refs = { mean = 8.0, min = 3 }
            "#,
        )
        .unwrap();
        let out = generate(&config, 5).unwrap();
        let (corpus, _) = build_corpus(
            out.papers.clone(),
            out.edges.clone(),
            out.assignments.clone(),
            WindowConfig::new(&[2020], 2022).unwrap(),
        )
        .unwrap();
        // No drops (pool 200 vs picks ~8), so out-degree equals the draw.
        assert_eq!(out.report.dropped_refs_collision, 0);
        for &ci in corpus.citing_papers() {
            assert!(corpus.out_edges(ci as usize).len() >= 3);
        }
        let mean = out.report.per_field[0].mean_active_refs_drawn;
        assert!((mean - 8.0).abs() < 0.5, "realized mean {mean} too far from 8");
    }

    #[test]
    fn epsilon_one_sends_every_reference_across() {
        let config = parse_config(
            r#"
            core_years = [2020]
            citing_year = 2022
            cross_field_epsilon = 1.0
            [[fields]]
            id = "A"
            citation_mean = 2.0
            papers_per_year = { 2020 = 20, 2022 = 10 }
            active_refs = { constant = 3 }
            [[fields]]
            id = "B"
            citation_mean = 2.0
            papers_per_year = { 2020 = 20, 2022 = 10 }
            active_refs = { constant = 3 }
            "#,
        )
        .unwrap();
        let out = generate(&config, 3).unwrap();
        for e in &out.edges {
            assert_ne!(
                e.citing_id.split('-').next(),
                e.cited_id.split('-').next(),
                "edge {e:?} should cross fields"
            );
        }
        let (corpus, report) = build_corpus(
            out.papers,
            out.edges,
            out.assignments,
            WindowConfig::new(&[2020], 2022).unwrap(),
        )
        .unwrap();
        assert_eq!(report.edges_dropped_unknown_endpoint, 0);
        assert_eq!(report.edges_retained, 60);
        let stats = compute_citing_stats(&corpus);
        let assumptions = verify_assumptions(&corpus, &stats);
        assert_eq!(assumptions.cross_field_fraction, 1.0);
    }

    #[test]
    fn assumption_report_flags_size_drift_and_inactive_journals() {
        let config = parse_config(
            r#"
            core_years = [2020, 2021]
            citing_year = 2022
            journals_per_field = 3
            [[fields]]
            id = "G"
            citation_mean = 2.0
            papers_per_year = { 2020 = 10, 2021 = 20, 2022 = 40 }
            active_refs = { constant = 2 }
            [[fields]]
            id = "H"
            citation_mean = 2.0
            papers_per_year = { 2020 = 10, 2021 = 10, 2022 = 10 }
            active_refs = { constant = 2 }
            "#,
        )
        .unwrap();
        let out = generate(&config, 1).unwrap();
        let (corpus, _) = build_corpus(
            out.papers,
            out.edges,
            out.assignments,
            WindowConfig::default(),
        )
        .unwrap();
        let stats = compute_citing_stats(&corpus);
        let a = verify_assumptions(&corpus, &stats);
        // G: counts (10, 20, 40) over the window: (40 - 10) / 10 = 3.
        assert_eq!(a.per_field_max_rel_dev["G"], 3.0);
        assert_eq!(a.per_field_max_rel_dev["H"], 0.0);
        assert!(a.inactive_journals.is_empty());
        assert_eq!(a.cross_field_fraction, 0.0);
    }

    #[test]
    fn super_field_assignments_are_emitted() {
        let config = parse_config(
            r#"
            core_years = [2020]
            citing_year = 2022
            [[fields]]
            id = "A"
            super_field = "S"
            citation_mean = 2.0
            papers_per_year = { 2020 = 3, 2022 = 2 }
            active_refs = { constant = 1 }
            [[fields]]
            id = "B"
            citation_mean = 2.0
            papers_per_year = { 2020 = 3, 2022 = 2 }
            active_refs = { constant = 1 }
            "#,
        )
        .unwrap();
        let out = generate(&config, 2).unwrap();
        let supers: Vec<&FieldAssignment> =
            out.assignments.iter().filter(|a| a.level == SUPER_LEVEL).collect();
        // Only field A declares a super field: 5 papers.
        assert_eq!(supers.len(), 5);
        assert!(supers.iter().all(|a| a.field_id == "S" && a.paper_id.starts_with("A-")));
        let fields: Vec<&FieldAssignment> =
            out.assignments.iter().filter(|a| a.level == FIELD_LEVEL).collect();
        assert_eq!(fields.len(), 10);
    }
}
