//! Field-level diagnostics: growth rates, citation densities, and how much of
//! the between-field variation in the source-normalized indicator they
//! explain.
//!
//! * Growth rate of a field: citing-year paper count divided by the sum of
//!   its core-year paper counts. Under a closed citation flow the field mean
//!   of `sc3` tracks this ratio, so regressing mean `sc3` on growth shows how
//!   much residual field bias growth accounts for.
//! * Citation density of a field: total active references issued by its
//!   citing-year papers.
//! * Density ratio of a core paper: the density of the fields its citers
//!   come from, weighted by citer share, relative to its own field's
//!   density. Field means of this ratio are correlated against the growth
//!   regression residuals to show the density contribution.

use serde::Serialize;

use crate::corpus::{Corpus, GroupingData, Year};
use crate::report::{fmt_sig9, ser_f64_sig9, ser_opt_f64_sig9};
use crate::source_norm::CitingSideStats;

#[derive(Debug, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("need at least {need} fields with defined growth and indicator mass, found {have}")]
    TooFewFields { need: usize, have: usize },
    #[error("regression input is degenerate: {0}")]
    DegenerateRegression(String),
    #[error("sc3 column has {got} values, expected {want} core papers")]
    Misaligned { got: usize, want: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldDiagnostics {
    pub field_id: String,
    /// Paper counts per core year, aligned to the window's sorted core years.
    pub papers_per_core_year: Vec<u64>,
    pub papers_citing_year: u64,
    /// Citing-year count over summed core-year counts; `None` when either
    /// side is empty (flagged).
    #[serde(serialize_with = "ser_opt_f64_sig9")]
    pub growth_rate: Option<f64>,
    /// Total active references issued by the field's citing-year papers.
    #[serde(serialize_with = "ser_f64_sig9")]
    pub density_total: f64,
    #[serde(serialize_with = "ser_opt_f64_sig9")]
    pub density_per_paper: Option<f64>,
    /// Mean `sc3` over the field's core papers.
    #[serde(serialize_with = "ser_opt_f64_sig9")]
    pub mean_sc3: Option<f64>,
    /// Mean over core papers of (citer-weighted ambient density / own density).
    #[serde(serialize_with = "ser_opt_f64_sig9")]
    pub mean_density_ratio: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OlsFit {
    #[serde(serialize_with = "ser_f64_sig9")]
    pub slope: f64,
    #[serde(serialize_with = "ser_f64_sig9")]
    pub intercept: f64,
    /// Coefficient of determination, clamped to [0, 1]; 0 when the response
    /// has no variance.
    #[serde(serialize_with = "ser_f64_sig9")]
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthAnalysis {
    pub fit: OlsFit,
    #[serde(serialize_with = "ser_opt_f64_sig9")]
    pub pearson: Option<f64>,
    /// Growth was (numerically) constant across fields, so only an intercept
    /// was fitted.
    pub constant_growth: bool,
    pub n_fields: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualDensityAnalysis {
    /// Correlation between growth-fit residuals of mean `sc3` and the mean
    /// density ratio; `None` when fewer than 3 fields carry both values.
    #[serde(serialize_with = "ser_opt_f64_sig9")]
    pub pearson: Option<f64>,
    pub n_fields: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsResult {
    pub scheme_id: String,
    pub level: String,
    pub core_years: Vec<Year>,
    pub citing_year: Year,
    pub fields: Vec<FieldDiagnostics>,
    pub growth_analysis: GrowthAnalysis,
    pub residual_density: ResidualDensityAnalysis,
    pub warnings: Vec<String>,
}

/// Ordinary least squares of `y` on `x` with the closed two-parameter form.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit, DiagnosticsError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(DiagnosticsError::DegenerateRegression(format!(
            "need two equal-length samples, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y.iter()) {
        let dx = xi - x_mean;
        let dy = yi - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(DiagnosticsError::DegenerateRegression(
            "predictor has zero variance".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let r2 = if syy == 0.0 {
        0.0
    } else {
        let ss_res: f64 = x
            .iter()
            .zip(y.iter())
            .map(|(&xi, &yi)| {
                let e = yi - (intercept + slope * xi);
                e * e
            })
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(OlsFit { slope, intercept, r2 })
}

/// Pearson correlation; `None` when either sample has zero variance or
/// fewer than two points.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y.iter()) {
        let dx = xi - x_mean;
        let dy = yi - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Relative spread below which growth is treated as constant.
const GROWTH_SPREAD_EPS: f64 = 1e-12;

/// Compute the per-field table and both cross-field analyses.
///
/// `sc3` must be the base `sc3` column aligned to `corpus.core_papers()`.
pub fn compute_diagnostics(
    corpus: &Corpus,
    grouping: &GroupingData,
    stats: &CitingSideStats,
    sc3: &[f64],
) -> Result<DiagnosticsResult, DiagnosticsError> {
    let core = corpus.core_papers();
    if sc3.len() != core.len() {
        return Err(DiagnosticsError::Misaligned { got: sc3.len(), want: core.len() });
    }
    let window = corpus.window();
    let core_years = window.core_years().to_vec();
    let n_fields = grouping.field_count();
    let mut warnings = Vec::new();

    // Position of each core paper in the core-aligned columns.
    let mut core_pos: Vec<u32> = vec![u32::MAX; corpus.len()];
    for (pos, &pi) in core.iter().enumerate() {
        core_pos[pi as usize] = pos as u32;
    }

    // Membership scan: per field, per-year counts plus member lists.
    let mut per_year = vec![vec![0u64; core_years.len()]; n_fields];
    let mut citing_count = vec![0u64; n_fields];
    let mut core_members: Vec<Vec<u32>> = vec![Vec::new(); n_fields];
    let mut citing_members: Vec<Vec<u32>> = vec![Vec::new(); n_fields];
    for pi in 0..corpus.len() {
        let Some(f) = grouping.field_of(pi) else { continue };
        let f = f as usize;
        let year = corpus.paper(pi).pub_year;
        if let Ok(y) = core_years.binary_search(&year) {
            per_year[f][y] += 1;
            core_members[f].push(pi as u32);
        } else if year == window.citing_year() {
            citing_count[f] += 1;
            citing_members[f].push(pi as u32);
        }
    }

    // Field densities: total active references of the field's citing papers.
    let density: Vec<f64> = citing_members
        .iter()
        .map(|members| {
            members.iter().map(|&pi| stats.active_refs(pi as usize) as f64).sum()
        })
        .collect();

    let mut fields = Vec::with_capacity(n_fields);
    for f in 0..n_fields {
        let mut flags = Vec::new();
        let core_total: u64 = per_year[f].iter().sum();
        let growth_rate = if core_total == 0 {
            flags.push("no_core_papers".to_string());
            None
        } else if citing_count[f] == 0 {
            flags.push("no_citing_papers".to_string());
            None
        } else {
            Some(citing_count[f] as f64 / core_total as f64)
        };
        let density_per_paper = if citing_count[f] == 0 {
            None
        } else {
            Some(density[f] / citing_count[f] as f64)
        };
        let mean_sc3 = if core_members[f].is_empty() {
            None
        } else {
            let sum: f64 = core_members[f]
                .iter()
                .map(|&pi| sc3[core_pos[pi as usize] as usize])
                .sum();
            Some(sum / core_members[f].len() as f64)
        };

        // Ambient density per core member: weight the citing fields' total
        // densities by the member's citer composition (assigned citers only).
        let mut ratios: Vec<f64> = Vec::new();
        if density[f] > 0.0 {
            for &pi in &core_members[f] {
                let mut by_field = vec![0u64; n_fields];
                let mut assigned = 0u64;
                for &src in corpus.in_edges(pi as usize) {
                    if let Some(cf) = grouping.field_of(src as usize) {
                        by_field[cf as usize] += 1;
                        assigned += 1;
                    }
                }
                if assigned == 0 {
                    continue;
                }
                let ambient: f64 = by_field
                    .iter()
                    .enumerate()
                    .map(|(k, &cnt)| cnt as f64 / assigned as f64 * density[k])
                    .sum();
                ratios.push(ambient / density[f]);
            }
        } else if !core_members[f].is_empty() {
            flags.push("zero_density".to_string());
        }
        let mean_density_ratio = if ratios.is_empty() {
            None
        } else {
            Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
        };

        fields.push(FieldDiagnostics {
            field_id: grouping.field_ids[f].clone(),
            papers_per_core_year: per_year[f].clone(),
            papers_citing_year: citing_count[f],
            growth_rate,
            density_total: density[f],
            density_per_paper,
            mean_sc3,
            mean_density_ratio,
            flags,
        });
    }

    // Growth regression over fields carrying both coordinates.
    let valid: Vec<&FieldDiagnostics> = fields
        .iter()
        .filter(|fd| fd.growth_rate.is_some() && fd.mean_sc3.is_some())
        .collect();
    if valid.len() < 3 {
        return Err(DiagnosticsError::TooFewFields { need: 3, have: valid.len() });
    }
    let x: Vec<f64> = valid.iter().map(|fd| fd.growth_rate.unwrap()).collect();
    let y: Vec<f64> = valid.iter().map(|fd| fd.mean_sc3.unwrap()).collect();
    let (g_min, g_max) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let spread = (g_max - g_min) / g_max.abs().max(g_min.abs());
    let (fit, constant_growth) = if spread < GROWTH_SPREAD_EPS {
        warnings.push("growth is constant across fields; fitted intercept only".to_string());
        let intercept = y.iter().sum::<f64>() / y.len() as f64;
        (OlsFit { slope: 0.0, intercept, r2: 0.0 }, true)
    } else {
        (ols_fit(&x, &y)?, false)
    };
    let growth_analysis = GrowthAnalysis {
        fit,
        pearson: if constant_growth { None } else { pearson(&x, &y) },
        constant_growth,
        n_fields: valid.len() as u64,
    };

    // Residuals of the growth fit against the density ratio.
    let with_ratio: Vec<(&FieldDiagnostics, f64)> = valid
        .iter()
        .filter_map(|fd| fd.mean_density_ratio.map(|r| (*fd, r)))
        .collect();
    let residual_density = if with_ratio.len() < 3 {
        warnings.push(format!(
            "residual-density correlation needs 3 fields with a density ratio, found {}",
            with_ratio.len()
        ));
        ResidualDensityAnalysis { pearson: None, n_fields: with_ratio.len() as u64 }
    } else {
        let res: Vec<f64> = with_ratio
            .iter()
            .map(|(fd, _)| {
                let g = fd.growth_rate.unwrap();
                fd.mean_sc3.unwrap() - (fit.intercept + fit.slope * g)
            })
            .collect();
        let dr: Vec<f64> = with_ratio.iter().map(|(_, r)| *r).collect();
        ResidualDensityAnalysis {
            pearson: pearson(&res, &dr),
            n_fields: with_ratio.len() as u64,
        }
    };

    Ok(DiagnosticsResult {
        scheme_id: grouping.scheme_id.clone(),
        level: grouping.level.clone(),
        core_years,
        citing_year: window.citing_year(),
        fields,
        growth_analysis,
        residual_density,
        warnings,
    })
}

/// Tabular form of the per-field diagnostics.
pub fn diagnostics_tsv(result: &DiagnosticsResult) -> String {
    let mut header = String::from("field_id");
    for y in &result.core_years {
        header.push_str(&format!("\tm_{y}"));
    }
    header.push_str(&format!("\tm_{}", result.citing_year));
    header.push_str("\tgrowth_rate\tdensity_total\tdensity_per_paper\tmean_sc3\tmean_density_ratio");
    let mut s = header;
    s.push('\n');
    let opt = |v: Option<f64>| v.map(fmt_sig9).unwrap_or_default();
    for fd in &result.fields {
        s.push_str(&fd.field_id);
        for c in &fd.papers_per_core_year {
            s.push_str(&format!("\t{c}"));
        }
        s.push_str(&format!("\t{}", fd.papers_citing_year));
        s.push_str(&format!(
            "\t{}\t{}\t{}\t{}\t{}\n",
            opt(fd.growth_rate),
            fmt_sig9(fd.density_total),
            opt(fd.density_per_paper),
            opt(fd.mean_sc3),
            opt(fd.mean_density_ratio),
        ));
    }
    s
}
