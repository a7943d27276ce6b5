//! Corpus ingestion: papers, citation edges, and field assignments.
//!
//! Input files are plain TSV (papers may also come as JSONL). Loading is
//! line-oriented with exact header checks; malformed rows abort the load with
//! a line number unless `skip_bad_rows` is set, in which case they are
//! collected and counted. The built [`Corpus`] is canonically sorted by
//! paper id, so identical inputs produce identical indexes regardless of the
//! row order on disk.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub type Year = i32;

/// Publication years accepted by the loaders unless overridden.
pub const DEFAULT_YEAR_RANGE: RangeInclusive<Year> = 1900..=2100;

pub const PAPERS_HEADER: &str = "paper_id\tpub_year\tjournal_id\ttotal_ref_count";
pub const CITATIONS_HEADER: &str = "citing_id\tcited_id";
pub const FIELDS_HEADER: &str = "paper_id\tscheme_id\tlevel\tfield_id";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub pub_year: Year,
    pub journal_id: String,
    pub total_ref_count: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CitationEdge {
    pub citing_id: String,
    pub cited_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct FieldAssignment {
    pub paper_id: String,
    pub scheme_id: String,
    pub level: String,
    pub field_id: String,
}

/// Citation window: the cited ("core") publication years and the single
/// citing year whose papers generate the counted citations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowConfig {
    core_years: Vec<Year>,
    citing_year: Year,
}

impl WindowConfig {
    pub fn new(core_years: &[Year], citing_year: Year) -> Result<Self, CorpusError> {
        let mut years: Vec<Year> = core_years.to_vec();
        years.sort_unstable();
        years.dedup();
        if years.is_empty() {
            return Err(CorpusError::EmptyCoreYears);
        }
        if years.contains(&citing_year) {
            return Err(CorpusError::CitingYearInCore { year: citing_year });
        }
        Ok(WindowConfig { core_years: years, citing_year })
    }

    pub fn core_years(&self) -> &[Year] {
        &self.core_years
    }

    pub fn citing_year(&self) -> Year {
        self.citing_year
    }

    pub fn is_core_year(&self, year: Year) -> bool {
        self.core_years.binary_search(&year).is_ok()
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { core_years: vec![2020, 2021], citing_year: 2022 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaperFormat {
    Tsv,
    Jsonl,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub skip_bad_rows: bool,
    pub year_range: RangeInclusive<Year>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { skip_bad_rows: false, year_range: DEFAULT_YEAR_RANGE }
    }
}

/// A rejected input row, reported with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BadRow {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for BadRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected header {expected:?}, found {found:?}")]
    BadHeader { path: String, expected: String, found: String },
    #[error("{path}: line {line}: {reason}")]
    BadRowError { path: String, line: usize, reason: String },
    #[error("duplicate paper_id {paper_id:?} (line {line})")]
    DuplicatePaperId { paper_id: String, line: usize },
    #[error("conflicting field assignment for paper {paper_id:?} at ({scheme_id}, {level}): {first:?} vs {second:?}")]
    AssignmentConflict { paper_id: String, scheme_id: String, level: String, first: String, second: String },
    #[error("core year set is empty")]
    EmptyCoreYears,
    #[error("citing year {year} is also listed as a core year")]
    CitingYearInCore { year: Year },
    #[error("no papers fall in the core years")]
    EmptyCoreSet,
    #[error("no papers fall in the citing year")]
    EmptyCitingSet,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PapersLoad {
    pub records: Vec<PaperRecord>,
    pub skipped: Vec<BadRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CitationsLoad {
    pub edges: Vec<CitationEdge>,
    /// Exact duplicate (citing, cited) rows removed during load.
    pub duplicates: u64,
    pub skipped: Vec<BadRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AssignmentsLoad {
    pub rows: Vec<FieldAssignment>,
    /// Exact duplicate rows removed during load (same key and same field).
    pub duplicates: u64,
    pub skipped: Vec<BadRow>,
    pub warnings: Vec<String>,
}

fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    // CRLF inputs are accepted; the carriage return is stripped per line.
    Ok(text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l).to_string()).collect())
}

fn check_header(path: &Path, lines: &[String], expected: &str) -> Result<(), CorpusError> {
    match lines.first() {
        Some(h) if h == expected => Ok(()),
        other => Err(CorpusError::BadHeader {
            path: path.display().to_string(),
            expected: expected.to_string(),
            found: other.cloned().unwrap_or_default(),
        }),
    }
}

/// Shared bad-row policy: abort with the line number, or collect and go on.
fn reject(
    path: &Path,
    opts: &LoadOptions,
    skipped: &mut Vec<BadRow>,
    line: usize,
    reason: String,
) -> Result<(), CorpusError> {
    if opts.skip_bad_rows {
        skipped.push(BadRow { line, reason });
        Ok(())
    } else {
        Err(CorpusError::BadRowError { path: path.display().to_string(), line, reason })
    }
}

pub fn load_papers(
    path: &Path,
    format: PaperFormat,
    opts: &LoadOptions,
) -> Result<PapersLoad, CorpusError> {
    let lines = read_lines(path)?;
    let mut out = PapersLoad::default();
    let mut seen: HashMap<String, usize> = HashMap::new();

    let body: &[String] = match format {
        PaperFormat::Tsv => {
            check_header(path, &lines, PAPERS_HEADER)?;
            &lines[1..]
        }
        PaperFormat::Jsonl => &lines[..],
    };
    let line_base = if format == PaperFormat::Tsv { 2 } else { 1 };

    for (i, raw) in body.iter().enumerate() {
        let line = i + line_base;
        if raw.is_empty() {
            continue;
        }
        let parsed = match format {
            PaperFormat::Tsv => parse_paper_tsv(raw),
            PaperFormat::Jsonl => parse_paper_jsonl(raw),
        };
        let rec = match parsed {
            Ok(rec) => rec,
            Err(reason) => {
                reject(path, opts, &mut out.skipped, line, reason)?;
                continue;
            }
        };
        if !opts.year_range.contains(&rec.pub_year) {
            let reason = format!(
                "pub_year {} outside valid range {}..={}",
                rec.pub_year,
                opts.year_range.start(),
                opts.year_range.end()
            );
            reject(path, opts, &mut out.skipped, line, reason)?;
            continue;
        }
        if seen.insert(rec.paper_id.clone(), line).is_some() {
            return Err(CorpusError::DuplicatePaperId { paper_id: rec.paper_id, line });
        }
        out.records.push(rec);
    }
    if out.records.is_empty() {
        out.warnings.push(format!("{}: no paper rows loaded", path.display()));
    }
    Ok(out)
}

fn parse_paper_tsv(raw: &str) -> Result<PaperRecord, String> {
    let cols: Vec<&str> = raw.split('\t').collect();
    if cols.len() != 4 {
        return Err(format!("expected 4 tab-separated columns, found {}", cols.len()));
    }
    let paper_id = cols[0].trim();
    if paper_id.is_empty() {
        return Err("missing paper_id".to_string());
    }
    let pub_year: Year = cols[1]
        .trim()
        .parse()
        .map_err(|_| format!("unparseable pub_year {:?}", cols[1]))?;
    let journal_id = cols[2].trim();
    if journal_id.is_empty() {
        return Err("missing journal_id".to_string());
    }
    let total_ref_count = match cols[3].trim() {
        "" => None,
        s => Some(s.parse::<u32>().map_err(|_| format!("unparseable total_ref_count {s:?}"))?),
    };
    Ok(PaperRecord {
        paper_id: paper_id.to_string(),
        pub_year,
        journal_id: journal_id.to_string(),
        total_ref_count,
    })
}

fn parse_paper_jsonl(raw: &str) -> Result<PaperRecord, String> {
    #[derive(Deserialize)]
    struct Row {
        paper_id: Option<String>,
        pub_year: Option<Year>,
        journal_id: Option<String>,
        total_ref_count: Option<u32>,
    }
    let row: Row = serde_json::from_str(raw).map_err(|e| format!("unparseable JSON: {e}"))?;
    let paper_id = row.paper_id.filter(|s| !s.is_empty()).ok_or("missing paper_id")?;
    let pub_year = row.pub_year.ok_or("missing pub_year")?;
    let journal_id = row.journal_id.filter(|s| !s.is_empty()).ok_or("missing journal_id")?;
    Ok(PaperRecord { paper_id, pub_year, journal_id, total_ref_count: row.total_ref_count })
}

pub fn load_citations(path: &Path, opts: &LoadOptions) -> Result<CitationsLoad, CorpusError> {
    let lines = read_lines(path)?;
    check_header(path, &lines, CITATIONS_HEADER)?;
    let mut out = CitationsLoad::default();
    let mut seen: HashSet<(String, String)> = HashSet::new();

    for (i, raw) in lines[1..].iter().enumerate() {
        let line = i + 2;
        if raw.is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 2 || cols[0].trim().is_empty() || cols[1].trim().is_empty() {
            reject(path, opts, &mut out.skipped, line, "expected 2 non-empty columns".into())?;
            continue;
        }
        let (citing, cited) = (cols[0].trim(), cols[1].trim());
        if citing == cited {
            let reason = format!("self-loop edge ({citing}, {cited})");
            reject(path, opts, &mut out.skipped, line, reason)?;
            continue;
        }
        if seen.insert((citing.to_string(), cited.to_string())) {
            out.edges.push(CitationEdge {
                citing_id: citing.to_string(),
                cited_id: cited.to_string(),
            });
        } else {
            out.duplicates += 1;
        }
    }
    if out.edges.is_empty() {
        out.warnings.push(format!("{}: no citation edges loaded", path.display()));
    }
    Ok(out)
}

pub fn load_field_assignments(
    path: &Path,
    opts: &LoadOptions,
) -> Result<AssignmentsLoad, CorpusError> {
    let lines = read_lines(path)?;
    check_header(path, &lines, FIELDS_HEADER)?;
    let mut out = AssignmentsLoad::default();
    // (paper, scheme, level) -> field; a second row with a different field is a conflict.
    let mut seen: HashMap<(String, String, String), String> = HashMap::new();

    for (i, raw) in lines[1..].iter().enumerate() {
        let line = i + 2;
        if raw.is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 4 || cols.iter().any(|c| c.trim().is_empty()) {
            reject(path, opts, &mut out.skipped, line, "expected 4 non-empty columns".into())?;
            continue;
        }
        let key = (cols[0].trim().to_string(), cols[1].trim().to_string(), cols[2].trim().to_string());
        let field = cols[3].trim().to_string();
        match seen.get(&key) {
            Some(existing) if *existing == field => {
                out.duplicates += 1;
            }
            Some(existing) => {
                return Err(CorpusError::AssignmentConflict {
                    paper_id: key.0,
                    scheme_id: key.1,
                    level: key.2,
                    first: existing.clone(),
                    second: field,
                });
            }
            None => {
                seen.insert(key.clone(), field.clone());
                out.rows.push(FieldAssignment {
                    paper_id: key.0,
                    scheme_id: key.1,
                    level: key.2,
                    field_id: field,
                });
            }
        }
    }
    if out.rows.is_empty() {
        out.warnings.push(format!("{}: no field assignments loaded", path.display()));
    }
    Ok(out)
}

/// Field assignments for one (scheme, level) pair, resolved to dense indices.
#[derive(Debug, Clone)]
pub struct GroupingData {
    pub scheme_id: String,
    pub level: String,
    /// Sorted, deduplicated field identifiers; positions are field indices.
    pub field_ids: Vec<String>,
    /// Per paper (corpus order): index into `field_ids`, or None if unassigned.
    assignment: Vec<Option<u32>>,
}

impl GroupingData {
    pub fn field_of(&self, paper: usize) -> Option<u32> {
        self.assignment[paper]
    }

    pub fn field_count(&self) -> usize {
        self.field_ids.len()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageEntry {
    pub scheme_id: String,
    pub level: String,
    pub fields: usize,
    pub assigned_total: u64,
    pub assigned_core: u64,
    pub assigned_citing: u64,
    pub fraction_total: f64,
    pub fraction_core: f64,
    pub fraction_citing: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub papers_total: u64,
    pub core_count: u64,
    pub citing_count: u64,
    pub edges_input: u64,
    pub edges_retained: u64,
    pub edges_dropped_unknown_endpoint: u64,
    pub edges_dropped_citing_outside_window: u64,
    pub edges_dropped_self_loop: u64,
    pub edges_deduplicated: u64,
    pub assignments_dropped_unknown_paper: u64,
    pub coverage: Vec<CoverageEntry>,
}

/// Immutable citation corpus with canonical ordering.
///
/// Papers are sorted by id; retained edges all originate from citing-year
/// papers; adjacency is stored both ways in CSR form.
#[derive(Debug, Clone)]
pub struct Corpus {
    papers: Vec<PaperRecord>,
    index: HashMap<String, u32>,
    window: WindowConfig,
    core: Vec<u32>,
    citing: Vec<u32>,
    role: Vec<Role>,
    out_offsets: Vec<u32>,
    out_targets: Vec<u32>,
    in_offsets: Vec<u32>,
    in_sources: Vec<u32>,
    groupings: BTreeMap<(String, String), GroupingData>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Core,
    Citing,
    Other,
}

pub fn build_corpus(
    papers: Vec<PaperRecord>,
    edges: Vec<CitationEdge>,
    assignments: Vec<FieldAssignment>,
    window: WindowConfig,
) -> Result<(Corpus, BuildReport), CorpusError> {
    let mut papers = papers;
    papers.sort_unstable_by(|a, b| a.paper_id.cmp(&b.paper_id));
    let mut index: HashMap<String, u32> = HashMap::with_capacity(papers.len());
    for (i, p) in papers.iter().enumerate() {
        if index.insert(p.paper_id.clone(), i as u32).is_some() {
            return Err(CorpusError::DuplicatePaperId { paper_id: p.paper_id.clone(), line: 0 });
        }
    }

    let role: Vec<Role> = papers
        .iter()
        .map(|p| {
            if window.is_core_year(p.pub_year) {
                Role::Core
            } else if p.pub_year == window.citing_year() {
                Role::Citing
            } else {
                Role::Other
            }
        })
        .collect();
    let core: Vec<u32> =
        (0..papers.len() as u32).filter(|&i| role[i as usize] == Role::Core).collect();
    let citing: Vec<u32> =
        (0..papers.len() as u32).filter(|&i| role[i as usize] == Role::Citing).collect();
    if core.is_empty() {
        return Err(CorpusError::EmptyCoreSet);
    }
    if citing.is_empty() {
        return Err(CorpusError::EmptyCitingSet);
    }

    // Resolve, filter, and canonicalize edges. Loaders already deduplicate
    // and reject self-loops; both are re-checked so programmatic callers get
    // the same behavior.
    let edges_input = edges.len() as u64;
    let mut dropped_unknown = 0u64;
    let mut dropped_window = 0u64;
    let mut dropped_self = 0u64;
    let mut resolved: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
    for e in &edges {
        let (Some(&s), Some(&t)) = (index.get(&e.citing_id), index.get(&e.cited_id)) else {
            dropped_unknown += 1;
            continue;
        };
        if s == t {
            dropped_self += 1;
            continue;
        }
        if role[s as usize] != Role::Citing {
            dropped_window += 1;
            continue;
        }
        resolved.push((s, t));
    }
    resolved.sort_unstable();
    let before = resolved.len();
    resolved.dedup();
    let edges_deduplicated = (before - resolved.len()) as u64;
    let edges_retained = resolved.len() as u64;

    let n = papers.len();
    let mut out_offsets = vec![0u32; n + 1];
    for &(s, _) in &resolved {
        out_offsets[s as usize + 1] += 1;
    }
    for i in 0..n {
        out_offsets[i + 1] += out_offsets[i];
    }
    let out_targets: Vec<u32> = resolved.iter().map(|&(_, t)| t).collect();

    let mut by_target = resolved.clone();
    by_target.sort_unstable_by_key(|&(s, t)| (t, s));
    let mut in_offsets = vec![0u32; n + 1];
    for &(_, t) in &by_target {
        in_offsets[t as usize + 1] += 1;
    }
    for i in 0..n {
        in_offsets[i + 1] += in_offsets[i];
    }
    let in_sources: Vec<u32> = by_target.iter().map(|&(s, _)| s).collect();

    // Group assignments by (scheme, level); field tables are sorted.
    let mut dropped_assign = 0u64;
    let mut grouped: BTreeMap<(String, String), Vec<(u32, String)>> = BTreeMap::new();
    for a in assignments {
        let Some(&pi) = index.get(&a.paper_id) else {
            dropped_assign += 1;
            continue;
        };
        grouped.entry((a.scheme_id, a.level)).or_default().push((pi, a.field_id));
    }
    let mut groupings = BTreeMap::new();
    let mut coverage = Vec::new();
    for ((scheme_id, level), rows) in grouped {
        let field_ids: Vec<String> = {
            let set: BTreeSet<&str> = rows.iter().map(|(_, f)| f.as_str()).collect();
            set.into_iter().map(str::to_string).collect()
        };
        let mut assignment: Vec<Option<u32>> = vec![None; n];
        for (pi, field) in &rows {
            let fi = field_ids.binary_search_by(|x| x.as_str().cmp(field)).unwrap() as u32;
            match assignment[*pi as usize] {
                None => assignment[*pi as usize] = Some(fi),
                Some(prev) if prev == fi => {}
                Some(prev) => {
                    return Err(CorpusError::AssignmentConflict {
                        paper_id: papers[*pi as usize].paper_id.clone(),
                        scheme_id,
                        level,
                        first: field_ids[prev as usize].clone(),
                        second: field.clone(),
                    });
                }
            }
        }
        let assigned_total = assignment.iter().filter(|a| a.is_some()).count() as u64;
        let assigned_core =
            core.iter().filter(|&&i| assignment[i as usize].is_some()).count() as u64;
        let assigned_citing =
            citing.iter().filter(|&&i| assignment[i as usize].is_some()).count() as u64;
        coverage.push(CoverageEntry {
            scheme_id: scheme_id.clone(),
            level: level.clone(),
            fields: field_ids.len(),
            assigned_total,
            assigned_core,
            assigned_citing,
            fraction_total: assigned_total as f64 / n as f64,
            fraction_core: assigned_core as f64 / core.len() as f64,
            fraction_citing: assigned_citing as f64 / citing.len() as f64,
        });
        groupings.insert(
            (scheme_id.clone(), level.clone()),
            GroupingData { scheme_id, level, field_ids, assignment },
        );
    }

    let report = BuildReport {
        papers_total: n as u64,
        core_count: core.len() as u64,
        citing_count: citing.len() as u64,
        edges_input,
        edges_retained,
        edges_dropped_unknown_endpoint: dropped_unknown,
        edges_dropped_citing_outside_window: dropped_window,
        edges_dropped_self_loop: dropped_self,
        edges_deduplicated,
        assignments_dropped_unknown_paper: dropped_assign,
        coverage,
    };
    let corpus = Corpus {
        papers,
        index,
        window,
        core,
        citing,
        role,
        out_offsets,
        out_targets,
        in_offsets,
        in_sources,
        groupings,
    };
    Ok((corpus, report))
}

impl Corpus {
    pub fn window(&self) -> &WindowConfig {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn papers(&self) -> &[PaperRecord] {
        &self.papers
    }

    pub fn paper(&self, idx: usize) -> &PaperRecord {
        &self.papers[idx]
    }

    pub fn paper_idx(&self, id: &str) -> Option<usize> {
        self.index.get(id).map(|&i| i as usize)
    }

    /// Core paper indices, ascending (hence sorted by paper id).
    pub fn core_papers(&self) -> &[u32] {
        &self.core
    }

    pub fn citing_papers(&self) -> &[u32] {
        &self.citing
    }

    pub fn is_core(&self, idx: usize) -> bool {
        self.role[idx] == Role::Core
    }

    pub fn is_citing(&self, idx: usize) -> bool {
        self.role[idx] == Role::Citing
    }

    /// Cited-paper indices of retained edges out of `idx`, ascending.
    pub fn out_edges(&self, idx: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[idx] as usize..self.out_offsets[idx + 1] as usize]
    }

    /// Citing-paper indices of retained edges into `idx`, ascending.
    pub fn in_edges(&self, idx: usize) -> &[u32] {
        &self.in_sources[self.in_offsets[idx] as usize..self.in_offsets[idx + 1] as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    pub fn grouping(&self, scheme_id: &str, level: &str) -> Option<&GroupingData> {
        self.groupings.get(&(scheme_id.to_string(), level.to_string()))
    }

    pub fn groupings(&self) -> impl Iterator<Item = &GroupingData> {
        self.groupings.values()
    }
}

fn tsv_opt_u32(v: Option<u32>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serialize papers in the exact column layout the loader accepts.
pub fn papers_to_tsv(records: &[PaperRecord]) -> String {
    let mut s = String::from(PAPERS_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.paper_id,
            r.pub_year,
            r.journal_id,
            tsv_opt_u32(r.total_ref_count)
        ));
    }
    s
}

pub fn citations_to_tsv(edges: &[CitationEdge]) -> String {
    let mut s = String::from(CITATIONS_HEADER);
    s.push('\n');
    for e in edges {
        s.push_str(&format!("{}\t{}\n", e.citing_id, e.cited_id));
    }
    s
}

pub fn assignments_to_tsv(rows: &[FieldAssignment]) -> String {
    let mut s = String::from(FIELDS_HEADER);
    s.push('\n');
    for a in rows {
        s.push_str(&format!("{}\t{}\t{}\t{}\n", a.paper_id, a.scheme_id, a.level, a.field_id));
    }
    s
}
