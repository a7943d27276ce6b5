//! Command-line front end for the citation normalization pipeline.
//!
//! One subcommand per pipeline stage, with file handoff between stages so the
//! expensive steps can be cached and re-run independently:
//!
//! ```text
//! synth   scenario.toml      -> papers.tsv citations.tsv fields.tsv synth_report.json
//! ingest  input tables       -> run_report.json
//! metrics input tables       -> metrics.tsv field_stats.json run_report.json
//! bias    metrics.tsv+fields -> bias_report.json bias_plot.<scheme>.<level>.tsv
//! diag    input tables       -> diagnostics.tsv diagnostics.json
//! report  output dir         -> report.json (bundle of the JSON artifacts)
//! ```
//!
//! Every command is deterministic given its flags and seed; `--threads` only
//! changes how fast the answer arrives. Exit codes: 0 success, 1 internal
//! error, 2 input or validation error. Errors are printed to stderr as a JSON
//! list so driving scripts can parse them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fieldnorm::bias_eval::{evaluate_bias, BiasError, BiasOptions, EvalGrouping};
use fieldnorm::corpus::{
    assignments_to_tsv, build_corpus, citations_to_tsv, load_citations,
    load_field_assignments, load_papers, papers_to_tsv, AssignmentsLoad, BadRow,
    CitationsLoad, Corpus, CorpusError, LoadOptions, PaperFormat, PapersLoad,
    WindowConfig, Year,
};
use fieldnorm::diagnostics::{compute_diagnostics, diagnostics_tsv, DiagnosticsError};
use fieldnorm::report::{
    bias_plot_tsv, metrics_to_tsv, parse_metrics_tsv, to_json_file, BiasReportFile,
    DiagnosticsReportFile, FieldStatsReport, RunReport, SynthReportFile, TableError,
    FORMAT_VERSION,
};
use fieldnorm::report::InputSummary;
use fieldnorm::source_norm::{compute_citing_stats, source_indicators, CitingSideStats};
use fieldnorm::synthgen::{generate, parse_config_file, resolve_seed, SynthError};
use fieldnorm::target_norm::{metric_matrix, MetricMatrix};

#[derive(Parser)]
#[command(
    name = "fieldnorm",
    version,
    about = "Field-normalized citation indicators and ranking-bias evaluation"
)]
struct Cli {
    /// Worker thread cap (0 = one per CPU). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and build the corpus, writing a run report
    Ingest(IngestCmd),
    /// Compute the 24-column metric matrix and per-field statistics
    Metrics(MetricsCmd),
    /// Evaluate ranking bias against a Monte Carlo null model
    Bias(BiasCmd),
    /// Per-field growth and density diagnostics
    Diag(DiagCmd),
    /// Generate a synthetic corpus from a scenario file
    Synth(SynthCmd),
    /// Bundle the JSON artifacts in an output directory into one file
    Report(ReportCmd),
}

#[derive(Args, Clone)]
struct InputOpts {
    /// Paper records (TSV or JSONL)
    #[arg(long, value_name = "FILE")]
    papers: PathBuf,
    /// Citation edge list (TSV)
    #[arg(long, value_name = "FILE")]
    citations: PathBuf,
    /// Field assignment table (TSV)
    #[arg(long, value_name = "FILE")]
    fields: PathBuf,
    /// Paper file format
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    /// Publication years forming the core set
    #[arg(long, value_delimiter = ',', default_values_t = [2020, 2021], value_name = "YEAR,..")]
    core_years: Vec<Year>,
    /// Publication year of the citing set
    #[arg(long, default_value_t = 2022, value_name = "YEAR")]
    citing_year: Year,
    /// Skip malformed input rows (reported as warnings) instead of failing
    #[arg(long)]
    skip_bad_rows: bool,
}

#[derive(Args)]
struct IngestCmd {
    #[command(flatten)]
    input: InputOpts,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsCmd {
    #[command(flatten)]
    input: InputOpts,
    /// Normalization grouping
    #[arg(long, value_parser = parse_grouping, default_value = "cwts:micro", value_name = "SCHEME:LEVEL")]
    grouping: Grouping,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct BiasCmd {
    /// Metric matrix from the metrics stage (default: <out>/metrics.tsv)
    #[arg(long, value_name = "FILE")]
    metrics: Option<PathBuf>,
    /// Field assignment table (TSV)
    #[arg(long, value_name = "FILE")]
    fields: PathBuf,
    /// Evaluation grouping, repeatable
    #[arg(long = "eval-grouping", value_parser = parse_grouping, value_name = "SCHEME:LEVEL")]
    eval_grouping: Vec<Grouping>,
    /// Fallback evaluation grouping when no --eval-grouping is given
    #[arg(long, value_parser = parse_grouping, default_value = "cwts:micro", value_name = "SCHEME:LEVEL")]
    grouping: Grouping,
    /// Top shares in percent, each in (0, 100); repeatable
    #[arg(long = "z", value_delimiter = ',', default_values_t = [1.0, 5.0, 10.0], value_name = "PCT,..")]
    z: Vec<f64>,
    /// Monte Carlo samples per null distribution
    #[arg(long, default_value_t = 10_000, value_name = "S")]
    null_samples: u64,
    /// Master seed; every simulation derives its own stream from it
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagCmd {
    #[command(flatten)]
    input: InputOpts,
    /// Grouping whose fields are diagnosed
    #[arg(long, value_parser = parse_grouping, default_value = "cwts:micro", value_name = "SCHEME:LEVEL")]
    grouping: Grouping,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthCmd {
    /// Scenario configuration (TOML)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Generator seed; a seed inside the scenario file wins
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportCmd {
    /// Directory holding the artifacts of earlier stages
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Jsonl,
}

impl Format {
    fn as_paper_format(self) -> PaperFormat {
        match self {
            Format::Tsv => PaperFormat::Tsv,
            Format::Jsonl => PaperFormat::Jsonl,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Format::Tsv => "tsv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Clone, Debug)]
struct Grouping {
    scheme: String,
    level: String,
}

impl Grouping {
    fn label(&self) -> String {
        format!("{}:{}", self.scheme, self.level)
    }
}

fn parse_grouping(s: &str) -> Result<Grouping, String> {
    match s.split_once(':') {
        Some((scheme, level)) if !scheme.is_empty() && !level.is_empty() => {
            Ok(Grouping { scheme: scheme.to_string(), level: level.to_string() })
        }
        _ => Err(format!("expected SCHEME:LEVEL, got {s:?}")),
    }
}

#[derive(Debug)]
enum CliError {
    /// Problems in the inputs or flags; the caller can fix them. Exit 2.
    Validation(Vec<String>),
    /// Failures on our side of the contract (output IO, pool setup). Exit 1.
    Internal(Vec<String>),
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(vec![msg.into()])
    }

    fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(vec![msg.into()])
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<BiasError> for CliError {
    fn from(e: BiasError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        CliError::validation(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
        if let Err(e) = pool {
            return fail(CliError::internal(format!("cannot size the thread pool: {e}")));
        }
    }
    let result = match cli.command {
        Command::Ingest(cmd) => cmd_ingest(cmd),
        Command::Metrics(cmd) => cmd_metrics(cmd),
        Command::Bias(cmd) => cmd_bias(cmd),
        Command::Diag(cmd) => cmd_diag(cmd),
        Command::Synth(cmd) => cmd_synth(cmd),
        Command::Report(cmd) => cmd_report(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    let (kind, msgs, code) = match &e {
        CliError::Validation(m) => ("validation", m, 2u8),
        CliError::Internal(m) => ("internal", m, 1u8),
    };
    let errors: Vec<serde_json::Value> =
        msgs.iter().map(|m| serde_json::json!({ "kind": kind, "message": m })).collect();
    eprintln!("{}", serde_json::json!({ "errors": errors }));
    ExitCode::from(code)
}

/// Create the output directory and return it; a path we cannot create is the
/// caller's problem, not ours.
fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| {
        CliError::validation(format!("output directory {}: {e}", out.display()))
    })
}

fn write_artifact(out: &Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = out.join(name);
    fs::write(&path, content)
        .map_err(|e| CliError::internal(format!("writing {}: {e}", path.display())))?;
    println!("wrote {name}");
    Ok(())
}

/// Everything the corpus-consuming commands share: loaded tables, the built
/// corpus, and the report fragments describing the load.
struct LoadedCorpus {
    corpus: Corpus,
    report: RunReport,
}

fn bad_row_warnings(which: &str, rows: &[BadRow], warnings: &mut Vec<String>) {
    const SHOWN: usize = 50;
    for r in rows.iter().take(SHOWN) {
        warnings.push(format!("{which}: line {}: {}", r.line, r.reason));
    }
    if rows.len() > SHOWN {
        warnings.push(format!("{which}: {} more rows skipped", rows.len() - SHOWN));
    }
}

fn load_and_build(input: &InputOpts, command: &str) -> Result<LoadedCorpus, CliError> {
    let window = WindowConfig::new(&input.core_years, input.citing_year)?;
    let opts = LoadOptions { skip_bad_rows: input.skip_bad_rows, ..LoadOptions::default() };

    let PapersLoad { records, skipped: p_skipped, warnings: p_warn } =
        load_papers(&input.papers, input.format.as_paper_format(), &opts)?;
    let CitationsLoad { edges, duplicates: c_dup, skipped: c_skipped, warnings: c_warn } =
        load_citations(&input.citations, &opts)?;
    let AssignmentsLoad { rows, duplicates: a_dup, skipped: a_skipped, warnings: a_warn } =
        load_field_assignments(&input.fields, &opts)?;

    let inputs = InputSummary {
        papers_loaded: records.len() as u64,
        papers_skipped: p_skipped.len() as u64,
        citations_loaded: edges.len() as u64,
        citations_skipped: c_skipped.len() as u64,
        citation_duplicates: c_dup,
        assignments_loaded: rows.len() as u64,
        assignments_skipped: a_skipped.len() as u64,
        assignment_duplicates: a_dup,
    };
    let mut warnings = Vec::new();
    warnings.extend(p_warn);
    warnings.extend(c_warn);
    warnings.extend(a_warn);
    bad_row_warnings("papers", &p_skipped, &mut warnings);
    bad_row_warnings("citations", &c_skipped, &mut warnings);
    bad_row_warnings("fields", &a_skipped, &mut warnings);

    let (corpus, build) = build_corpus(records, edges, rows, window.clone())?;
    let report = RunReport {
        format_version: FORMAT_VERSION,
        command: command.to_string(),
        config: input_config_json(input),
        window,
        inputs,
        build,
        source_norm: None,
        warnings,
    };
    Ok(LoadedCorpus { corpus, report })
}

fn input_config_json(input: &InputOpts) -> serde_json::Value {
    serde_json::json!({
        "papers": input.papers.display().to_string(),
        "citations": input.citations.display().to_string(),
        "fields": input.fields.display().to_string(),
        "format": input.format.name(),
        "core_years": input.core_years,
        "citing_year": input.citing_year,
        "skip_bad_rows": input.skip_bad_rows,
    })
}

fn lookup_grouping<'c>(corpus: &'c Corpus, g: &Grouping) -> Result<&'c fieldnorm::corpus::GroupingData, CliError> {
    corpus.grouping(&g.scheme, &g.level).ok_or_else(|| {
        let available: Vec<String> = corpus
            .groupings()
            .map(|gd| format!("{}:{}", gd.scheme_id, gd.level))
            .collect();
        CliError::validation(format!(
            "grouping {} not present in the field table; available: {}",
            g.label(),
            if available.is_empty() { "none".to_string() } else { available.join(", ") }
        ))
    })
}

/// Shared tail of `metrics` and `diag`: indicators plus the metric matrix.
fn compute_matrix(
    corpus: &Corpus,
    grouping: &fieldnorm::corpus::GroupingData,
) -> (CitingSideStats, Vec<fieldnorm::source_norm::MetricVector>, MetricMatrix) {
    let stats = compute_citing_stats(corpus);
    let base = source_indicators(corpus, &stats);
    let matrix = metric_matrix(corpus, grouping, &base);
    (stats, base, matrix)
}

fn cmd_ingest(cmd: IngestCmd) -> Result<(), CliError> {
    ensure_out_dir(&cmd.out)?;
    let loaded = load_and_build(&cmd.input, "ingest")?;
    let b = &loaded.report.build;
    println!(
        "papers={} core={} citing={} edges_retained={} edges_dropped={}",
        b.papers_total,
        b.core_count,
        b.citing_count,
        b.edges_retained,
        b.edges_input - b.edges_retained
    );
    write_artifact(&cmd.out, "run_report.json", &to_json_file(&loaded.report))
}

fn cmd_metrics(cmd: MetricsCmd) -> Result<(), CliError> {
    ensure_out_dir(&cmd.out)?;
    let mut loaded = load_and_build(&cmd.input, "metrics")?;
    let grouping = lookup_grouping(&loaded.corpus, &cmd.grouping)?;
    let (stats, _base, matrix) = compute_matrix(&loaded.corpus, grouping);

    let field_stats = FieldStatsReport {
        format_version: FORMAT_VERSION,
        scheme_id: matrix.scheme_id.clone(),
        level: matrix.level.clone(),
        metrics: matrix.field_stats.clone(),
    };
    let mut config = input_config_json(&cmd.input);
    config["grouping"] = serde_json::Value::String(cmd.grouping.label());
    loaded.report.config = config;
    loaded.report.source_norm = Some(stats.summary.clone());
    println!("papers={} metrics={}", matrix.paper_ids.len(), matrix.columns.len());

    write_artifact(&cmd.out, "metrics.tsv", &metrics_to_tsv(&matrix.paper_ids, &matrix.columns))?;
    write_artifact(&cmd.out, "field_stats.json", &to_json_file(&field_stats))?;
    write_artifact(&cmd.out, "run_report.json", &to_json_file(&loaded.report))
}

/// File-name-safe version of a scheme or level identifier.
fn sanitize(part: &str) -> String {
    part.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}

fn cmd_bias(cmd: BiasCmd) -> Result<(), CliError> {
    ensure_out_dir(&cmd.out)?;
    for &z in &cmd.z {
        if !(z > 0.0 && z < 100.0) || !z.is_finite() {
            return Err(CliError::validation(format!(
                "--z must lie strictly between 0 and 100, got {z}"
            )));
        }
    }
    let metrics_path = cmd.metrics.clone().unwrap_or_else(|| cmd.out.join("metrics.tsv"));
    let text = fs::read_to_string(&metrics_path).map_err(|e| {
        CliError::validation(format!("metric matrix {}: {e}", metrics_path.display()))
    })?;
    let (paper_ids, columns) = parse_metrics_tsv(&text)?;
    let opts = LoadOptions::default();
    let assignments = load_field_assignments(&cmd.fields, &opts)?;

    let groupings: Vec<Grouping> = if cmd.eval_grouping.is_empty() {
        vec![cmd.grouping.clone()]
    } else {
        cmd.eval_grouping.clone()
    };
    let bias_opts = BiasOptions {
        z_values: cmd.z.clone(),
        null_samples: cmd.null_samples,
        master_seed: cmd.seed,
    };

    let mut evaluations = Vec::new();
    for g in &groupings {
        let eval =
            EvalGrouping::from_assignments(&paper_ids, &assignments.rows, &g.scheme, &g.level);
        let evs = evaluate_bias(&paper_ids, &columns, &eval, &bias_opts).map_err(|e| {
            CliError::validation(format!("evaluation grouping {}: {e}", g.label()))
        })?;
        let plot_name =
            format!("bias_plot.{}.{}.tsv", sanitize(&g.scheme), sanitize(&g.level));
        write_artifact(&cmd.out, &plot_name, &bias_plot_tsv(&evs))?;
        evaluations.extend(evs);
    }
    let within = evaluations.iter().filter(|e| e.within_ci).count();
    println!("evaluations={} within_ci={within}", evaluations.len());

    let report = BiasReportFile {
        format_version: FORMAT_VERSION,
        config: serde_json::json!({
            "metrics": metrics_path.display().to_string(),
            "fields": cmd.fields.display().to_string(),
            "eval_groupings": groupings.iter().map(Grouping::label).collect::<Vec<_>>(),
            "z": cmd.z,
            "null_samples": cmd.null_samples,
            "seed": cmd.seed,
        }),
        master_seed: cmd.seed,
        null_samples: cmd.null_samples,
        evaluations,
    };
    write_artifact(&cmd.out, "bias_report.json", &to_json_file(&report))
}

fn cmd_diag(cmd: DiagCmd) -> Result<(), CliError> {
    ensure_out_dir(&cmd.out)?;
    let loaded = load_and_build(&cmd.input, "diag")?;
    let grouping = lookup_grouping(&loaded.corpus, &cmd.grouping)?;
    let stats = compute_citing_stats(&loaded.corpus);
    let base = source_indicators(&loaded.corpus, &stats);
    // Index 4 is the raw dual-side indicator column (see BASE_METRICS).
    let diagnostics = compute_diagnostics(&loaded.corpus, grouping, &stats, &base[4].values)?;
    println!("fields={}", diagnostics.fields.len());

    let mut config = input_config_json(&cmd.input);
    config["grouping"] = serde_json::Value::String(cmd.grouping.label());
    let file = DiagnosticsReportFile {
        format_version: FORMAT_VERSION,
        config,
        diagnostics,
    };
    write_artifact(&cmd.out, "diagnostics.tsv", &diagnostics_tsv(&file.diagnostics))?;
    write_artifact(&cmd.out, "diagnostics.json", &to_json_file(&file))
}

fn cmd_synth(cmd: SynthCmd) -> Result<(), CliError> {
    ensure_out_dir(&cmd.out)?;
    let config = parse_config_file(&cmd.config)?;
    let seed = resolve_seed(&config, cmd.seed);
    let output = generate(&config, seed)?;
    println!(
        "papers={} edges={} seed={seed}",
        output.report.papers, output.report.edges
    );

    write_artifact(&cmd.out, "papers.tsv", &papers_to_tsv(&output.papers))?;
    write_artifact(&cmd.out, "citations.tsv", &citations_to_tsv(&output.edges))?;
    write_artifact(&cmd.out, "fields.tsv", &assignments_to_tsv(&output.assignments))?;
    let file = SynthReportFile {
        format_version: FORMAT_VERSION,
        config: serde_json::json!({
            "config": cmd.config.display().to_string(),
            "seed_flag": cmd.seed,
            "seed_used": seed,
            "scenario": config,
        }),
        report: output.report,
    };
    write_artifact(&cmd.out, "synth_report.json", &to_json_file(&file))
}

/// Artifacts `report` knows how to bundle, keyed by their section name.
const BUNDLE_SECTIONS: [(&str, &str); 5] = [
    ("run_report", "run_report.json"),
    ("field_stats", "field_stats.json"),
    ("bias_report", "bias_report.json"),
    ("diagnostics", "diagnostics.json"),
    ("synth_report", "synth_report.json"),
];

fn cmd_report(cmd: ReportCmd) -> Result<(), CliError> {
    let mut sections = serde_json::Map::new();
    for (section, name) in BUNDLE_SECTIONS {
        let path = cmd.out.join(name);
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: invalid JSON: {e}", path.display())))?;
        sections.insert(section.to_string(), value);
    }
    if sections.is_empty() {
        return Err(CliError::validation(format!(
            "no report artifacts found in {}",
            cmd.out.display()
        )));
    }
    println!("sections={}", sections.len());
    let bundle = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "config": { "out": cmd.out.display().to_string() },
        "sections": sections,
    });
    let mut text = serde_json::to_string_pretty(&bundle)
        .map_err(|e| CliError::internal(format!("bundling report: {e}")))?;
    text.push('\n');
    write_artifact(&cmd.out, "report.json", &text)
}
