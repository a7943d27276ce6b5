//! Citation field normalization toolkit.
//!
//! The crate covers one pipeline: load (or synthesize) a citation corpus
//! with a fixed citation window, compute source-side normalized indicators
//! for the cited-side papers, rescale them against field statistics under a
//! chosen grouping, quantify how strongly each indicator's top segment
//! deviates from proportional field representation, and diagnose where the
//! remaining deviation comes from (field growth and citation density).
//!
//! Modules follow the pipeline order:
//! * [`corpus`]: table loading, validation, and the immutable linked corpus.
//! * [`source_norm`]: citing-side weights and the eight base indicators.
//! * [`target_norm`]: field-relative ratio and z-score columns (24 total).
//! * [`bias_eval`]: top-segment field bias with a Monte Carlo null model.
//! * [`diagnostics`]: growth, density, and variance-explained analyses.
//! * [`synthgen`]: reproducible synthetic corpora from TOML specs.
//! * [`report`]: formatting policy and file-level report shapes.

pub mod bias_eval;
pub mod corpus;
pub mod diagnostics;
pub mod report;
pub mod source_norm;
pub mod synthgen;
pub mod target_norm;

#[cfg(test)]
pub(crate) mod testutil;

pub use bias_eval::{
    evaluate_bias, BiasEvaluation, BiasOptions, EvalGrouping, NullDistribution,
};
pub use corpus::{
    build_corpus, load_citations, load_field_assignments, load_papers, BuildReport, Corpus,
    LoadOptions, PaperFormat, WindowConfig,
};
pub use diagnostics::{compute_diagnostics, DiagnosticsResult};
pub use source_norm::{compute_citing_stats, source_indicators, CitingSideStats, MetricVector};
pub use synthgen::{generate, parse_config, verify_assumptions, SynthConfig, SynthOutput};
pub use target_norm::{metric_matrix, MetricColumn, MetricMatrix, ALL_METRICS};
