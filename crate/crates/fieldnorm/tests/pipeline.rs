//! End-to-end runs: generate a corpus, build it, compute indicators,
//! normalize, evaluate ranking bias, and run the diagnostics.

use fieldnorm::bias_eval::{evaluate_bias, BiasEvaluation, BiasOptions, EvalGrouping};
use fieldnorm::corpus::{build_corpus, WindowConfig};
use fieldnorm::diagnostics::compute_diagnostics;
use fieldnorm::source_norm::{compute_citing_stats, source_indicators};
use fieldnorm::synthgen::{generate, parse_config, verify_assumptions};
use fieldnorm::target_norm::metric_matrix;

fn find<'a>(evs: &'a [BiasEvaluation], metric: &str, z: f64) -> &'a BiasEvaluation {
    evs.iter()
        .find(|e| e.metric == metric && e.z == z)
        .unwrap_or_else(|| panic!("no evaluation for {metric} at z={z}"))
}

#[test]
fn generated_corpus_flows_through_whole_pipeline() {
    let config = parse_config(
        r#"
        core_years = [2020, 2021]
        citing_year = 2022
        cross_field_epsilon = 0.05
        ref_multiplier = 2.0
        journals_per_field = 2

        [[fields]]
        id = "alpha"
        super_field = "left"
        citation_mean = 2.0
        sigma = 1.0
        papers_per_year = { 2020 = 30, 2021 = 30, 2022 = 60 }
        active_refs = { mean = 6.0, min = 1 }

        [[fields]]
        id = "beta"
        super_field = "left"
        citation_mean = 8.0
        sigma = 1.0
        papers_per_year = { 2020 = 30, 2021 = 30, 2022 = 90 }
        active_refs = { mean = 6.0, min = 1 }

        [[fields]]
        id = "gamma"
        super_field = "right"
        citation_mean = 20.0
        sigma = 1.0
        papers_per_year = { 2020 = 30, 2021 = 30, 2022 = 120 }
        active_refs = { mean = 6.0, min = 1 }

        [[fields]]
        id = "delta"
        super_field = "right"
        citation_mean = 50.0
        sigma = 1.0
        papers_per_year = { 2020 = 30, 2021 = 30, 2022 = 150 }
        active_refs = { mean = 6.0, min = 1 }
        "#,
    )
    .unwrap();

    let out = generate(&config, 7).unwrap();
    assert_eq!(out.report.core_papers, 240);
    assert_eq!(out.report.citing_papers, 420);
    assert_eq!(out.report.dropped_refs_no_pool, 0);

    let window = WindowConfig::new(&[2020, 2021], 2022).unwrap();
    let (corpus, build) =
        build_corpus(out.papers, out.edges.clone(), out.assignments, window).unwrap();

    // A generated corpus is already clean: nothing may be dropped.
    assert_eq!(build.edges_input, out.edges.len() as u64);
    assert_eq!(build.edges_retained, out.edges.len() as u64);
    assert_eq!(build.edges_dropped_unknown_endpoint, 0);
    assert_eq!(build.edges_dropped_citing_outside_window, 0);
    assert_eq!(build.edges_dropped_self_loop, 0);
    assert_eq!(build.edges_deduplicated, 0);
    assert_eq!(build.assignments_dropped_unknown_paper, 0);
    let field_cov = build
        .coverage
        .iter()
        .find(|c| c.scheme_id == "synth" && c.level == "field")
        .unwrap();
    assert_eq!(field_cov.fields, 4);
    assert_eq!(field_cov.fraction_total, 1.0);
    assert_eq!(field_cov.fraction_core, 1.0);
    assert_eq!(field_cov.fraction_citing, 1.0);

    let stats = compute_citing_stats(&corpus);
    let s = &stats.summary;
    assert_eq!(s.citing_papers, 420);
    assert_eq!(s.fallback_r_count, 0);
    assert_eq!(s.zero_ref_count, 0);
    assert_eq!(s.a_exceeds_r_count, 0);
    assert_eq!(s.journals, 8);

    let base = source_indicators(&corpus, &stats);
    let sum_sc2: f64 = base[3].values.iter().sum();
    assert!((sum_sc2 - s.active_citing_papers as f64).abs() < 1e-9);

    let grouping = corpus.grouping("synth", "field").unwrap();
    let matrix = metric_matrix(&corpus, grouping, &base);
    assert_eq!(matrix.paper_ids.len(), 240);
    for col in &matrix.columns {
        assert!(col.values.iter().all(Option::is_some), "gap in {}", col.metric_id);
    }

    let opts = BiasOptions { z_values: vec![1.0, 5.0, 10.0], null_samples: 400, master_seed: 11 };
    let eval = EvalGrouping::from_corpus(&corpus, grouping);
    let evs = evaluate_bias(&matrix.paper_ids, &matrix.columns, &eval, &opts).unwrap();
    assert_eq!(evs.len(), 24 * 3);
    for ev in &evs {
        assert_eq!(ev.n_eval, 240);
        assert_eq!(ev.fields, 4);
        assert_eq!(ev.excluded_unassigned, 0);
        assert!(ev.d_m.is_finite() && ev.d_m >= 0.0);
        assert!(!ev.null.degenerate);
        let q = &ev.null.quantiles;
        assert!(ev.null.min <= q["0.25"]);
        assert!(q["0.25"] <= q["0.50"] && q["0.50"] <= q["0.75"]);
        assert!(q["0.75"] <= ev.null.max);
        assert!(ev.null.ci_low <= ev.null.ci_high && ev.null.ci_high <= ev.null.max);
        assert!(ev.null.p95 <= ev.null.max);
    }

    // One null simulation per top share, shared verbatim by all 24 metrics.
    for &z in &[1.0, 5.0, 10.0] {
        let shared = &find(&evs, "c", z).null;
        for ev in evs.iter().filter(|e| e.z == z) {
            assert_eq!(&ev.null, shared, "{} at z={z} has its own null", ev.metric);
        }
    }

    // The log transform is rank-preserving, so the observed distance of a
    // raw column and its _ln twin must agree bit for bit.
    for &z in &[1.0, 5.0, 10.0] {
        for m in ["c", "sc1", "sc2", "sc3"] {
            let raw = find(&evs, m, z).d_m;
            let ln = find(&evs, &format!("{m}_ln"), z).d_m;
            assert_eq!(raw.to_bits(), ln.to_bits(), "{m} vs {m}_ln at z={z}");
        }
    }

    // Coarser evaluation level: two super fields.
    let sgrouping = corpus.grouping("synth", "super").unwrap();
    let seval = EvalGrouping::from_corpus(&corpus, sgrouping);
    let sevs = evaluate_bias(&matrix.paper_ids, &matrix.columns, &seval, &opts).unwrap();
    assert!(sevs.iter().all(|e| e.fields == 2 && e.n_eval == 240));

    let diag = compute_diagnostics(&corpus, grouping, &stats, &base[4].values).unwrap();
    assert_eq!(diag.fields.len(), 4);
    // Fields come back in id order: alpha, beta, delta, gamma.
    for (fd, (id, expect_citing)) in diag
        .fields
        .iter()
        .zip([("alpha", 60.0), ("beta", 90.0), ("delta", 150.0), ("gamma", 120.0)])
    {
        assert_eq!(fd.field_id, id);
        assert_eq!(fd.papers_per_core_year, vec![30, 30]);
        assert_eq!(fd.papers_citing_year as f64, expect_citing);
        assert_eq!(fd.growth_rate.unwrap(), expect_citing / 60.0);
        assert!(fd.density_total > 0.0);
        assert!(fd.mean_sc3.unwrap() > 0.0);
        assert!(fd.mean_density_ratio.is_some());
        assert!(fd.flags.is_empty());
    }

    let assumptions = verify_assumptions(&corpus, &stats);
    assert!(assumptions.inactive_journals.is_empty());
    assert!(
        (assumptions.cross_field_fraction - 0.05).abs() < 0.03,
        "cross-field fraction {} far from the configured rate",
        assumptions.cross_field_fraction
    );
}

#[test]
fn isolated_fields_with_constant_refs_tie_mean_sc3_to_growth() {
    // With no cross-field citing, one journal per field, and every citing
    // paper active, each journal's active share is 1, so a field's sc3 mass
    // equals its citing paper count and mean sc3 equals the growth rate.
    let config = parse_config(
        r#"
        core_years = [2020, 2021]
        citing_year = 2022
        cross_field_epsilon = 0.0
        journals_per_field = 1

        [[fields]]
        id = "g1"
        citation_mean = 4.0
        sigma = 0.5
        papers_per_year = { 2020 = 20, 2021 = 20, 2022 = 40 }
        active_refs = { constant = 5 }

        [[fields]]
        id = "g2"
        citation_mean = 4.0
        sigma = 0.5
        papers_per_year = { 2020 = 20, 2021 = 20, 2022 = 80 }
        active_refs = { constant = 5 }

        [[fields]]
        id = "g3"
        citation_mean = 4.0
        sigma = 0.5
        papers_per_year = { 2020 = 20, 2021 = 20, 2022 = 120 }
        active_refs = { constant = 5 }

        [[fields]]
        id = "g4"
        citation_mean = 4.0
        sigma = 0.5
        papers_per_year = { 2020 = 20, 2021 = 20, 2022 = 160 }
        active_refs = { constant = 5 }
        "#,
    )
    .unwrap();

    let out = generate(&config, 31).unwrap();
    assert!(out.report.per_field.iter().all(|f| f.refs_cross_field == 0));

    let window = WindowConfig::new(&[2020, 2021], 2022).unwrap();
    let (corpus, _) =
        build_corpus(out.papers, out.edges, out.assignments, window).unwrap();
    let stats = compute_citing_stats(&corpus);
    let base = source_indicators(&corpus, &stats);
    let grouping = corpus.grouping("synth", "field").unwrap();
    let diag = compute_diagnostics(&corpus, grouping, &stats, &base[4].values).unwrap();

    for (fd, growth) in diag.fields.iter().zip([1.0, 2.0, 3.0, 4.0]) {
        assert_eq!(fd.growth_rate.unwrap(), growth);
        assert!(
            (fd.mean_sc3.unwrap() - growth).abs() < 1e-9,
            "field {}: mean sc3 {} vs growth {growth}",
            fd.field_id,
            fd.mean_sc3.unwrap()
        );
        // Everyone cites only their own field, so the ambient density is the
        // field's own.
        assert!((fd.mean_density_ratio.unwrap() - 1.0).abs() < 1e-12);
    }
    let fit = diag.growth_analysis.fit;
    assert!((fit.slope - 1.0).abs() < 1e-6, "slope {}", fit.slope);
    assert!(fit.intercept.abs() < 1e-6, "intercept {}", fit.intercept);
    assert!((fit.r2 - 1.0).abs() < 1e-9);
    assert!((diag.growth_analysis.pearson.unwrap() - 1.0).abs() < 1e-9);
    assert!(!diag.growth_analysis.constant_growth);
    // All density ratios are 1: the residual correlation has no spread to
    // work with and must stay empty rather than fabricate a value.
    assert!(diag.residual_density.pearson.is_none());
    assert_eq!(diag.residual_density.n_fields, 4);

    let assumptions = verify_assumptions(&corpus, &stats);
    assert_eq!(assumptions.cross_field_fraction, 0.0);
}

#[test]
fn field_normalization_shrinks_planted_density_skew() {
    // Five equal-size fields whose citing sides differ only in reference
    // density: raw citation counts then rank the dense fields on top, while
    // the field-relative columns should look close to a uniform draw.
    let mut toml = String::from(
        "core_years = [2020, 2021]\nciting_year = 2022\ncross_field_epsilon = 0.0\njournals_per_field = 1\n",
    );
    for (id, mean_refs) in [("fa", 3.0), ("fb", 6.0), ("fc", 12.0), ("fd", 24.0), ("fe", 48.0)] {
        toml.push_str(&format!(
            r#"
            [[fields]]
            id = "{id}"
            citation_mean = 5.0
            sigma = 1.0
            papers_per_year = {{ 2020 = 30, 2021 = 30, 2022 = 120 }}
            active_refs = {{ mean = {mean_refs}, min = 1 }}
            "#
        ));
    }
    let config = parse_config(&toml).unwrap();
    let out = generate(&config, 9).unwrap();
    let window = WindowConfig::new(&[2020, 2021], 2022).unwrap();
    let (corpus, _) =
        build_corpus(out.papers, out.edges, out.assignments, window).unwrap();
    let stats = compute_citing_stats(&corpus);
    let base = source_indicators(&corpus, &stats);
    let grouping = corpus.grouping("synth", "field").unwrap();
    let matrix = metric_matrix(&corpus, grouping, &base);

    let opts = BiasOptions { z_values: vec![10.0], null_samples: 2000, master_seed: 5 };
    let eval = EvalGrouping::from_corpus(&corpus, grouping);
    let evs = evaluate_bias(&matrix.paper_ids, &matrix.columns, &eval, &opts).unwrap();

    let raw = find(&evs, "c", 10.0);
    let ratio = find(&evs, "R_c", 10.0);
    let zscore = find(&evs, "Z_c", 10.0);
    assert!(
        raw.d_m > raw.null.ci_high,
        "planted skew not detected: d={} ci_high={}",
        raw.d_m,
        raw.null.ci_high
    );
    assert!(
        ratio.d_m < 0.5 * raw.d_m,
        "ratio column did not shrink the skew: {} vs {}",
        ratio.d_m,
        raw.d_m
    );
    assert!(
        zscore.d_m < 0.5 * raw.d_m,
        "z column did not shrink the skew: {} vs {}",
        zscore.d_m,
        raw.d_m
    );
}
