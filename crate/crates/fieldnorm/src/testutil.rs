//! Shared fixtures for unit tests.

use crate::corpus::{
    build_corpus, BuildReport, CitationEdge, Corpus, FieldAssignment, PaperRecord, WindowConfig,
};

pub fn paper(id: &str, year: i32, journal: &str, refs: Option<u32>) -> PaperRecord {
    PaperRecord {
        paper_id: id.to_string(),
        pub_year: year,
        journal_id: journal.to_string(),
        total_ref_count: refs,
    }
}

pub fn edge(citing: &str, cited: &str) -> CitationEdge {
    CitationEdge { citing_id: citing.to_string(), cited_id: cited.to_string() }
}

pub fn assign(paper: &str, scheme: &str, level: &str, field: &str) -> FieldAssignment {
    FieldAssignment {
        paper_id: paper.to_string(),
        scheme_id: scheme.to_string(),
        level: level.to_string(),
        field_id: field.to_string(),
    }
}

/// Two-field corpus with hand-computed indicator values.
///
/// Core papers c1..c4 (field A, 2020) and c5..c8 (field B, 2021); twelve
/// citing papers t1..t12 (2022) spread over journals J1..J3, four per
/// journal; one out-of-window paper x1 (2019). t2 has no declared reference
/// count, so its denominator falls back to its out-degree of 2.
pub fn toy_corpus() -> (Corpus, BuildReport) {
    let mut papers = vec![paper("x1", 2019, "cj", None)];
    for id in ["c1", "c2", "c3", "c4"] {
        papers.push(paper(id, 2020, "cj", None));
    }
    for id in ["c5", "c6", "c7", "c8"] {
        papers.push(paper(id, 2021, "cj", None));
    }
    let journals = ["J1", "J2", "J3"];
    let refs = [
        Some(4), // t1
        None,    // t2 (fallback)
        None,    // t3
        Some(6), // t4
        Some(1), // t5
        Some(2), // t6
        None,    // t7
        Some(2), // t8
        Some(10), // t9
        None,    // t10
        None,    // t11
        None,    // t12
    ];
    for k in 0..12 {
        let id = format!("t{}", k + 1);
        papers.push(paper(&id, 2022, journals[k / 4], refs[k]));
    }

    let edges = vec![
        edge("t1", "c1"),
        edge("t1", "c2"),
        edge("t2", "c1"),
        edge("t2", "x1"),
        edge("t4", "c3"),
        edge("t4", "c4"),
        edge("t4", "c5"),
        edge("t5", "c5"),
        edge("t6", "c6"),
        edge("t8", "c7"),
        edge("t8", "c8"),
        edge("t9", "c8"),
    ];

    let mut assignments = Vec::new();
    for id in ["c1", "c2", "c3", "c4"] {
        assignments.push(assign(id, "s", "l", "A"));
    }
    for id in ["c5", "c6", "c7", "c8"] {
        assignments.push(assign(id, "s", "l", "B"));
    }

    build_corpus(papers, edges, assignments, WindowConfig::default()).unwrap()
}

pub fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: expected {expected}, got {actual}"
    );
}
