//! Acceptance run: every verification suite at default bounds, grouped into
//! numbered criteria with one pass/fail line each.

use std::sync::Arc;

use mton_core::harness::{run_suite, suite, summary_table, Bounds, CheckReport, TransformCache};
use mton_core::laplace::ScanOptions;

struct Criterion {
    number: u32,
    title: &'static str,
    ids: fn(&CheckReport) -> bool,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        number: 1,
        title: "cardinalities",
        ids: |r| r.id.starts_with("card-"),
    },
    Criterion {
        number: 2,
        title: "independent-oracle enumeration",
        ids: |r| r.id.starts_with("oracle-enumeration"),
    },
    Criterion {
        number: 3,
        title: "block count mean and variance",
        ids: |r| r.suite == "thm16",
    },
    Criterion {
        number: 4,
        title: "blocks by size",
        ids: |r| r.suite == "thm17",
    },
    Criterion {
        number: 5,
        title: "Laplace recursions",
        ids: |r| r.suite == "laplace",
    },
    Criterion {
        number: 6,
        title: "proof-level lemmas",
        ids: |r| r.suite == "lemmas",
    },
    Criterion {
        number: 7,
        title: "outer blocks and interval pairs",
        ids: |r| r.suite == "thm110",
    },
    Criterion {
        number: 8,
        title: "area of pair partitions",
        ids: |r| r.suite == "thm111",
    },
    Criterion {
        number: 9,
        title: "Stirling numbers and cumulants",
        ids: |r| r.suite == "stirling" || r.suite == "cumulants",
    },
    Criterion {
        number: 10,
        title: "asymptotic diagnostics (float)",
        ids: |r| r.suite == "asymptotics",
    },
    Criterion {
        number: 11,
        title: "harness self-test",
        ids: |r| r.suite == "selftest",
    },
];

#[test]
fn acceptance() {
    let cache = Arc::new(TransformCache::new(ScanOptions::default()));
    let specs = suite("all", Bounds::DEFAULT, false, cache).unwrap();
    let reports = run_suite(&specs);
    println!("{}", summary_table(&reports));

    let mut failed = Vec::new();
    for c in CRITERIA {
        let mine: Vec<&CheckReport> = reports.iter().filter(|r| (c.ids)(r)).collect();
        let ok = !mine.is_empty() && mine.iter().all(|r| r.passed());
        println!(
            "criterion {:>2}: {} ({}, {} checks)",
            c.number,
            if ok { "PASS" } else { "FAIL" },
            c.title,
            mine.len()
        );
        if !ok {
            failed.push(c.number);
        }
    }
    let claimed = reports.iter().filter(|r| CRITERIA.iter().any(|c| (c.ids)(r))).count();
    assert_eq!(claimed, reports.len(), "every check belongs to a criterion");
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
