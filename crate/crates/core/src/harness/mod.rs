//! Identity-verification suites: each check probes one identity at every
//! `n` in its range and reports the first failure, if any.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

mod cache;
mod suites;

pub use cache::TransformCache;
pub use suites::{suite, suite_names, Bounds, SUITES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float { tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// A failing probe: the offending rank within level `n`, if the check scans
/// nodes, and a description of the mismatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub rank: Option<u128>,
    pub detail: String,
}

impl Failure {
    pub fn new(detail: impl Into<String>) -> Self {
        Failure {
            rank: None,
            detail: detail.into(),
        }
    }

    pub fn at_rank(rank: u128, detail: impl Into<String>) -> Self {
        Failure {
            rank: Some(rank),
            detail: detail.into(),
        }
    }
}

/// Values echoed by a passing probe.
pub type ProbeResult = Result<Vec<String>, Failure>;

pub type Probe = Arc<dyn Fn(usize) -> ProbeResult + Send + Sync>;

#[derive(Clone)]
pub struct CheckSpec {
    pub id: String,
    pub suite: &'static str,
    pub description: String,
    /// Smallest `n` probed.
    pub lo: usize,
    /// Largest `n` probed.
    pub bound: usize,
    pub mode: Mode,
    /// Parallelism hint for scans inside the probe.
    pub shards: usize,
    pub probe: Probe,
}

impl std::fmt::Debug for CheckSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CheckSpec")
            .field("id", &self.id)
            .field("lo", &self.lo)
            .field("bound", &self.bound)
            .field("mode", &self.mode)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub id: String,
    pub suite: String,
    pub description: String,
    pub status: Status,
    pub mode: Mode,
    pub lo: usize,
    pub bound: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub values: Vec<String>,
    pub elapsed_ms: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// JSON line without the timing field, for byte-stable comparisons.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().unwrap().remove("elapsed_ms");
        v.to_string()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("report {0} has nothing to minimize")]
    NotMinimizable(String),
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
}

const MAX_VALUES: usize = 16;

fn push_values(all: &mut Vec<String>, n: usize, vals: Vec<String>, dropped: &mut usize) {
    for v in vals {
        if all.len() < MAX_VALUES {
            all.push(format!("n={n}: {v}"));
        } else {
            *dropped += 1;
        }
    }
}

/// Probes `n = lo..=bound` in order and stops at the first failure.
pub fn run_check(spec: &CheckSpec) -> CheckReport {
    let start = Instant::now();
    let mut values = Vec::new();
    let mut dropped = 0;
    let mut witness = None;
    for n in spec.lo..=spec.bound {
        match (spec.probe)(n) {
            Ok(v) => push_values(&mut values, n, v, &mut dropped),
            Err(f) => {
                witness = Some(Witness {
                    n,
                    rank: f.rank.map(|r| r.to_string()),
                    detail: f.detail,
                });
                break;
            }
        }
    }
    if dropped > 0 {
        values.push(format!("... {dropped} more"));
    }
    CheckReport {
        id: spec.id.clone(),
        suite: spec.suite.to_string(),
        description: spec.description.clone(),
        status: if witness.is_some() { Status::Fail } else { Status::Pass },
        mode: spec.mode,
        lo: spec.lo,
        bound: spec.bound,
        witness,
        values,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Runs the checks concurrently; reports come back in spec order.
pub fn run_suite(specs: &[CheckSpec]) -> Vec<CheckReport> {
    specs.par_iter().map(run_check).collect()
}

/// Re-probes every `n` from `spec.lo` up to the witness and returns the
/// report for the smallest failing `n`. Probes return the smallest failing
/// rank of a level, so the witness is minimal in both coordinates.
pub fn counterexample_minimize(spec: &CheckSpec, report: &CheckReport) -> Result<CheckReport, HarnessError> {
    let Some(w) = report.witness.as_ref().filter(|_| !report.passed()) else {
        return Err(HarnessError::NotMinimizable(report.id.clone()));
    };
    let start = Instant::now();
    for n in spec.lo..=w.n {
        if let Err(f) = (spec.probe)(n) {
            let mut out = report.clone();
            out.witness = Some(Witness {
                n,
                rank: f.rank.map(|r| r.to_string()),
                detail: f.detail,
            });
            out.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            return Ok(out);
        }
    }
    Err(HarnessError::NotMinimizable(report.id.clone()))
}

/// Human-readable summary table.
pub fn summary_table(reports: &[CheckReport]) -> String {
    let width = reports.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:<6}  {:>10}  detail", "id", "status", "ms");
    for r in reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        let detail = match &r.witness {
            Some(w) => match &w.rank {
                Some(rank) => format!("n={} rank={}: {}", w.n, rank, w.detail),
                None => format!("n={}: {}", w.n, w.detail),
            },
            None => r.description.clone(),
        };
        let _ = writeln!(s, "{:<width$}  {:<6}  {:>10.1}  {}", r.id, status, r.elapsed_ms, detail);
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    let _ = writeln!(s, "{} checks, {} failed", reports.len(), failed);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(fails_from: usize) -> CheckSpec {
        CheckSpec {
            id: "toy".into(),
            suite: "toy",
            description: "fails from some n on".into(),
            lo: 1,
            bound: 10,
            mode: Mode::Exact,
            shards: 1,
            probe: Arc::new(move |n| {
                if n >= fails_from {
                    Err(Failure::at_rank(n as u128, format!("n={n}")))
                } else {
                    Ok(vec![format!("{n}")])
                }
            }),
        }
    }

    #[test]
    fn run_and_minimize() {
        let s = spec(4);
        let r = run_check(&s);
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.witness.as_ref().unwrap().n, 4);
        assert_eq!(r.values.len(), 3);
        let mut seeded = r.clone();
        seeded.witness.as_mut().unwrap().n = 9;
        let m = counterexample_minimize(&s, &seeded).unwrap();
        assert_eq!(m.witness.unwrap().n, 4);
    }

    #[test]
    fn passing_report_is_not_minimizable() {
        let s = spec(100);
        let r = run_check(&s);
        assert!(r.passed());
        assert!(matches!(counterexample_minimize(&s, &r), Err(HarnessError::NotMinimizable(_))));
    }

    #[test]
    fn canonical_json_omits_timing() {
        let r = run_check(&spec(3));
        let j = r.canonical_json();
        assert!(!j.contains("elapsed_ms"));
        assert!(j.contains(r#""status":"fail""#));
        assert!(r.to_json_line().contains("elapsed_ms"));
    }
}
