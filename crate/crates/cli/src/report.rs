//! Verification records and their two renderings: a console view with
//! runtimes and a persisted view without them, so repeated runs produce
//! byte-identical report files.

use std::fmt::Write as _;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub name: String,
    pub module: &'static str,
    pub expected: String,
    pub observed: String,
    pub tolerance: String,
    pub passed: bool,
    pub runtime: Duration,
}

impl CheckRecord {
    pub fn status(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerificationReport {
    pub records: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    pub fn failing(&self) -> Vec<&CheckRecord> {
        self.records.iter().filter(|r| !r.passed).collect()
    }

    /// Console rendering, one line per check, with runtimes.
    pub fn render_console(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(
                out,
                "[{}] {:<44} {:<10} expected {} observed {} tol {} ({:.1} ms)",
                r.status(),
                r.name,
                r.module,
                r.expected,
                r.observed,
                r.tolerance,
                r.runtime.as_secs_f64() * 1e3,
            );
        }
        let (pass, total) = (
            self.records.iter().filter(|r| r.passed).count(),
            self.records.len(),
        );
        let _ = writeln!(out, "{pass}/{total} checks passed");
        out
    }

    /// File rendering: no runtimes, stable across runs.
    pub fn render_file(&self) -> String {
        let mut out = String::from("name\tmodule\tstatus\texpected\tobserved\ttolerance\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.name,
                r.module,
                r.status(),
                r.expected,
                r.observed,
                r.tolerance
            );
        }
        out
    }
}

/// Helper to time a check body and wrap its verdict into a record.
pub fn timed_check<F>(name: &str, module: &'static str, body: F) -> CheckRecord
where
    F: FnOnce() -> (String, String, String, bool),
{
    let start = std::time::Instant::now();
    let (expected, observed, tolerance, passed) = body();
    CheckRecord {
        name: name.to_string(),
        module,
        expected,
        observed,
        tolerance,
        passed,
        runtime: start.elapsed(),
    }
}
