//! Shared helpers for the acceptance suite.

use std::io::Write;

/// Prints the one-line verdict for a criterion and fails the test on `false`.
/// Writes to stdout directly so the line shows even when output is captured.
pub fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{tag}] {n:>2} {name}: {detail}");
    let _ = out.flush();
    drop(out);
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}
