//! Plain-text run summary.

use std::fmt::Write;

use crate::output::RunManifest;

fn yes_no(ok: bool) -> &'static str {
    if ok {
        "yes"
    } else {
        "no"
    }
}

/// One-page summary of a run: bunching flags, verdicts and the gate table.
///
/// Timings are left out so that the text, like the CSVs, depends only on the config.
pub fn emit_report(manifest: &RunManifest) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "holonomy-lab {}  command: {}  seed: {}", manifest.version, manifest.command, manifest.seed);
    if manifest.timings.is_empty() && manifest.gates.is_empty() {
        let _ = writeln!(s, "no stages executed");
        return s;
    }
    if let Some(b) = &manifest.bunching {
        let _ = writeln!(
            s,
            "bunching: lambda = {:.6}, sigma = {:.6}, beta = {:.4}, theta = {:.6}",
            b.lambda, b.sigma, b.beta, b.theta
        );
        let _ = writeln!(s, "  E1 (theta < 1): {}  E3: {}  E3': {}", yes_no(b.e1), yes_no(b.e3), yes_no(b.e3prime));
    }
    for v in &manifest.verdicts {
        let _ = writeln!(s, "{v}");
    }
    if !manifest.gates.is_empty() {
        let width = manifest.gates.iter().map(|g| g.name.len()).max().unwrap_or(0).max(4);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<width$}  {:>12}     {:>12}  result", "gate", "value", "threshold");
        for g in &manifest.gates {
            let _ = writeln!(
                s,
                "{:<width$}  {:>12.4e}  {}  {:>12.4e}  {}",
                g.name,
                g.value,
                g.op.symbol(),
                g.threshold,
                if g.pass { "pass" } else { "FAIL" }
            );
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "overall: {}", if manifest.passed() { "PASS" } else { "FAIL" });
    s
}
