//! Run reports: a line-oriented key-value summary of a repair attempt plus a
//! unified diff of the patched spec. The stats block is machine-parseable and
//! [`parse_stats`] recovers exactly the numbers that were rendered.

use crate::ast::{DeclKind, Spec};
use crate::print::{print_expr, print_formula, print_spec};
use crate::repair::{RepairConfig, RepairOutcome, RepairStats, Verdict};
use crate::Subtree;
use std::fmt::Write as _;

pub const REPORT_HEADER: &str = "relfix-report 1";

/// Render the full report. `after` is the patched spec (scope overrides not
/// applied) and should be `Some` exactly when the verdict is `Fixed`.
pub fn render(
    input: &str,
    cfg: &RepairConfig,
    out: &RepairOutcome,
    before: &Spec,
    after: Option<&Spec>,
) -> String {
    let mut r = String::new();
    let _ = writeln!(r, "{REPORT_HEADER}");
    let _ = writeln!(r, "input: {input}");
    let _ = writeln!(r, "mode: repair");
    match &out.verdict {
        Verdict::Fixed { .. } => {
            let _ = writeln!(r, "outcome: fixed");
        }
        Verdict::SpaceExhausted => {
            let _ = writeln!(r, "outcome: space-exhausted");
        }
        Verdict::Timeout { cause } => {
            let _ = writeln!(r, "outcome: timeout");
            let _ = writeln!(r, "cause: {cause}");
        }
    }
    render_config(&mut r, cfg);

    let _ = writeln!(r, "locations: {}", out.locs.len());
    for (i, loc) in out.locs.iter().enumerate() {
        let kind = match loc.decl.kind {
            DeclKind::Fact => "fact",
            DeclKind::Pred => "pred",
            DeclKind::Assert => "assert",
        };
        let path: Vec<String> = loc.path.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(
            r,
            "location {i}: {kind} {} [{}] at {}",
            before.decl_name(loc.decl),
            path.join("."),
            loc.span
        );
    }

    for v in &out.oracle_before {
        let _ = writeln!(
            r,
            "oracle-before: {} {} {}",
            v.cmd,
            v.name,
            if v.passed { "pass" } else { "fail" }
        );
    }

    render_stats(&mut r, &out.stats);

    for v in &out.oracle_after {
        let _ = writeln!(
            r,
            "oracle-after: {} {} {}",
            v.cmd,
            v.name,
            if v.passed { "pass" } else { "fail" }
        );
    }

    if let Verdict::Fixed { assignment, .. } = &out.verdict {
        for (i, slot) in assignment.iter().enumerate() {
            match slot {
                None => {
                    let _ = writeln!(r, "patch {i}: original");
                }
                Some(m) => {
                    let ops: Vec<&str> = m.lineage.iter().map(|o| o.name()).collect();
                    let text = match &m.replacement {
                        Subtree::E(e) => print_expr(e),
                        Subtree::F(f) => print_formula(f),
                    };
                    let _ = writeln!(r, "patch {i}: depth {} via {}: {text}", m.depth, ops.join(","));
                }
            }
        }
        if let Some(after) = after {
            r.push_str(&unified_diff(
                &print_spec(before),
                &print_spec(after),
                &format!("a/{input}"),
                &format!("b/{input}"),
            ));
        }
    }
    r
}

fn render_config(r: &mut String, cfg: &RepairConfig) {
    let _ = writeln!(r, "max-depth: {}", cfg.max_depth);
    let _ = writeln!(r, "timeout-secs: {}", cfg.timeout.as_secs());
    let _ = writeln!(r, "prune-partial: {}", cfg.prune_partial);
    let _ = writeln!(r, "prune-variabilization: {}", cfg.prune_variabilization);
    let _ = writeln!(r, "witness-cap: {}", cfg.witness_cap);
    let _ = writeln!(r, "deterministic: {}", cfg.deterministic);
    let _ = writeln!(r, "jobs: {}", cfg.jobs);
    if let Some(bw) = cfg.bitwidth {
        let _ = writeln!(r, "bitwidth: {bw}");
    }
    for (sig, n, exact) in &cfg.scope_overrides {
        let _ = writeln!(r, "scope: {sig}={n}{}", if *exact { "!" } else { "" });
    }
}

fn render_stats(r: &mut String, st: &RepairStats) {
    let _ = writeln!(r, "generated: {}", st.generated);
    let _ = writeln!(r, "visited: {}", st.visited);
    let _ = writeln!(r, "pruned: {}", st.pruned);
    let _ = writeln!(r, "pruned-partial: {}", st.pruned_partial);
    let _ = writeln!(r, "pruned-variabilization: {}", st.pruned_variabilization);
    let _ = writeln!(r, "remaining: {}", st.remaining);
    let _ = writeln!(r, "solver-calls: {}", st.solver_calls);
    let _ = writeln!(r, "memo-hits: {}", st.memo_hits);
    let _ = writeln!(r, "witness-calls: {}", st.witness_calls);
    let _ = writeln!(r, "witness-unknown: {}", st.witness_unknown);
    let _ = writeln!(r, "wall-ms: {}", st.wall_ms);
}

/// Recover the stats block from a rendered report. Returns None if any of the
/// eleven counters is missing or malformed; extra lines are ignored.
pub fn parse_stats(report: &str) -> Option<RepairStats> {
    let mut st = RepairStats::default();
    let mut seen = 0u32;
    for line in report.lines() {
        let Some((key, val)) = line.split_once(": ") else {
            continue;
        };
        let slot = match key {
            "generated" => &mut st.generated,
            "visited" => &mut st.visited,
            "pruned" => &mut st.pruned,
            "pruned-partial" => &mut st.pruned_partial,
            "pruned-variabilization" => &mut st.pruned_variabilization,
            "remaining" => &mut st.remaining,
            "solver-calls" => &mut st.solver_calls,
            "memo-hits" => &mut st.memo_hits,
            "witness-calls" => &mut st.witness_calls,
            "witness-unknown" => &mut st.witness_unknown,
            "wall-ms" => &mut st.wall_ms,
            _ => continue,
        };
        *slot = val.parse().ok()?;
        seen += 1;
    }
    (seen == 11).then_some(st)
}

/// Unified diff with three lines of context. Plain LCS; inputs are
/// pretty-printed specs, small enough that quadratic table fill is free.
pub fn unified_diff(a: &str, b: &str, a_name: &str, b_name: &str) -> String {
    let al: Vec<&str> = a.lines().collect();
    let bl: Vec<&str> = b.lines().collect();
    let ops = diff_ops(&al, &bl);
    if ops.iter().all(|o| matches!(o, DiffOp::Keep(_))) {
        return String::new();
    }

    let mut out = String::new();
    let _ = writeln!(out, "--- {a_name}");
    let _ = writeln!(out, "+++ {b_name}");

    // Group ops into hunks: runs of changes padded with up to 3 context lines.
    const CTX: usize = 3;
    let mut i = 0;
    while i < ops.len() {
        if matches!(ops[i], DiffOp::Keep(_)) {
            i += 1;
            continue;
        }
        let start = i.saturating_sub(CTX);
        let mut end = i;
        let mut gap = 0;
        for (j, op) in ops.iter().enumerate().skip(i) {
            if matches!(op, DiffOp::Keep(_)) {
                gap += 1;
                if gap > 2 * CTX {
                    break;
                }
            } else {
                gap = 0;
                end = j;
            }
        }
        let stop = (end + CTX + 1).min(ops.len());

        let (mut a_line, mut b_line) = (1usize, 1usize);
        for op in &ops[..start] {
            match op {
                DiffOp::Keep(_) => {
                    a_line += 1;
                    b_line += 1;
                }
                DiffOp::Del(_) => a_line += 1,
                DiffOp::Add(_) => b_line += 1,
            }
        }
        let a_count = ops[start..stop]
            .iter()
            .filter(|o| !matches!(o, DiffOp::Add(_)))
            .count();
        let b_count = ops[start..stop]
            .iter()
            .filter(|o| !matches!(o, DiffOp::Del(_)))
            .count();
        let a_start = if a_count == 0 { a_line - 1 } else { a_line };
        let b_start = if b_count == 0 { b_line - 1 } else { b_line };
        let _ = writeln!(out, "@@ -{a_start},{a_count} +{b_start},{b_count} @@");
        for op in &ops[start..stop] {
            match op {
                DiffOp::Keep(s) => {
                    let _ = writeln!(out, " {s}");
                }
                DiffOp::Del(s) => {
                    let _ = writeln!(out, "-{s}");
                }
                DiffOp::Add(s) => {
                    let _ = writeln!(out, "+{s}");
                }
            }
        }
        i = stop;
    }
    out
}

enum DiffOp<'a> {
    Keep(&'a str),
    Del(&'a str),
    Add(&'a str),
}

fn diff_ops<'a>(a: &[&'a str], b: &[&'a str]) -> Vec<DiffOp<'a>> {
    let (n, m) = (a.len(), b.len());
    // lcs[i][j] = LCS length of a[i..], b[j..]
    let mut lcs = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if a[i] == b[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            ops.push(DiffOp::Keep(a[i]));
            i += 1;
            j += 1;
        } else if lcs[i + 1][j] >= lcs[i][j + 1] {
            ops.push(DiffOp::Del(a[i]));
            i += 1;
        } else {
            ops.push(DiffOp::Add(b[j]));
            j += 1;
        }
    }
    ops.extend(a[i..].iter().map(|s| DiffOp::Del(s)));
    ops.extend(b[j..].iter().map(|s| DiffOp::Add(s)));
    ops
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reapply a unified diff to its base; the reconstruction must equal the
    // target exactly. Keeps the hunk arithmetic honest.
    fn apply(base: &str, diff: &str) -> Vec<String> {
        let src: Vec<&str> = base.lines().collect();
        let mut out: Vec<String> = Vec::new();
        let mut cursor = 0usize; // next unconsumed base line
        for line in diff.lines() {
            if line.starts_with("--- ") || line.starts_with("+++ ") {
                continue;
            }
            if let Some(h) = line.strip_prefix("@@ -") {
                let a_start: usize = h
                    .split(|c| c == ',' || c == ' ')
                    .next()
                    .unwrap()
                    .parse()
                    .unwrap();
                let upto = a_start.saturating_sub(1);
                while cursor < upto {
                    out.push(src[cursor].to_string());
                    cursor += 1;
                }
            } else if let Some(t) = line.strip_prefix(' ') {
                assert_eq!(src[cursor], t, "context mismatch");
                out.push(t.to_string());
                cursor += 1;
            } else if let Some(t) = line.strip_prefix('-') {
                assert_eq!(src[cursor], t, "deletion mismatch");
                cursor += 1;
            } else if let Some(t) = line.strip_prefix('+') {
                out.push(t.to_string());
            }
        }
        while cursor < src.len() {
            out.push(src[cursor].to_string());
            cursor += 1;
        }
        out
    }

    fn check_roundtrip(a: &str, b: &str) {
        let d = unified_diff(a, b, "a", "b");
        let want: Vec<String> = b.lines().map(str::to_string).collect();
        assert_eq!(apply(a, &d), want, "diff did not reconstruct target");
    }

    #[test]
    fn diff_reconstructs_target() {
        check_roundtrip("x\ny\nz\n", "x\nY\nz\n");
        check_roundtrip("a\nb\nc\nd\ne\nf\ng\n", "a\nb\nc\nX\ne\nf\ng\n");
        check_roundtrip("", "new\nlines\n");
        check_roundtrip("gone\n", "");
        // Two edits far enough apart for separate hunks.
        let base: Vec<String> = (0..30).map(|i| format!("line{i}")).collect();
        let mut edited = base.clone();
        edited[2] = "edited-early".into();
        edited[25] = "edited-late".into();
        check_roundtrip(
            &(base.join("\n") + "\n"),
            &(edited.join("\n") + "\n"),
        );
        // Adjacent edits must merge into one hunk.
        let d = unified_diff("a\nb\nc\nd\n", "a\nB\nC\nd\n", "a", "b");
        assert_eq!(d.matches("@@").count(), 2); // one hunk, two @@ tokens
    }

    #[test]
    fn identical_inputs_produce_empty_diff() {
        assert_eq!(unified_diff("same\n", "same\n", "a", "b"), "");
    }

    #[test]
    fn stats_roundtrip() {
        let st = RepairStats {
            generated: 13835072,
            visited: 80,
            pruned: 4362,
            pruned_partial: 4360,
            pruned_variabilization: 2,
            remaining: 13830630,
            solver_calls: 117,
            memo_hits: 4,
            witness_calls: 74,
            witness_unknown: 37,
            wall_ms: 0,
        };
        let mut r = String::new();
        render_stats(&mut r, &st);
        assert_eq!(parse_stats(&r), Some(st));
        assert_eq!(parse_stats("generated: 1\n"), None);
    }
}
