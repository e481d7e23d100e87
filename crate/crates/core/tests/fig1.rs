//! End-to-end checks on the linked-list fixture: oracle verdicts on the
//! buggy and repaired variants, marker resolution, and mutant goldens.

use relfix_core::loc;
use relfix_core::mutate;
use relfix_core::solve::{check_command, SolveOptions};
use relfix_core::{parse, Spec};

fn fixture(name: &str) -> String {
    let path = format!("{}/../../figures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn buggy() -> Spec {
    parse(&fixture("list.rspec")).expect("buggy fixture parses")
}

fn fixed() -> Spec {
    parse(&fixture("list_fixed.rspec")).expect("fixed fixture parses")
}

/// Oracle commands at a desk-scale bitwidth; node counts stay below the
/// integer maximum so counting cannot wrap.
fn with_bitwidth(spec: &Spec, bw: u32) -> Spec {
    let mut s = spec.clone();
    for c in &mut s.commands {
        c.scope.bitwidth = bw;
    }
    s
}

#[test]
fn markers_resolve_to_the_two_pred_bodies() {
    let s = buggy();
    let locs = loc::validate_inline_markers(&s).expect("inline markers valid");
    assert_eq!(locs.len(), 2);
    let names: Vec<&str> = locs.iter().map(|l| s.decl_name(l.decl)).collect();
    assert_eq!(names, ["Sorted", "Contains"]);
    // Same two locations via the sidecar marker file.
    let side = loc::resolve_markers(&s, &["Sorted".into(), "Contains".into()]).unwrap();
    assert_eq!(side, locs);
}

#[test]
fn buggy_spec_fails_both_oracles() {
    let s = with_bitwidth(&buggy(), 3);
    let opts = SolveOptions::default();

    // Strict sorting contradicts the terminating loop: no instance.
    let run = check_command(&s, &s.commands[0], &opts).unwrap();
    assert!(!run.passed);
    assert!(run.witness.is_none());

    // The empty list satisfies RepOk, and buggy Contains accepts res = True
    // for any element, so a counterexample exists.
    let check = check_command(&s, &s.commands[1], &opts).unwrap();
    assert!(!check.passed);
    assert!(check.witness.is_some());
}

#[test]
fn fixed_spec_passes_both_oracles() {
    let s = with_bitwidth(&fixed(), 3);
    let opts = SolveOptions::default();
    let run = check_command(&s, &s.commands[0], &opts).unwrap();
    assert!(run.passed, "run RepOk finds an instance");
    let check = check_command(&s, &s.commands[1], &opts).unwrap();
    assert!(check.passed, "check ContainsCorrect has no counterexample");
}

#[test]
fn depth1_mutant_counts_sit_in_the_band() {
    let s = buggy();
    let locs = loc::validate_inline_markers(&s).unwrap();
    let sorted = mutate::generate_mutants(&s, &locs[0]);
    let contains = mutate::generate_mutants(&s, &locs[1]);
    println!("sorted mutants: {}", sorted.len());
    println!("contains mutants: {}", contains.len());
    for band in [sorted.len(), contains.len()] {
        assert!((60..=260).contains(&band), "count {band} outside 60..=260");
    }
}
