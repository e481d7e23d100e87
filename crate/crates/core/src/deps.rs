//! Which repair locations can influence which commands.
//!
//! Every solve is constrained by all facts, the command's target body, and
//! everything those reach through pred calls. A location outside that set
//! cannot change the command's verdict, which is what makes fragment-level
//! pruning sound.

use crate::ast::*;
use std::collections::HashSet;

fn called_preds(body: &[Formula], spec: &Spec, out: &mut HashSet<usize>) {
    fn walk_f(f: &Formula, spec: &Spec, out: &mut HashSet<usize>) {
        if let FormulaKind::Call { name, .. } = &f.kind {
            if let Some(i) = spec.pred_index(name) {
                out.insert(i);
            }
        }
        for c in NodeRef::F(f).children() {
            match c {
                NodeRef::F(g) => walk_f(g, spec, out),
                NodeRef::E(e) => walk_e(e, spec, out),
            }
        }
    }
    fn walk_e(e: &Expr, spec: &Spec, out: &mut HashSet<usize>) {
        for c in NodeRef::E(e).children() {
            match c {
                NodeRef::F(g) => walk_f(g, spec, out),
                NodeRef::E(e2) => walk_e(e2, spec, out),
            }
        }
    }
    for f in body {
        walk_f(f, spec, out);
    }
}

/// All declarations whose bodies can influence `cmd`'s verdict.
pub fn reachable_decls(spec: &Spec, cmd: &Command) -> HashSet<DeclRef> {
    let mut decls = HashSet::new();
    let mut preds: HashSet<usize> = HashSet::new();
    for i in 0..spec.facts.len() {
        decls.insert(DeclRef {
            kind: DeclKind::Fact,
            index: i,
        });
        called_preds(&spec.facts[i].body, spec, &mut preds);
    }
    match cmd.kind {
        CmdKind::Run => {
            if let Some(i) = spec.pred_index(&cmd.target) {
                preds.insert(i);
            }
        }
        CmdKind::Check => {
            if let Some((i, a)) = spec
                .asserts
                .iter()
                .enumerate()
                .find(|(_, a)| a.name == cmd.target)
            {
                decls.insert(DeclRef {
                    kind: DeclKind::Assert,
                    index: i,
                });
                called_preds(&a.body, spec, &mut preds);
            }
        }
    }
    // Close over pred-to-pred calls.
    let mut work: Vec<usize> = preds.iter().copied().collect();
    while let Some(i) = work.pop() {
        let mut next = HashSet::new();
        called_preds(&spec.preds[i].body, spec, &mut next);
        for j in next {
            if preds.insert(j) {
                work.push(j);
            }
        }
    }
    for i in preds {
        decls.insert(DeclRef {
            kind: DeclKind::Pred,
            index: i,
        });
    }
    decls
}

/// One bit per location, per command. At most 64 repair locations.
pub fn command_deps(spec: &Spec, locs: &[Location]) -> Vec<u64> {
    assert!(locs.len() <= 64, "at most 64 repair locations supported");
    spec.commands
        .iter()
        .map(|cmd| {
            let reach = reachable_decls(spec, cmd);
            let mut bits = 0u64;
            for (i, loc) in locs.iter().enumerate() {
                if reach.contains(&loc.decl) {
                    bits |= 1 << i;
                }
            }
            bits
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{DeclKind, Formula, FormulaKind, Subtree};
    use crate::parse::parse;
    use crate::solve::{solve_command, SolveOptions};

    const CHAIN: &str = "sig A {}\n\
        fact Axiom { //@loc\n some A }\n\
        pred Base { //@loc\n 0 = 0 }\n\
        pred Mid { Base[] }\n\
        pred Top { Mid[] }\n\
        pred Solo { //@loc\n no A }\n\
        assert Claim { Top[] }\n\
        run Top for 2 expect 1\n\
        check Claim for 2\n\
        run Solo for 2 expect 1\n";

    #[test]
    fn masks_follow_calls_and_always_include_facts() {
        let spec = parse(CHAIN).unwrap();
        let masks = command_deps(&spec, &spec.markers);
        // marker order: Axiom, Base, Solo
        assert_eq!(masks, [0b011, 0b011, 0b101]);
    }

    #[test]
    fn reachability_stops_at_uncalled_decls() {
        let spec = parse(CHAIN).unwrap();
        let seen = reachable_decls(&spec, &spec.commands[0]);
        let pred = |i| DeclRef { kind: DeclKind::Pred, index: i };
        assert!(seen.contains(&pred(0)) && seen.contains(&pred(2)));
        assert!(!seen.contains(&pred(3)), "Solo is not called by Top");
        assert!(seen.contains(&DeclRef { kind: DeclKind::Fact, index: 0 }));
    }

    // A location outside a command's dependency set cannot influence that
    // command's verdict; this is what makes fragment-based pruning sound.
    #[test]
    fn excluded_location_cannot_change_verdict() {
        let spec = parse(CHAIN).unwrap();
        let solo = spec.markers[2].clone();
        let opts = SolveOptions::default();
        let mut found = Vec::new();
        for lit in [true, false] {
            let body = Subtree::F(Formula::new(FormulaKind::Lit(lit)));
            let patched = crate::loc::apply_patch(&spec, &[(solo.clone(), body)]).unwrap();
            let (res, _) = solve_command(&patched, &patched.commands[0], &opts).unwrap();
            found.push(res.is_some());
        }
        assert_eq!(found[0], found[1]);
    }
}
