//! Mutant generation over a suspicious location's subtree.
//!
//! The catalog has 21 operators. Emission order is frozen: operators in
//! catalog order, then sub-positions of the subtree in pre-order, then the
//! operator's own alternatives. Every emitted mutant typechecks when spliced
//! into the spec, denotes no provably-empty relation anywhere in its body,
//! avoids pointless stacking (`^^e`, `**e`, `^*e`, `*^e`, `~~e`, `!!f`), and
//! differs structurally from the node it was derived from. Higher-order
//! mutants come from re-applying the catalog to already-mutated subtrees;
//! the stream deduplicates structurally across all depths.

use crate::ast::*;
use crate::loc;
use crate::types::{self, Env, Typer};
use std::collections::HashSet;

/// Catalog operator kinds, in frozen emission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutOp {
    ConnReplace,
    NegInsert,
    NegRemove,
    CmpReplace,
    SetOpReplace,
    QuantReplace,
    MultReplace,
    UnInsert,
    UnRemove,
    UnReplace,
    JoinExtendRight,
    JoinExtendLeft,
    JoinTruncate,
    OperandSwap,
    VarReplace,
    FieldReplace,
    SigReplace,
    ToTrue,
    ToFalse,
    IntNudge,
    ProductReplace,
}

pub const CATALOG: [MutOp; 21] = [
    MutOp::ConnReplace,
    MutOp::NegInsert,
    MutOp::NegRemove,
    MutOp::CmpReplace,
    MutOp::SetOpReplace,
    MutOp::QuantReplace,
    MutOp::MultReplace,
    MutOp::UnInsert,
    MutOp::UnRemove,
    MutOp::UnReplace,
    MutOp::JoinExtendRight,
    MutOp::JoinExtendLeft,
    MutOp::JoinTruncate,
    MutOp::OperandSwap,
    MutOp::VarReplace,
    MutOp::FieldReplace,
    MutOp::SigReplace,
    MutOp::ToTrue,
    MutOp::ToFalse,
    MutOp::IntNudge,
    MutOp::ProductReplace,
];

impl MutOp {
    pub fn name(&self) -> &'static str {
        match self {
            MutOp::ConnReplace => "conn-replace",
            MutOp::NegInsert => "neg-insert",
            MutOp::NegRemove => "neg-remove",
            MutOp::CmpReplace => "cmp-replace",
            MutOp::SetOpReplace => "setop-replace",
            MutOp::QuantReplace => "quant-replace",
            MutOp::MultReplace => "mult-replace",
            MutOp::UnInsert => "unary-insert",
            MutOp::UnRemove => "unary-remove",
            MutOp::UnReplace => "unary-replace",
            MutOp::JoinExtendRight => "join-extend-right",
            MutOp::JoinExtendLeft => "join-extend-left",
            MutOp::JoinTruncate => "join-truncate",
            MutOp::OperandSwap => "operand-swap",
            MutOp::VarReplace => "var-replace",
            MutOp::FieldReplace => "field-replace",
            MutOp::SigReplace => "sig-replace",
            MutOp::ToTrue => "to-true",
            MutOp::ToFalse => "to-false",
            MutOp::IntNudge => "int-nudge",
            MutOp::ProductReplace => "product-replace",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mutant {
    pub replacement: Subtree,
    /// Cumulative catalog applications from the original subtree.
    pub depth: usize,
    pub lineage: Vec<MutOp>,
}

/// Pluggable rewriter so tests can substitute synthetic mutant shapes with
/// controlled branching; the repair engine and CLI use [`Catalog`].
pub trait MutantSource {
    /// Single-application rewrites of `node` standing at `loc`, already
    /// filtered for well-formedness, in deterministic order.
    fn rewrites(&self, spec: &Spec, loc: &Location, node: &Subtree) -> Vec<(MutOp, Subtree)>;
}

fn node_ref(sub: &Subtree) -> NodeRef<'_> {
    match sub {
        Subtree::E(e) => NodeRef::E(e),
        Subtree::F(f) => NodeRef::F(f),
    }
}

/// Pre-order positions paired with the binder environment above each node.
fn positions(sub: &Subtree, base: &Env, ty: &Typer) -> Vec<(Vec<usize>, Env)> {
    fn walk(
        n: NodeRef<'_>,
        path: &mut Vec<usize>,
        env: &Env,
        ty: &Typer,
        out: &mut Vec<(Vec<usize>, Env)>,
    ) {
        out.push((path.clone(), env.clone()));
        let binder = match n {
            NodeRef::F(f) => match &f.kind {
                FormulaKind::Quant { var, bound, .. } => Some((var, bound)),
                _ => None,
            },
            NodeRef::E(e) => match &e.kind {
                ExprKind::Compr { var, bound, .. } => Some((var, bound)),
                _ => None,
            },
        };
        for (i, c) in n.children().into_iter().enumerate() {
            path.push(i);
            // Child 1 of a quantifier or comprehension is its body, scoped
            // under the binder; the bound itself (child 0) is not.
            if i == 1 {
                if let Some((var, bound)) = binder {
                    let mut env2 = env.clone();
                    let mask = ty
                        .type_of(bound, &mut env2.clone())
                        .ok()
                        .and_then(|t| t.first().copied())
                        .unwrap_or(0);
                    env2.push((var.clone(), mask));
                    walk(c, path, &env2, ty, out);
                    path.pop();
                    continue;
                }
            }
            walk(c, path, env, ty, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    walk(node_ref(sub), &mut Vec::new(), base, ty, &mut out);
    out
}

fn splice_e(e: &Expr, path: &[usize], repl: &Subtree) -> Expr {
    if path.is_empty() {
        let Subtree::E(x) = repl else {
            unreachable!("expr position spliced with a formula")
        };
        return x.clone();
    }
    let (i, rest) = (path[0], &path[1..]);
    let kind = match &e.kind {
        ExprKind::Un(op, a) => ExprKind::Un(*op, Box::new(splice_e(a, rest, repl))),
        ExprKind::Card(a) => ExprKind::Card(Box::new(splice_e(a, rest, repl))),
        ExprKind::Bin(op, a, b) => {
            if i == 0 {
                ExprKind::Bin(*op, Box::new(splice_e(a, rest, repl)), b.clone())
            } else {
                ExprKind::Bin(*op, a.clone(), Box::new(splice_e(b, rest, repl)))
            }
        }
        ExprKind::Compr { var, bound, body } => {
            if i == 0 {
                ExprKind::Compr {
                    var: var.clone(),
                    bound: Box::new(splice_e(bound, rest, repl)),
                    body: body.clone(),
                }
            } else {
                ExprKind::Compr {
                    var: var.clone(),
                    bound: bound.clone(),
                    body: Box::new(splice_f(body, rest, repl)),
                }
            }
        }
        _ => unreachable!("path descends into a leaf"),
    };
    Expr::with_span(kind, e.span)
}

fn splice_f(f: &Formula, path: &[usize], repl: &Subtree) -> Formula {
    if path.is_empty() {
        let Subtree::F(x) = repl else {
            unreachable!("formula position spliced with an expr")
        };
        return x.clone();
    }
    let (i, rest) = (path[0], &path[1..]);
    let kind = match &f.kind {
        FormulaKind::Cmp(op, a, b) => {
            if i == 0 {
                FormulaKind::Cmp(*op, Box::new(splice_e(a, rest, repl)), b.clone())
            } else {
                FormulaKind::Cmp(*op, a.clone(), Box::new(splice_e(b, rest, repl)))
            }
        }
        FormulaKind::Mult(m, a) => FormulaKind::Mult(*m, Box::new(splice_e(a, rest, repl))),
        FormulaKind::Not(g) => FormulaKind::Not(Box::new(splice_f(g, rest, repl))),
        FormulaKind::Conn(op, a, b) => {
            if i == 0 {
                FormulaKind::Conn(*op, Box::new(splice_f(a, rest, repl)), b.clone())
            } else {
                FormulaKind::Conn(*op, a.clone(), Box::new(splice_f(b, rest, repl)))
            }
        }
        FormulaKind::Quant { q, var, bound, body } => {
            if i == 0 {
                FormulaKind::Quant {
                    q: *q,
                    var: var.clone(),
                    bound: Box::new(splice_e(bound, rest, repl)),
                    body: body.clone(),
                }
            } else {
                FormulaKind::Quant {
                    q: *q,
                    var: var.clone(),
                    bound: bound.clone(),
                    body: Box::new(splice_f(body, rest, repl)),
                }
            }
        }
        FormulaKind::Call { name, args } => {
            let mut args = args.clone();
            args[i] = splice_e(&args[i], rest, repl);
            FormulaKind::Call {
                name: name.clone(),
                args,
            }
        }
        _ => unreachable!("path descends into a leaf"),
    };
    Formula::with_span(kind, f.span)
}

fn splice_sub(sub: &Subtree, path: &[usize], repl: &Subtree) -> Subtree {
    match sub {
        Subtree::E(e) => Subtree::E(splice_e(e, path, repl)),
        Subtree::F(f) => Subtree::F(splice_f(f, path, repl)),
    }
}

/// Stacked wrappers that never change meaning: double closures in any
/// combination, double transpose, double negation.
fn has_innocuous_stacking(sub: &Subtree) -> bool {
    fn walk(n: NodeRef<'_>) -> bool {
        match n {
            NodeRef::E(e) => {
                if let ExprKind::Un(o1, inner) = &e.kind {
                    if let ExprKind::Un(o2, _) = &inner.kind {
                        let closure =
                            |o: &UnOp| matches!(o, UnOp::Closure | UnOp::RClosure);
                        if (closure(o1) && closure(o2))
                            || (*o1 == UnOp::Transpose && *o2 == UnOp::Transpose)
                        {
                            return true;
                        }
                    }
                }
            }
            NodeRef::F(f) => {
                if let FormulaKind::Not(g) = &f.kind {
                    if matches!(g.kind, FormulaKind::Not(_)) {
                        return true;
                    }
                }
            }
        }
        n.children().into_iter().any(walk)
    }
    walk(node_ref(sub))
}

/// True when some expr inside `sub` has a column typed as the empty family
/// set, i.e. it provably denotes the empty relation; the literal `none` is
/// exempt. `env` is the binder environment at the subtree root.
fn has_empty_typed_expr(sub: &Subtree, env: &Env, ty: &Typer) -> bool {
    fn walk(n: NodeRef<'_>, env: &mut Env, ty: &Typer) -> bool {
        if let NodeRef::E(e) = n {
            if !matches!(e.kind, ExprKind::NoneSet) {
                match ty.type_of(e, env) {
                    Ok(t) => {
                        if t.iter().any(|&m| m == 0) {
                            return true;
                        }
                    }
                    Err(_) => return true,
                }
            }
        }
        let binder = match n {
            NodeRef::F(f) => match &f.kind {
                FormulaKind::Quant { var, bound, .. } => Some((var.clone(), bound)),
                _ => None,
            },
            NodeRef::E(e) => match &e.kind {
                ExprKind::Compr { var, bound, .. } => Some((var.clone(), bound)),
                _ => None,
            },
        };
        for (i, c) in n.children().into_iter().enumerate() {
            let pushed = if i == 1 {
                if let Some((var, bound)) = &binder {
                    let mask = ty
                        .type_of(bound, env)
                        .ok()
                        .and_then(|t| t.first().copied())
                        .unwrap_or(0);
                    env.push((var.clone(), mask));
                    true
                } else {
                    false
                }
            } else {
                false
            };
            let hit = walk(c, env, ty);
            if pushed {
                env.pop();
            }
            if hit {
                return true;
            }
        }
        false
    }
    walk(node_ref(sub), &mut env.clone(), ty)
}

/// The filter predicate behind the catalog, exposed for property tests:
/// `m` must differ from the current subtree at `loc`, contain no innocuous
/// stacking, typecheck when spliced in, and type no empty relation.
pub fn is_well_formed_mutant(spec: &Spec, loc: &Location, m: &Subtree) -> bool {
    let Some(current) = loc::subtree_at(spec, loc) else {
        return false;
    };
    if *m == current || has_innocuous_stacking(m) {
        return false;
    }
    if loc::apply_patch(spec, &[(loc.clone(), m.clone())]).is_err() {
        return false;
    }
    let Ok(fam) = types::families(spec) else {
        return false;
    };
    let Ok(env) = types::env_at(spec, &fam, loc) else {
        return false;
    };
    let ty = Typer::new(spec, &fam);
    !has_empty_typed_expr(m, &env, &ty)
}

/// All field names, declaration order.
fn field_names(spec: &Spec) -> Vec<&str> {
    spec.sigs
        .iter()
        .flat_map(|s| s.fields.iter().map(|f| f.name.as_str()))
        .collect()
}

fn ident(name: &str) -> Expr {
    Expr::new(ExprKind::Ident(name.to_string()))
}

/// Alternatives the operator proposes for one node; unfiltered.
fn op_proposals(op: MutOp, n: NodeRef<'_>, env: &Env, spec: &Spec) -> Vec<Subtree> {
    let mut out = Vec::new();
    match (op, n) {
        (MutOp::ConnReplace, NodeRef::F(f)) => {
            if let FormulaKind::Conn(c0, a, b) = &f.kind {
                for c in [ConnOp::And, ConnOp::Or, ConnOp::Implies, ConnOp::Iff] {
                    if c != *c0 {
                        out.push(Subtree::F(Formula::new(FormulaKind::Conn(
                            c,
                            a.clone(),
                            b.clone(),
                        ))));
                    }
                }
            }
        }
        (MutOp::NegInsert, NodeRef::F(f)) => {
            out.push(Subtree::F(Formula::new(FormulaKind::Not(Box::new(
                f.clone(),
            )))));
        }
        (MutOp::NegRemove, NodeRef::F(f)) => {
            if let FormulaKind::Not(g) = &f.kind {
                out.push(Subtree::F((**g).clone()));
            }
        }
        (MutOp::CmpReplace, NodeRef::F(f)) => {
            if let FormulaKind::Cmp(c0, a, b) = &f.kind {
                for c in [
                    CmpOp::In,
                    CmpOp::NotIn,
                    CmpOp::Eq,
                    CmpOp::Ne,
                    CmpOp::Lt,
                    CmpOp::Le,
                    CmpOp::Gt,
                    CmpOp::Ge,
                ] {
                    if c != *c0 {
                        out.push(Subtree::F(Formula::new(FormulaKind::Cmp(
                            c,
                            a.clone(),
                            b.clone(),
                        ))));
                    }
                }
            }
        }
        (MutOp::SetOpReplace, NodeRef::E(e)) => {
            if let ExprKind::Bin(b0, l, r) = &e.kind {
                if matches!(b0, BinOp::Union | BinOp::Diff | BinOp::Inter) {
                    for b in [BinOp::Union, BinOp::Diff, BinOp::Inter] {
                        if b != *b0 {
                            out.push(Subtree::E(Expr::new(ExprKind::Bin(
                                b,
                                l.clone(),
                                r.clone(),
                            ))));
                        }
                    }
                }
            }
        }
        (MutOp::QuantReplace, NodeRef::F(f)) => {
            if let FormulaKind::Quant { q, var, bound, body } = &f.kind {
                for q2 in [Quant::All, Quant::Some, Quant::One, Quant::Lone, Quant::No] {
                    if q2 != *q {
                        out.push(Subtree::F(Formula::new(FormulaKind::Quant {
                            q: q2,
                            var: var.clone(),
                            bound: bound.clone(),
                            body: body.clone(),
                        })));
                    }
                }
            }
        }
        (MutOp::MultReplace, NodeRef::F(f)) => {
            if let FormulaKind::Mult(m0, e) = &f.kind {
                for m in [MultOp::No, MultOp::Some, MultOp::One, MultOp::Lone] {
                    if m != *m0 {
                        out.push(Subtree::F(Formula::new(FormulaKind::Mult(m, e.clone()))));
                    }
                }
            }
        }
        (MutOp::UnInsert, NodeRef::E(e)) => {
            for u in [UnOp::Transpose, UnOp::Closure, UnOp::RClosure] {
                out.push(Subtree::E(Expr::new(ExprKind::Un(
                    u,
                    Box::new(e.clone()),
                ))));
            }
        }
        (MutOp::UnRemove, NodeRef::E(e)) => {
            if let ExprKind::Un(_, inner) = &e.kind {
                out.push(Subtree::E((**inner).clone()));
            }
        }
        (MutOp::UnReplace, NodeRef::E(e)) => {
            if let ExprKind::Un(u0, inner) = &e.kind {
                for u in [UnOp::Transpose, UnOp::Closure, UnOp::RClosure] {
                    if u != *u0 {
                        out.push(Subtree::E(Expr::new(ExprKind::Un(u, inner.clone()))));
                    }
                }
            }
        }
        (MutOp::JoinExtendRight, NodeRef::E(e)) => {
            // Plain and reversed navigation: e.f and e.~f.
            for f in field_names(spec) {
                out.push(Subtree::E(Expr::new(ExprKind::Bin(
                    BinOp::Join,
                    Box::new(e.clone()),
                    Box::new(ident(f)),
                ))));
                out.push(Subtree::E(Expr::new(ExprKind::Bin(
                    BinOp::Join,
                    Box::new(e.clone()),
                    Box::new(Expr::new(ExprKind::Un(
                        UnOp::Transpose,
                        Box::new(ident(f)),
                    ))),
                ))));
            }
        }
        (MutOp::JoinExtendLeft, NodeRef::E(e)) => {
            for f in field_names(spec) {
                out.push(Subtree::E(Expr::new(ExprKind::Bin(
                    BinOp::Join,
                    Box::new(ident(f)),
                    Box::new(e.clone()),
                ))));
                out.push(Subtree::E(Expr::new(ExprKind::Bin(
                    BinOp::Join,
                    Box::new(Expr::new(ExprKind::Un(
                        UnOp::Transpose,
                        Box::new(ident(f)),
                    ))),
                    Box::new(e.clone()),
                ))));
            }
        }
        (MutOp::JoinTruncate, NodeRef::E(e)) => {
            if let ExprKind::Bin(BinOp::Join, l, _) = &e.kind {
                out.push(Subtree::E((**l).clone()));
            }
        }
        (MutOp::OperandSwap, NodeRef::E(e)) => {
            if let ExprKind::Bin(b, l, r) = &e.kind {
                out.push(Subtree::E(Expr::new(ExprKind::Bin(
                    *b,
                    r.clone(),
                    l.clone(),
                ))));
            }
        }
        (MutOp::VarReplace, NodeRef::E(e)) => {
            if let ExprKind::Ident(v) = &e.kind {
                if let Some((_, vm)) = env.iter().rev().find(|(n2, _)| n2 == v) {
                    for (w, wm) in env {
                        if w != v && wm == vm {
                            out.push(Subtree::E(ident(w)));
                        }
                    }
                }
            }
        }
        (MutOp::FieldReplace, NodeRef::E(e)) => {
            if let ExprKind::Ident(v) = &e.kind {
                if spec.field_owner(v).is_some() {
                    for f in field_names(spec) {
                        if f != v {
                            out.push(Subtree::E(ident(f)));
                        }
                    }
                }
            }
        }
        (MutOp::SigReplace, NodeRef::E(e)) => {
            if let ExprKind::Ident(v) = &e.kind {
                if spec.sig(v).is_some() {
                    for s in &spec.sigs {
                        if s.name != *v {
                            out.push(Subtree::E(ident(&s.name)));
                        }
                    }
                    out.push(Subtree::E(Expr::new(ExprKind::Univ)));
                }
            }
        }
        (MutOp::ToTrue, NodeRef::F(f)) => {
            if !matches!(f.kind, FormulaKind::Lit(true)) {
                out.push(Subtree::F(Formula::new(FormulaKind::Lit(true))));
            }
        }
        (MutOp::ToFalse, NodeRef::F(f)) => {
            if !matches!(f.kind, FormulaKind::Lit(false)) {
                out.push(Subtree::F(Formula::new(FormulaKind::Lit(false))));
            }
        }
        (MutOp::IntNudge, NodeRef::E(e)) => {
            if let ExprKind::IntLit(v) = e.kind {
                let lo = -(1i64 << (DEFAULT_BITWIDTH - 1));
                let hi = (1i64 << (DEFAULT_BITWIDTH - 1)) - 1;
                for v2 in [v - 1, v + 1] {
                    if (lo..=hi).contains(&v2) {
                        out.push(Subtree::E(Expr::new(ExprKind::IntLit(v2))));
                    }
                }
            }
        }
        (MutOp::ProductReplace, NodeRef::E(e)) => {
            if let ExprKind::Bin(b0, l, r) = &e.kind {
                match b0 {
                    BinOp::Product => out.push(Subtree::E(Expr::new(ExprKind::Bin(
                        BinOp::Join,
                        l.clone(),
                        r.clone(),
                    )))),
                    BinOp::Join => out.push(Subtree::E(Expr::new(ExprKind::Bin(
                        BinOp::Product,
                        l.clone(),
                        r.clone(),
                    )))),
                    _ => {}
                }
            }
        }
        _ => {}
    }
    out
}

/// The 21-operator catalog source.
pub struct Catalog;

impl MutantSource for Catalog {
    fn rewrites(&self, spec: &Spec, loc: &Location, node: &Subtree) -> Vec<(MutOp, Subtree)> {
        let Ok(fam) = types::families(spec) else {
            return Vec::new();
        };
        let Ok(base) = types::env_at(spec, &fam, loc) else {
            return Vec::new();
        };
        let ty = Typer::new(spec, &fam);
        let pos = positions(node, &base, &ty);
        let mut out = Vec::new();
        for op in CATALOG {
            for (path, env) in &pos {
                let at = node_ref(node).descend(path).unwrap();
                for prop in op_proposals(op, at, env, spec) {
                    let full = splice_sub(node, path, &prop);
                    if full != *node
                        && !has_innocuous_stacking(&full)
                        && loc::apply_patch(spec, &[(loc.clone(), full.clone())]).is_ok()
                        && !has_empty_typed_expr(&full, &base, &ty)
                    {
                        out.push((op, full));
                    }
                }
            }
        }
        out
    }
}

/// Depth-1 mutants of the subtree currently at `loc`, deduplicated, in
/// catalog emission order.
pub fn generate_mutants(spec: &Spec, loc: &Location) -> Vec<Mutant> {
    let Some(node) = loc::subtree_at(spec, loc) else {
        return Vec::new();
    };
    let mut seen: HashSet<Subtree> = HashSet::new();
    seen.insert(node.clone());
    Catalog
        .rewrites(spec, loc, &node)
        .into_iter()
        .filter(|(_, m)| seen.insert(m.clone()))
        .map(|(op, m)| Mutant {
            replacement: m,
            depth: 1,
            lineage: vec![op],
        })
        .collect()
}

/// Lazy breadth-first stream of mutants up to `max_depth`, deduplicated
/// across depths; level k+1 is materialized only when level k runs out.
pub struct MutantStream<'a> {
    spec: &'a Spec,
    loc: &'a Location,
    src: &'a dyn MutantSource,
    max_depth: usize,
    seen: HashSet<Subtree>,
    /// Previous level in emission order; parents of the next level.
    frontier: Vec<Mutant>,
    level: std::collections::VecDeque<Mutant>,
    depth: usize,
}

pub fn mutant_stream<'a>(spec: &'a Spec, loc: &'a Location, max_depth: usize) -> MutantStream<'a> {
    mutant_stream_with(&Catalog, spec, loc, max_depth)
}

pub fn mutant_stream_with<'a>(
    src: &'a dyn MutantSource,
    spec: &'a Spec,
    loc: &'a Location,
    max_depth: usize,
) -> MutantStream<'a> {
    let root = loc::subtree_at(spec, loc);
    let mut seen = HashSet::new();
    let frontier = match root {
        Some(node) => {
            seen.insert(node.clone());
            vec![Mutant {
                replacement: node,
                depth: 0,
                lineage: Vec::new(),
            }]
        }
        None => Vec::new(),
    };
    MutantStream {
        spec,
        loc,
        src,
        max_depth,
        seen,
        frontier,
        level: std::collections::VecDeque::new(),
        depth: 0,
    }
}

impl Iterator for MutantStream<'_> {
    type Item = Mutant;

    fn next(&mut self) -> Option<Mutant> {
        loop {
            if let Some(m) = self.level.pop_front() {
                self.frontier.push(m.clone());
                return Some(m);
            }
            if self.depth >= self.max_depth || self.frontier.is_empty() {
                return None;
            }
            self.depth += 1;
            let parents = std::mem::take(&mut self.frontier);
            for p in &parents {
                for (op, m) in self.src.rewrites(self.spec, self.loc, &p.replacement) {
                    if self.seen.insert(m.clone()) {
                        let mut lineage = p.lineage.clone();
                        lineage.push(op);
                        self.level.push_back(Mutant {
                            replacement: m,
                            depth: self.depth,
                            lineage,
                        });
                    }
                }
            }
        }
    }
}

/// Materialize levels 1..=max_depth as separate vectors, preserving stream
/// order within each level. `levels[d-1]` holds the depth-d mutants; the
/// repair engine needs the counts upfront to size the candidate space.
pub fn mutant_levels(spec: &Spec, loc: &Location, max_depth: usize) -> Vec<Vec<Mutant>> {
    mutant_levels_with(&Catalog, spec, loc, max_depth)
}

pub fn mutant_levels_with(
    src: &dyn MutantSource,
    spec: &Spec,
    loc: &Location,
    max_depth: usize,
) -> Vec<Vec<Mutant>> {
    let mut levels: Vec<Vec<Mutant>> = (0..max_depth).map(|_| Vec::new()).collect();
    for m in mutant_stream_with(src, spec, loc, max_depth) {
        levels[m.depth - 1].push(m);
    }
    levels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loc::{apply_patch, resolve_marker};
    use crate::parse::parse;
    use crate::print::{print_expr, print_formula};
    use std::collections::HashSet;

    const GRAPH: &str = "sig Node { link: set Node }\n\
        pred Hop[n: Node] { some n.^link }\n\
        pred Cmp2[x: Node, y: Node] { #x.link < #y.link }\n\
        pred Pair[a: Node, b: Node] { some a.link + b.link }\n";

    fn texts(spec: &Spec, marker: &str) -> Vec<String> {
        let loc = resolve_marker(spec, marker).unwrap();
        generate_mutants(spec, &loc)
            .into_iter()
            .map(|m| match m.replacement {
                Subtree::E(e) => print_expr(&e),
                Subtree::F(f) => print_formula(&f),
            })
            .collect()
    }

    #[test]
    fn catalog_has_the_documented_width() {
        assert_eq!(CATALOG.len(), 21);
    }

    #[test]
    fn closure_stacking_is_filtered() {
        let spec = parse(GRAPH).unwrap();
        // mutants of the expr `n.^link` (path: Mult body -> join)
        let ts = texts(&spec, "Hop/0/0");
        assert!(!ts.is_empty());
        for t in &ts {
            for bad in ["^^", "^*", "*^", "**", "~~"] {
                assert!(!t.contains(bad), "stacked unary survived: {t}");
            }
        }
        assert!(ts.iter().any(|t| t == "n.*link"), "{ts:?}");
    }

    #[test]
    fn comparison_operators_are_swept() {
        let spec = parse(GRAPH).unwrap();
        let ts = texts(&spec, "Cmp2");
        for want in ["<=", ">", ">=", "=", "!="] {
            let probe = format!("#x.link {want} #y.link");
            assert!(ts.contains(&probe), "missing {want} variant in {ts:?}");
        }
    }

    #[test]
    fn mutants_are_fresh_wellformed_and_distinct() {
        let spec = parse(GRAPH).unwrap();
        for marker in ["Hop", "Hop/0/0", "Cmp2", "Pair/0/0"] {
            let loc = resolve_marker(&spec, marker).unwrap();
            let original = Subtree::from_node(crate::loc::node_at(&spec, &loc).unwrap());
            let ms = generate_mutants(&spec, &loc);
            let mut seen = HashSet::new();
            for m in &ms {
                assert_eq!(m.depth, 1);
                assert_ne!(m.replacement, original, "{marker}: echoed the original");
                assert!(is_well_formed_mutant(&spec, &loc, &m.replacement));
                assert!(seen.insert(m.replacement.clone()), "{marker}: duplicate");
                // every mutant splices back into a typecheckable spec
                apply_patch(&spec, &[(loc.clone(), m.replacement.clone())]).unwrap();
            }
        }
    }

    #[test]
    fn streams_are_level_ordered_and_deduped_across_depths() {
        let spec = parse(GRAPH).unwrap();
        let loc = resolve_marker(&spec, "Cmp2").unwrap();
        let depth1: Vec<Subtree> =
            generate_mutants(&spec, &loc).into_iter().map(|m| m.replacement).collect();
        let stream: Vec<Mutant> = mutant_stream(&spec, &loc, 2).collect();
        let mut seen = HashSet::new();
        let mut last = 1;
        for m in &stream {
            assert!(m.depth >= last, "depth regressed");
            assert_eq!(m.depth, m.lineage.len());
            last = m.depth;
            assert!(seen.insert(m.replacement.clone()), "duplicate across depths");
        }
        let prefix: Vec<Subtree> =
            stream.iter().take(depth1.len()).map(|m| m.replacement.clone()).collect();
        assert_eq!(prefix, depth1, "depth-1 prefix must equal the single-step set");
        // `>` is reachable directly and as <= then > of <=; it must appear once
        let gt = stream
            .iter()
            .filter(|m| matches!(&m.replacement, Subtree::F(f) if print_formula(f) == "#x.link > #y.link"))
            .count();
        assert_eq!(gt, 1);
    }

    #[test]
    fn swapped_operands_are_one_mutant() {
        let spec = parse(GRAPH).unwrap();
        let ts = texts(&spec, "Pair/0/0");
        assert_eq!(ts.iter().filter(|t| *t == "b.link + a.link").count(), 1);
    }
}
