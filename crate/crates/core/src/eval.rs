//! Formula and expression evaluation over a fixed instance.
//!
//! Int comparisons coerce each operand to the sum of its Int atoms (empty
//! sums to 0, non-Int atoms are ignored) and wrap at the bitwidth, as does
//! cardinality. Pred calls bind parameters by value and must be acyclic.
//!
//! Two caches make the exhaustive sweeps affordable: closures of
//! variable-free operands are computed once per instance, and pred calls
//! memoize on (pred, argument values).

use crate::ast::*;
use crate::instance::{FieldTable, Instance, Tup, TupleSet};
use std::collections::HashMap;

pub type Env<'a> = Vec<(&'a str, TupleSet)>;

pub struct EvalCtx<'a> {
    pub spec: &'a Spec,
    pub fields: &'a FieldTable,
    pub inst: &'a Instance,
    /// One relation per variabilized location, indexed by slot.
    pub witness: Option<&'a [TupleSet]>,
    /// Set when a witness node saw a non-singleton context variable; the
    /// witness search must then report Unknown rather than prune.
    pub witness_poison: bool,
    closure_cache: HashMap<usize, TupleSet>,
    var_free: HashMap<usize, bool>,
    /// Pred-call results. Calls whose arguments are all singleton atoms,
    /// the overwhelmingly common case, key a packed u64; the rest key the
    /// argument vector itself.
    pred_memo: HashMap<(usize, u64), bool>,
    pred_memo_big: HashMap<(usize, Vec<TupleSet>), bool>,
}

/// Prefix-coded pack of singleton-atom arguments: 10 bits per atom, seeded
/// with 1 so different arities never collide.
fn small_key(vals: &[TupleSet]) -> Option<u64> {
    if vals.len() > 6 {
        return None;
    }
    let mut k: u64 = 1;
    for v in vals {
        if v.arity() != 1 || v.len() != 1 {
            return None;
        }
        k = (k << 10) | (v.iter().next().unwrap()[0] as u64 + 1);
    }
    Some(k)
}

impl<'a> EvalCtx<'a> {
    pub fn new(spec: &'a Spec, fields: &'a FieldTable, inst: &'a Instance) -> EvalCtx<'a> {
        EvalCtx {
            spec,
            fields,
            inst,
            witness: None,
            witness_poison: false,
            closure_cache: HashMap::new(),
            var_free: HashMap::new(),
            pred_memo: HashMap::new(),
            pred_memo_big: HashMap::new(),
        }
    }

    /// Swap witness relations between candidate assignments. Closure caches
    /// survive (witness-dependent exprs are never cached); pred memos do
    /// not, since pred bodies may contain probes.
    pub fn set_witness(&mut self, w: &'a [TupleSet]) {
        self.witness = Some(w);
        self.witness_poison = false;
        self.pred_memo.clear();
        self.pred_memo_big.clear();
    }

    pub fn conj(&mut self, body: &'a [Formula], env: &mut Env<'a>) -> bool {
        for f in body {
            if !self.formula(f, env) {
                return false;
            }
        }
        true
    }

    pub fn formula(&mut self, f: &'a Formula, env: &mut Env<'a>) -> bool {
        match &f.kind {
            FormulaKind::Lit(b) => *b,
            FormulaKind::Cmp(op, l, r) => self.cmp(*op, l, r, env),
            FormulaKind::Mult(m, e) => {
                let ts = self.expr(e, env);
                match m {
                    MultOp::No => ts.is_empty(),
                    MultOp::Some => !ts.is_empty(),
                    MultOp::One => ts.len() == 1,
                    MultOp::Lone => ts.len() <= 1,
                }
            }
            FormulaKind::Not(g) => !self.formula(g, env),
            FormulaKind::Conn(op, l, r) => {
                let a = self.formula(l, env);
                match op {
                    ConnOp::And => a && self.formula(r, env),
                    ConnOp::Or => a || self.formula(r, env),
                    ConnOp::Implies => !a || self.formula(r, env),
                    ConnOp::Iff => a == self.formula(r, env),
                }
            }
            FormulaKind::Quant { q, var, bound, body } => {
                let b = self.expr(bound, env);
                let mut count = 0usize;
                for t in b.tups() {
                    env.push((var, TupleSet::singleton(t)));
                    let holds = self.formula(body, env);
                    env.pop();
                    match q {
                        Quant::All => {
                            if !holds {
                                return false;
                            }
                        }
                        Quant::Some => {
                            if holds {
                                return true;
                            }
                        }
                        Quant::No => {
                            if holds {
                                return false;
                            }
                        }
                        Quant::One | Quant::Lone => {
                            if holds {
                                count += 1;
                                if count > 1 {
                                    return false;
                                }
                            }
                        }
                    }
                }
                match q {
                    Quant::All | Quant::No => true,
                    Quant::Some => false,
                    Quant::One => count == 1,
                    Quant::Lone => true,
                }
            }
            FormulaKind::Call { name, args } => {
                let idx = self.spec.pred_index(name).expect("resolved call");
                let vals: Vec<TupleSet> = args.iter().map(|a| self.expr(a, env)).collect();
                let small = small_key(&vals);
                if let Some(k) = small {
                    if let Some(&r) = self.pred_memo.get(&(idx, k)) {
                        return r;
                    }
                } else if let Some(&r) = self.pred_memo_big.get(&(idx, vals.clone())) {
                    return r;
                }
                let p = &self.spec.preds[idx];
                let mut penv: Env = p
                    .params
                    .iter()
                    .zip(vals.iter().cloned())
                    .map(|(param, v)| (param.name.as_str(), v))
                    .collect();
                let r = self.conj(&p.body, &mut penv);
                match small {
                    Some(k) => {
                        self.pred_memo.insert((idx, k), r);
                    }
                    None => {
                        self.pred_memo_big.insert((idx, vals), r);
                    }
                }
                r
            }
            FormulaKind::WitnessProbe { ctx, slot } => {
                let Some(t) = self.ctx_tuple(ctx, env) else {
                    return false;
                };
                let w = self.witness.expect("witness probe without witness");
                w[*slot].contains(&t)
            }
        }
    }

    fn ctx_tuple(&mut self, ctx: &[String], env: &Env<'a>) -> Option<Vec<u32>> {
        let mut t = Vec::with_capacity(ctx.len());
        for name in ctx {
            let v = env
                .iter()
                .rev()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v)
                .expect("witness context variable in scope");
            if v.arity() != 1 || v.len() != 1 {
                self.witness_poison = true;
                return None;
            }
            t.push(v.iter().next().unwrap()[0]);
        }
        Some(t)
    }

    fn cmp(&mut self, op: CmpOp, l: &'a Expr, r: &'a Expr, env: &mut Env<'a>) -> bool {
        if op.is_int() {
            let ta = self.expr(l, env);
            let tb = self.expr(r, env);
            let (a, b) = (self.sum(&ta), self.sum(&tb));
            return match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
                _ => unreachable!(),
            };
        }
        let a = self.expr(l, env);
        let b = self.expr(r, env);
        match op {
            CmpOp::In => a.subset_of(&b),
            CmpOp::NotIn => !a.subset_of(&b),
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            _ => unreachable!(),
        }
    }

    fn sum(&self, ts: &TupleSet) -> i64 {
        let u = &self.inst.universe;
        let mut acc: i128 = 0;
        for t in ts.iter() {
            if t.len() == 1 {
                if let Some(v) = u.int_value(t[0]) {
                    acc += v as i128;
                }
            }
        }
        u.wrap(acc)
    }

    pub fn expr(&mut self, e: &'a Expr, env: &mut Env<'a>) -> TupleSet {
        match &e.kind {
            ExprKind::Ident(name) => {
                if let Some((_, v)) = env.iter().rev().find(|(n, _)| n == name) {
                    return v.clone();
                }
                if let Some(ts) = self.inst.sig_set(self.spec, name) {
                    return ts.clone();
                }
                let fi = self.fields.index_of(name).expect("resolved ident");
                self.inst.fields[fi].clone()
            }
            ExprKind::IntLit(n) => {
                let u = &self.inst.universe;
                let v = u.wrap(*n as i128);
                TupleSet::singleton(Tup::of1(u.int_atom(v)))
            }
            ExprKind::IntSet => self.inst.universe.int_set(),
            ExprKind::Univ => self.inst.universe.univ_set(),
            ExprKind::Iden => self.inst.universe.iden_set(),
            ExprKind::NoneSet => TupleSet::empty(1),
            ExprKind::Un(op, a) => {
                let key = e as *const Expr as usize;
                if matches!(op, UnOp::Closure | UnOp::RClosure) {
                    if let Some(c) = self.closure_cache.get(&key) {
                        return c.clone();
                    }
                }
                let ta = self.expr(a, env);
                let r = match op {
                    UnOp::Transpose => ta.transpose(),
                    UnOp::Closure => ta.closure(),
                    UnOp::RClosure => ta.closure().union(&self.inst.universe.iden_set()),
                };
                if matches!(op, UnOp::Closure | UnOp::RClosure) && self.is_var_free(e) {
                    self.closure_cache.insert(key, r.clone());
                }
                r
            }
            ExprKind::Bin(op, l, r) => {
                let a = self.expr(l, env);
                let b = self.expr(r, env);
                match op {
                    BinOp::Union => a.union(&b),
                    BinOp::Diff => a.diff(&b),
                    BinOp::Inter => a.inter(&b),
                    BinOp::Join => a.join(&b),
                    BinOp::Product => a.product(&b),
                }
            }
            ExprKind::Card(a) => {
                let ts = self.expr(a, env);
                let u = &self.inst.universe;
                let v = u.wrap(ts.len() as i128);
                TupleSet::singleton(Tup::of1(u.int_atom(v)))
            }
            ExprKind::Compr { var, bound, body } => {
                let b = self.expr(bound, env);
                let mut out = TupleSet::empty(1);
                for t in b.tups() {
                    env.push((var, TupleSet::singleton(t)));
                    let holds = self.formula(body, env);
                    env.pop();
                    if holds {
                        out.insert(t);
                    }
                }
                out
            }
            ExprKind::WitnessJoin { ctx, arity, slot } => {
                let Some(prefix) = self.ctx_tuple(ctx, env) else {
                    return TupleSet::empty(*arity);
                };
                let w = &self.witness.expect("witness join without witness")[*slot];
                let mut out = TupleSet::empty(*arity);
                for t in w.iter() {
                    if t.len() == prefix.len() + arity && t[..prefix.len()] == prefix[..] {
                        out.insert_slice(&t[prefix.len()..]);
                    }
                }
                out
            }
        }
    }

    /// Static property: every Ident names a sig or field. Binders cannot
    /// shadow declared names, so this is env-independent.
    fn is_var_free(&mut self, e: &Expr) -> bool {
        let key = e as *const Expr as usize;
        if let Some(&b) = self.var_free.get(&key) {
            return b;
        }
        let b = self.compute_var_free_e(e);
        self.var_free.insert(key, b);
        b
    }

    fn compute_var_free_e(&self, e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Ident(name) => {
                self.spec.sig(name).is_some() || self.fields.index_of(name).is_some()
            }
            ExprKind::WitnessJoin { .. } => false,
            ExprKind::Compr { .. } => false,
            _ => NodeRef::E(e).children().iter().all(|c| match c {
                NodeRef::E(x) => self.compute_var_free_e(x),
                NodeRef::F(_) => false,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Tup, Universe};
    use crate::loc::{node_at, resolve_marker};
    use crate::parse::parse;
    use crate::types::families;
    use std::sync::Arc;

    // List$0 = atom 0, Node$0 = 1, Node$1 = 2; header l0 -> n0, link n0 -> n1 -> n1.
    const WALK: &str = "sig List { header: lone Node }\n\
        sig Node { link: set Node }\n\
        pred Walk[l: List] { some l.header.*link }\n\
        pred Loop[n: Node] { n.^link = n.*link }\n";

    fn cycle() -> (Spec, FieldTable, Instance) {
        let spec = parse(WALK).unwrap();
        let u = Arc::new(Universe::build(families(&spec).unwrap(), &[1, 2, 0], 3));
        let ft = FieldTable::build(&spec);
        let inst = Instance {
            universe: u,
            sigs: vec![TupleSet::unary([0]), TupleSet::unary([1, 2])],
            fields: vec![
                TupleSet::from_tuples(2, [Tup::of2(0, 1)]),
                TupleSet::from_tuples(2, [Tup::of2(1, 2), Tup::of2(2, 2)]),
            ],
        };
        (spec, ft, inst)
    }

    fn expr_at(spec: &Spec, marker: &str) -> Expr {
        let loc = resolve_marker(spec, marker).unwrap();
        match node_at(spec, &loc).unwrap() {
            crate::ast::NodeRef::E(e) => e.clone(),
            _ => panic!("{marker} is not an expr"),
        }
    }

    #[test]
    fn join_walks_and_reflexive_closure_reaches_fixpoint() {
        let (spec, ft, inst) = cycle();
        let e = expr_at(&spec, "Walk/0/0");
        let mut ctx = EvalCtx::new(&spec, &ft, &inst);
        let mut env: Env = vec![("l", TupleSet::singleton(Tup::of1(0)))];
        assert_eq!(ctx.expr(&e, &mut env), TupleSet::unary([1, 2]));
    }

    #[test]
    fn transpose_flips_pairs() {
        let (spec, ft, inst) = cycle();
        let e = Expr::new(ExprKind::Un(UnOp::Transpose, Box::new(Expr::ident("link"))));
        let mut ctx = EvalCtx::new(&spec, &ft, &inst);
        assert_eq!(
            ctx.expr(&e, &mut Env::new()),
            TupleSet::from_tuples(2, [Tup::of2(2, 1), Tup::of2(2, 2)])
        );
    }

    #[test]
    fn cycle_entry_and_member_disagree_on_closures() {
        let (spec, ft, inst) = cycle();
        let f = &spec.preds[1].body[0];
        let mut ctx = EvalCtx::new(&spec, &ft, &inst);
        // n1 sits on the loop: ^link and *link agree there
        let mut env: Env = vec![("n", TupleSet::singleton(Tup::of1(2)))];
        assert!(ctx.formula(f, &mut env));
        // n0 only enters it: *link keeps n0, ^link does not
        let mut env: Env = vec![("n", TupleSet::singleton(Tup::of1(1)))];
        assert!(!ctx.formula(f, &mut env));
    }

    #[test]
    fn vacuous_quantification_holds() {
        let spec = parse("sig X {} pred V { all n: none | 0 = 1 }").unwrap();
        let u = Arc::new(Universe::build(families(&spec).unwrap(), &[0, 0], 3));
        let inst = Instance {
            universe: u,
            sigs: vec![TupleSet::empty(1)],
            fields: vec![],
        };
        let ft = FieldTable::build(&spec);
        let mut ctx = EvalCtx::new(&spec, &ft, &inst);
        assert!(ctx.formula(&spec.preds[0].body[0], &mut Env::new()));
    }

    // counting wraps at the bitwidth: 3 atoms at bitwidth 2 counts as -1
    // (literals wrap the same way, so `= 3` still holds there)
    #[test]
    fn cardinality_wraps_at_the_bitwidth() {
        let src = "sig Node { link: set Node }\n\
                   pred C { #{n: Node | n in Node} = 3 }\n\
                   pred W { #Node = -1 }\n";
        let spec = parse(src).unwrap();
        let ft = FieldTable::build(&spec);
        for (bw, wraps) in [(4, false), (2, true)] {
            let u = Arc::new(Universe::build(families(&spec).unwrap(), &[3, 0], bw));
            let inst = Instance {
                universe: u,
                sigs: vec![TupleSet::unary([0, 1, 2])],
                fields: vec![TupleSet::empty(2)],
            };
            let mut ctx = EvalCtx::new(&spec, &ft, &inst);
            assert!(ctx.formula(&spec.preds[0].body[0], &mut Env::new()), "bw {bw}");
            assert_eq!(ctx.formula(&spec.preds[1].body[0], &mut Env::new()), wraps);
        }
    }

    #[test]
    fn strict_order_fails_on_a_self_loop() {
        let src = "sig Node { link: lone Node, elem: one Int }\n\
                   pred Lt[n: Node] { n.elem < n.link.elem }\n\
                   pred Le[n: Node] { n.elem <= n.link.elem }\n";
        let spec = parse(src).unwrap();
        let u = Arc::new(Universe::build(families(&spec).unwrap(), &[1, 0], 3));
        let zero = u.int_atom(0);
        let inst = Instance {
            universe: u,
            sigs: vec![TupleSet::unary([0])],
            fields: vec![
                TupleSet::from_tuples(2, [Tup::of2(0, 0)]),
                TupleSet::from_tuples(2, [Tup::of2(0, zero)]),
            ],
        };
        let ft = FieldTable::build(&spec);
        let mut ctx = EvalCtx::new(&spec, &ft, &inst);
        let mut env: Env = vec![("n", TupleSet::singleton(Tup::of1(0)))];
        assert!(!ctx.formula(&spec.preds[0].body[0], &mut env), "0 < 0");
        assert!(ctx.formula(&spec.preds[1].body[0], &mut env), "0 <= 0");
    }

    // integer comparisons coerce sets by summing their int atoms
    #[test]
    fn int_comparison_sums_sets() {
        let src = "sig Node { elem: one Int }\n\
                   pred S { Node.elem > 2 }\n\
                   pred T { Node.elem > 3 }\n";
        let spec = parse(src).unwrap();
        let u = Arc::new(Universe::build(families(&spec).unwrap(), &[2, 0], 3));
        let (one, two) = (u.int_atom(1), u.int_atom(2));
        let inst = Instance {
            universe: u,
            sigs: vec![TupleSet::unary([0, 1])],
            fields: vec![TupleSet::from_tuples(2, [Tup::of2(0, one), Tup::of2(1, two)])],
        };
        let ft = FieldTable::build(&spec);
        let mut ctx = EvalCtx::new(&spec, &ft, &inst);
        assert!(ctx.formula(&spec.preds[0].body[0], &mut Env::new()), "1 + 2 > 2");
        assert!(!ctx.formula(&spec.preds[1].body[0], &mut Env::new()), "1 + 2 > 3");
    }
}
