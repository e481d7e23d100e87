//! Bounded model finding by explicit backtracking enumeration.
//!
//! Extents come first: each top-level sig owns a dedicated atom block and
//! its extent ranges over subsets of that block (the full block when the
//! scope is exact, pinned singletons for `one` sigs); children draw
//! disjoint subsets from their parent, and an abstract sig's extent is the
//! union of its children. Fields follow, row by row per owner atom, under
//! the tightest multiplicity implied by the declaration and any fact
//! conjunct of the shape `all x: S | one x.f`. Fact conjuncts are
//! evaluated as soon as every relation they mention is assigned, pruning
//! whole subtrees of the enumeration. No symmetry breaking: instances are
//! visited in ascending bitmask order, empty sets first.
//!
//! Everything is deterministic; a work counter aborts runaway searches.

use crate::ast::*;
use crate::eval::EvalCtx;
use crate::instance::{Atom, FieldTable, Instance, TupleSet, Universe};
use crate::types;
use std::collections::HashSet;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("search exceeded the work limit of {limit} steps")]
    Resource { limit: u64 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub work_limit: u64,
}

impl Default for SolveOptions {
    fn default() -> SolveOptions {
        SolveOptions {
            work_limit: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    /// Fully assigned instances whose target formula was evaluated.
    pub instances: u64,
    /// Enumeration steps charged against the work limit.
    pub work: u64,
}

#[derive(Debug, Clone, Copy)]
struct Bound {
    n: u32,
    exact: bool,
}

fn sig_index(spec: &Spec, name: &str) -> usize {
    spec.sigs.iter().position(|s| s.name == name).unwrap()
}

fn sig_bounds(spec: &Spec, scope: &Scope) -> Result<Vec<Bound>, SolveError> {
    spec.sigs
        .iter()
        .map(|s| {
            let ov = scope.overrides.iter().find(|(n, _, _)| *n == s.name);
            let (mut n, mut exact) = match ov {
                Some((_, n, e)) => (*n, *e),
                None => (scope.default, false),
            };
            if s.qual == SigQual::One {
                if ov.is_some() && n != 1 {
                    return Err(SolveError::Invalid(format!(
                        "scope {} conflicts with `one sig {}`",
                        n, s.name
                    )));
                }
                n = 1;
                exact = true;
            }
            Ok(Bound { n, exact })
        })
        .collect()
}

/// Conjuncts of a body with top-level `&&` chains split apart; each piece
/// holds exactly when the original does, which sharpens staging.
fn flatten_conjuncts<'a>(body: &'a [Formula], out: &mut Vec<&'a Formula>) {
    fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
        if let FormulaKind::Conn(ConnOp::And, a, b) = &f.kind {
            go(a, out);
            go(b, out);
        } else {
            out.push(f);
        }
    }
    for f in body {
        go(f, out);
    }
}

/// Parents before children, otherwise declaration order.
fn topo_order(spec: &Spec) -> Vec<usize> {
    fn depth(spec: &Spec, i: usize) -> usize {
        let mut d = 0;
        let mut cur = &spec.sigs[i];
        while let Some(p) = &cur.parent {
            d += 1;
            cur = spec.sig(p).unwrap();
        }
        d
    }
    let mut order: Vec<usize> = (0..spec.sigs.len()).collect();
    order.sort_by_key(|&i| (depth(spec, i), i));
    order
}

/// Row multiplicity as a (min, max) occupancy band; None means unbounded.
#[derive(Debug, Clone, Copy)]
struct RowMult {
    min: u32,
    max: Option<u32>,
}

impl RowMult {
    fn of_decl(m: Mult) -> RowMult {
        match m {
            Mult::One => RowMult {
                min: 1,
                max: Some(1),
            },
            Mult::Lone => RowMult {
                min: 0,
                max: Some(1),
            },
            Mult::Set => RowMult { min: 0, max: None },
        }
    }

    fn of_op(m: MultOp) -> RowMult {
        match m {
            MultOp::No => RowMult {
                min: 0,
                max: Some(0),
            },
            MultOp::Some => RowMult { min: 1, max: None },
            MultOp::One => RowMult {
                min: 1,
                max: Some(1),
            },
            MultOp::Lone => RowMult {
                min: 0,
                max: Some(1),
            },
        }
    }

    fn tighten(self, o: RowMult) -> RowMult {
        let max = match (self.max, o.max) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) | (None, Some(a)) => Some(a),
            (None, None) => None,
        };
        RowMult {
            min: self.min.max(o.min),
            max,
        }
    }
}

/// Combine declared multiplicities with fact conjuncts of the shape
/// `all x: S | <mult> x.f` where S covers f's owner. The conjunct itself is
/// still evaluated later; this only narrows the rows enumerated.
fn effective_mults(spec: &Spec, fields: &FieldTable, conjuncts: &[&Formula]) -> Vec<RowMult> {
    let mut mults: Vec<RowMult> = fields
        .decls
        .iter()
        .map(|f| RowMult::of_decl(f.mult))
        .collect();
    let covers = |bound_sig: &str, owner_idx: usize| -> bool {
        let mut cur = &spec.sigs[owner_idx];
        loop {
            if cur.name == bound_sig {
                return true;
            }
            match &cur.parent {
                Some(p) => cur = spec.sig(p).unwrap(),
                None => return false,
            }
        }
    };
    {
        for conj in conjuncts {
            let FormulaKind::Quant {
                q: Quant::All,
                var,
                bound,
                body,
            } = &conj.kind
            else {
                continue;
            };
            let ExprKind::Ident(bound_sig) = &bound.kind else {
                continue;
            };
            let FormulaKind::Mult(m, e) = &body.kind else {
                continue;
            };
            let ExprKind::Bin(BinOp::Join, l, r) = &e.kind else {
                continue;
            };
            let (ExprKind::Ident(v), ExprKind::Ident(fname)) = (&l.kind, &r.kind) else {
                continue;
            };
            if v != var {
                continue;
            }
            let Some(fi) = fields.index_of(fname) else {
                continue;
            };
            if covers(bound_sig, fields.owner_sig[fi]) {
                mults[fi] = mults[fi].tighten(RowMult::of_op(*m));
            }
        }
    }
    mults
}

/// Extent cardinality bands from fact conjuncts of the shape `<mult> S` for
/// a declared sig S. As with field multiplicities, this only narrows the
/// enumeration; the conjunct is still evaluated.
fn extent_bands(spec: &Spec, conjuncts: &[&Formula]) -> Vec<RowMult> {
    let mut bands = vec![RowMult { min: 0, max: None }; spec.sigs.len()];
    for conj in conjuncts {
        let FormulaKind::Mult(m, e) = &conj.kind else {
            continue;
        };
        let ExprKind::Ident(name) = &e.kind else {
            continue;
        };
        if let Some(si) = spec.sigs.iter().position(|s| s.name == *name) {
            bands[si] = bands[si].tighten(RowMult::of_op(*m));
        }
    }
    bands
}

/// Field indices a formula can read, following pred calls.
fn field_refs(f: &Formula, spec: &Spec, fields: &FieldTable, out: &mut HashSet<usize>) {
    fn walk_f(
        f: &Formula,
        spec: &Spec,
        fields: &FieldTable,
        out: &mut HashSet<usize>,
        seen: &mut HashSet<usize>,
    ) {
        if let FormulaKind::Call { name, .. } = &f.kind {
            if let Some(pi) = spec.pred_index(name) {
                if seen.insert(pi) {
                    for g in &spec.preds[pi].body {
                        walk_f(g, spec, fields, out, seen);
                    }
                }
            }
        }
        for c in NodeRef::F(f).children() {
            match c {
                NodeRef::F(g) => walk_f(g, spec, fields, out, seen),
                NodeRef::E(e) => walk_e(e, spec, fields, out, seen),
            }
        }
    }
    fn walk_e(
        e: &Expr,
        spec: &Spec,
        fields: &FieldTable,
        out: &mut HashSet<usize>,
        seen: &mut HashSet<usize>,
    ) {
        if let ExprKind::Ident(name) = &e.kind {
            if let Some(fi) = fields.index_of(name) {
                out.insert(fi);
            }
        }
        for c in NodeRef::E(e).children() {
            match c {
                NodeRef::F(g) => walk_f(g, spec, fields, out, seen),
                NodeRef::E(e2) => walk_e(e2, spec, fields, out, seen),
            }
        }
    }
    walk_f(f, spec, fields, out, &mut HashSet::new());
}

enum Target {
    Run(Vec<Formula>),
    CheckNeg(Vec<Formula>),
}

/// A run of a parameterized pred asks for *some* argument tuple, so wrap
/// the body in existentials over the params.
fn run_target(p: &PredDecl) -> Vec<Formula> {
    if p.params.is_empty() {
        return p.body.clone();
    }
    let mut f = match p.body.len() {
        1 => p.body[0].clone(),
        _ => p.body[1..].iter().fold(p.body[0].clone(), |acc, g| {
            Formula::new(FormulaKind::Conn(ConnOp::And, Box::new(acc), Box::new(g.clone())))
        }),
    };
    for prm in p.params.iter().rev() {
        let bound = if prm.sig == "Int" {
            Expr::new(ExprKind::IntSet)
        } else {
            Expr::new(ExprKind::Ident(prm.sig.clone()))
        };
        f = Formula::new(FormulaKind::Quant {
            q: Quant::Some,
            var: prm.name.clone(),
            bound: Box::new(bound),
            body: Box::new(f),
        });
    }
    vec![f]
}

struct Search<'a> {
    spec: &'a Spec,
    fields: &'a FieldTable,
    bounds: Vec<Bound>,
    /// Extent cardinality bands extracted from the facts.
    bands: Vec<RowMult>,
    topo: Vec<usize>,
    mults: Vec<RowMult>,
    /// Fact conjuncts ready once extents are fixed.
    stage_pre: Vec<&'a Formula>,
    /// Fact conjuncts ready once field `k` is assigned.
    stage_field: Vec<Vec<&'a Formula>>,
    target: Target,
    limit: u64,
    stats: SolveStats,
}

impl<'a> Search<'a> {
    fn tick(&mut self) -> Result<(), SolveError> {
        self.stats.work += 1;
        if self.stats.work > self.limit {
            Err(SolveError::Resource { limit: self.limit })
        } else {
            Ok(())
        }
    }

    fn eval_stage(&self, inst: &Instance, stage: &[&Formula]) -> bool {
        if stage.is_empty() {
            return true;
        }
        let mut ctx = EvalCtx::new(self.spec, self.fields, inst);
        stage.iter().all(|f| ctx.formula(f, &mut Vec::new()))
    }

    fn enum_sig(
        &mut self,
        k: usize,
        inst: &mut Instance,
    ) -> Result<Option<Instance>, SolveError> {
        if k == self.topo.len() {
            return self.finish_sigs(inst);
        }
        let si = self.topo[k];
        let s = &self.spec.sigs[si];
        if s.qual == SigQual::Abstract {
            // Extent is the union of its children, finalized at the end.
            return self.enum_sig(k + 1, inst);
        }
        let u = inst.universe.clone();
        let pool: Vec<Atom> = match &s.parent {
            None => {
                let f = u.fam.sig_mask(&s.name).unwrap().trailing_zeros() as usize;
                u.family_atoms(f).collect()
            }
            Some(pname) => {
                let pidx = sig_index(self.spec, pname);
                let base: Vec<Atom> = if self.spec.sigs[pidx].qual == SigQual::Abstract {
                    let f = u.fam.sig_mask(pname).unwrap().trailing_zeros() as usize;
                    u.family_atoms(f).collect()
                } else {
                    inst.sigs[pidx].iter().map(|t| t[0]).collect()
                };
                // Siblings are disjoint: drop atoms claimed by any other
                // child of the same parent (unassigned ones are empty).
                let mut claimed: HashSet<Atom> = HashSet::new();
                for (ci, c) in self.spec.sigs.iter().enumerate() {
                    if ci != si && c.parent.as_deref() == Some(pname.as_str()) {
                        claimed.extend(inst.sigs[ci].iter().map(|t| t[0]));
                    }
                }
                base.into_iter().filter(|a| !claimed.contains(a)).collect()
            }
        };
        if pool.len() > 30 {
            return Err(SolveError::Resource { limit: self.limit });
        }
        let b = self.bounds[si];
        let band = self.bands[si];
        for mask in 0u64..(1u64 << pool.len()) {
            self.tick()?;
            let pc = mask.count_ones();
            if (b.exact && pc != b.n) || (!b.exact && pc > b.n) {
                continue;
            }
            if pc < band.min || band.max.is_some_and(|mx| pc > mx) {
                continue;
            }
            let atoms = pool
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1u64 << i) != 0)
                .map(|(_, &a)| crate::instance::Tup::of1(a));
            inst.sigs[si] = TupleSet::from_tuples(1, atoms);
            if let Some(found) = self.enum_sig(k + 1, inst)? {
                return Ok(Some(found));
            }
        }
        inst.sigs[si] = TupleSet::empty(1);
        Ok(None)
    }

    fn finish_sigs(&mut self, inst: &mut Instance) -> Result<Option<Instance>, SolveError> {
        // Abstract extents; all are top level so one pass suffices.
        for (si, s) in self.spec.sigs.iter().enumerate() {
            if s.qual != SigQual::Abstract {
                continue;
            }
            let mut ext = TupleSet::empty(1);
            for (ci, c) in self.spec.sigs.iter().enumerate() {
                if c.parent.as_deref() == Some(s.name.as_str()) {
                    ext = ext.union(&inst.sigs[ci]);
                }
            }
            let b = self.bounds[si];
            let pc = ext.len() as u32;
            if b.exact && pc != b.n {
                return Ok(None);
            }
            let band = self.bands[si];
            if pc < band.min || band.max.is_some_and(|mx| pc > mx) {
                return Ok(None);
            }
            inst.sigs[si] = ext;
        }
        if !self.eval_stage(inst, &self.stage_pre) {
            return Ok(None);
        }
        self.enum_field(0, inst)
    }

    fn enum_field(
        &mut self,
        fi: usize,
        inst: &mut Instance,
    ) -> Result<Option<Instance>, SolveError> {
        if fi == self.fields.len() {
            return self.final_eval(inst);
        }
        let owners: Vec<Atom> = inst.sigs[self.fields.owner_sig[fi]]
            .iter()
            .map(|t| t[0])
            .collect();
        let range: Vec<Atom> = {
            let r = &self.fields.decls[fi].range;
            if r == "Int" {
                let u = &inst.universe;
                u.family_atoms(u.fam.int).collect()
            } else {
                inst.sigs[sig_index(self.spec, r)].iter().map(|t| t[0]).collect()
            }
        };
        self.enum_rows(fi, &owners, &range, 0, inst)
    }

    fn enum_rows(
        &mut self,
        fi: usize,
        owners: &[Atom],
        range: &[Atom],
        oi: usize,
        inst: &mut Instance,
    ) -> Result<Option<Instance>, SolveError> {
        if oi == owners.len() {
            if !self.eval_stage(inst, &self.stage_field[fi]) {
                return Ok(None);
            }
            return self.enum_field(fi + 1, inst);
        }
        let owner = owners[oi];
        let m = self.mults[fi];
        // Row candidates in ascending-bitmask order, empty first.
        match m.max {
            Some(0) => {
                self.tick()?;
                if let Some(found) = self.enum_rows(fi, owners, range, oi + 1, inst)? {
                    return Ok(Some(found));
                }
            }
            Some(1) => {
                if m.min == 0 {
                    self.tick()?;
                    if let Some(found) = self.enum_rows(fi, owners, range, oi + 1, inst)? {
                        return Ok(Some(found));
                    }
                }
                for &r in range {
                    self.tick()?;
                    inst.fields[fi].insert(crate::instance::Tup::of2(owner, r));
                    let found = self.enum_rows(fi, owners, range, oi + 1, inst)?;
                    inst.fields[fi].remove(&[owner, r]);
                    if let Some(found) = found {
                        return Ok(Some(found));
                    }
                }
            }
            _ => {
                if range.len() > 30 {
                    return Err(SolveError::Resource { limit: self.limit });
                }
                for mask in 0u64..(1u64 << range.len()) {
                    self.tick()?;
                    if m.min == 1 && mask == 0 {
                        continue;
                    }
                    let rows: Vec<Atom> = range
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1u64 << i) != 0)
                        .map(|(_, &a)| a)
                        .collect();
                    for &r in &rows {
                        inst.fields[fi].insert(crate::instance::Tup::of2(owner, r));
                    }
                    let found = self.enum_rows(fi, owners, range, oi + 1, inst)?;
                    for &r in &rows {
                        inst.fields[fi].remove(&[owner, r]);
                    }
                    if let Some(found) = found {
                        return Ok(Some(found));
                    }
                }
            }
        }
        Ok(None)
    }

    fn final_eval(&mut self, inst: &Instance) -> Result<Option<Instance>, SolveError> {
        self.tick()?;
        self.stats.instances += 1;
        let mut ctx = EvalCtx::new(self.spec, self.fields, inst);
        let hit = match &self.target {
            Target::Run(body) => ctx.conj(body, &mut Vec::new()),
            Target::CheckNeg(body) => !ctx.conj(body, &mut Vec::new()),
        };
        Ok(if hit { Some(inst.clone()) } else { None })
    }
}

/// Search for an instance of the command's target: for `run`, facts plus
/// the pred body; for `check`, facts plus the negated assert body (a
/// counterexample). Returns the first instance in enumeration order.
pub fn solve_command(
    spec: &Spec,
    cmd: &Command,
    opts: &SolveOptions,
) -> Result<(Option<Instance>, SolveStats), SolveError> {
    let fam = types::families(spec).map_err(|e| SolveError::Invalid(e.to_string()))?;
    let fields = FieldTable::build(spec);
    let bounds = sig_bounds(spec, &cmd.scope)?;
    let bw = cmd.scope.bitwidth;
    if !(1..=8).contains(&bw) {
        return Err(SolveError::Invalid(format!("bitwidth {bw} out of range 1..=8")));
    }
    let mut counts = vec![0u32; fam.names.len()];
    for (si, s) in spec.sigs.iter().enumerate() {
        if s.parent.is_none() {
            let f = fam.sig_mask(&s.name).unwrap().trailing_zeros() as usize;
            counts[f] = bounds[si].n;
            if s.qual == SigQual::Abstract {
                // An abstract extent is the union of its children, so its
                // block is sized by the summed child scopes; the abstract's
                // own scope only matters when exact (checked at finish).
                let child_sum: u32 = spec
                    .sigs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.parent.as_deref() == Some(s.name.as_str()))
                    .map(|(ci, _)| bounds[ci].n)
                    .sum();
                counts[f] = if bounds[si].exact {
                    child_sum.max(bounds[si].n)
                } else {
                    child_sum
                };
            }
        }
    }
    let universe = Arc::new(Universe::build(fam, &counts, bw));

    let target = match cmd.kind {
        CmdKind::Run => {
            let p = spec.pred(&cmd.target).ok_or_else(|| {
                SolveError::Invalid(format!("unknown run target `{}`", cmd.target))
            })?;
            Target::Run(run_target(p))
        }
        CmdKind::Check => {
            let a = spec.assert_block(&cmd.target).ok_or_else(|| {
                SolveError::Invalid(format!("unknown check target `{}`", cmd.target))
            })?;
            Target::CheckNeg(a.body.clone())
        }
    };

    // Stage fact conjuncts (with && chains split) by the last field each
    // one mentions, so violations prune before deeper fields enumerate.
    let mut conjuncts: Vec<&Formula> = Vec::new();
    for fact in &spec.facts {
        flatten_conjuncts(&fact.body, &mut conjuncts);
    }
    let mut stage_pre = Vec::new();
    let mut stage_field: Vec<Vec<&Formula>> = vec![Vec::new(); fields.len()];
    for conj in &conjuncts {
        let mut refs = HashSet::new();
        field_refs(conj, spec, &fields, &mut refs);
        match refs.into_iter().max() {
            None => stage_pre.push(*conj),
            Some(k) => stage_field[k].push(*conj),
        }
    }

    let mut search = Search {
        spec,
        fields: &fields,
        bounds,
        bands: extent_bands(spec, &conjuncts),
        topo: topo_order(spec),
        mults: effective_mults(spec, &fields, &conjuncts),
        stage_pre,
        stage_field,
        target,
        limit: opts.work_limit,
        stats: SolveStats::default(),
    };
    let mut inst = Instance {
        universe,
        sigs: vec![TupleSet::empty(1); spec.sigs.len()],
        fields: vec![TupleSet::empty(2); fields.len()],
    };
    let found = search.enum_sig(0, &mut inst)?;
    Ok((found, search.stats))
}

#[derive(Debug, Clone)]
pub struct CmdOutcome {
    pub passed: bool,
    /// The found instance: a counterexample when a check or `expect 0` run
    /// fails, the satisfying instance when a `run` finds one.
    pub witness: Option<Instance>,
    pub stats: SolveStats,
}

/// Solve a command and fold in its expectation.
pub fn check_command(
    spec: &Spec,
    cmd: &Command,
    opts: &SolveOptions,
) -> Result<CmdOutcome, SolveError> {
    let (found, stats) = solve_command(spec, cmd, opts)?;
    let passed = match cmd.kind {
        CmdKind::Run => found.is_some() == cmd.expect_sat,
        CmdKind::Check => found.is_none(),
    };
    Ok(CmdOutcome {
        passed,
        witness: found,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessOutcome {
    /// Some witness dissolves the counterexample; no pruning.
    Found,
    /// No witness dissolves it: no completion at these locations can make
    /// the command pass, so the whole subtree is prunable.
    Exhausted,
    /// Domain over budget or semantics not faithfully representable.
    Unknown,
}

#[derive(Debug, Clone)]
pub struct WitnessSearch {
    pub outcome: WitnessOutcome,
    pub trials: u64,
}

fn unknown() -> WitnessSearch {
    WitnessSearch {
        outcome: WitnessOutcome::Unknown,
        trials: 0,
    }
}

/// Variabilization: replace every remaining location with a free relation
/// and ask whether any valuation dissolves the counterexample `cex` for
/// `cmd`. Context variables range over the universe atoms of their typed
/// families; expr locations add `arity` unconstrained columns. The search
/// enumerates all subsets of the combined domain (ascending, empty first)
/// and gives up as Unknown when the domain exceeds `cap` tuples.
pub fn exists_witness(
    patched: &Spec,
    cmd: &Command,
    remaining: &[Location],
    cex: &Instance,
    cap: u32,
) -> WitnessSearch {
    debug_assert!(!remaining.is_empty());
    let Ok(fam) = types::families(patched) else {
        return unknown();
    };
    let u = &cex.universe;

    // Per-slot domains and replacement nodes.
    let mut patch: Vec<(Location, Subtree)> = Vec::new();
    let mut domains: Vec<Vec<Vec<Atom>>> = Vec::new();
    for (slot, loc) in remaining.iter().enumerate() {
        let Ok(env) = types::env_at(patched, &fam, loc) else {
            return unknown();
        };
        let ctx: Vec<String> = env.iter().map(|(n, _)| n.clone()).collect();
        let mut cols: Vec<Vec<Atom>> = env
            .iter()
            .map(|(_, mask)| {
                (0..u.n_atoms())
                    .filter(|&a| mask & (1 << u.family_of(a)) != 0)
                    .collect()
            })
            .collect();
        let node = match loc.sort {
            LocSort::Formula => Subtree::F(Formula::new(FormulaKind::WitnessProbe {
                ctx,
                slot,
            })),
            LocSort::Expr => {
                let Ok(t) = types::bounding_type(patched, loc) else {
                    return unknown();
                };
                for _ in 0..t.len() {
                    cols.push((0..u.n_atoms()).collect());
                }
                Subtree::E(Expr::new(ExprKind::WitnessJoin {
                    ctx,
                    arity: t.len(),
                    slot,
                }))
            }
        };
        if cols.len() > crate::instance::MAX_ARITY {
            return unknown();
        }
        patch.push((loc.clone(), node));
        domains.push(cols);
    }

    // Flatten to one global bit per candidate tuple.
    let mut tuples: Vec<(usize, Vec<Atom>)> = Vec::new();
    for (slot, cols) in domains.iter().enumerate() {
        let mut cur: Vec<Vec<Atom>> = vec![Vec::new()];
        for col in cols {
            let mut next = Vec::new();
            for t in &cur {
                for &a in col {
                    let mut t2 = t.clone();
                    t2.push(a);
                    next.push(t2);
                }
            }
            cur = next;
            if cur.len() > cap as usize {
                return unknown();
            }
        }
        for t in cur {
            tuples.push((slot, t));
        }
        if tuples.len() > cap as usize {
            return unknown();
        }
    }
    let d = tuples.len() as u32;
    if d > cap {
        return unknown();
    }

    let Ok(varspec) = crate::loc::apply_patch(patched, &patch) else {
        return unknown();
    };
    let vfields = FieldTable::build(&varspec);
    let arities: Vec<usize> = domains.iter().map(|cols| cols.len()).collect();
    // The counterexample condition: for a run the body still holds on the
    // instance, for a check the assert still fails on it.
    let cex_cond: Vec<Formula> = match cmd.kind {
        CmdKind::Run => run_target(varspec.pred(&cmd.target).unwrap()),
        CmdKind::Check => varspec.assert_block(&cmd.target).unwrap().body.clone(),
    };

    let mut trials = 0u64;
    for mask in 0u64..(1u64 << d) {
        trials += 1;
        let mut ws: Vec<TupleSet> = arities.iter().map(|&a| TupleSet::empty(a)).collect();
        for (bit, (slot, t)) in tuples.iter().enumerate() {
            if mask & (1u64 << bit) != 0 {
                ws[*slot].insert_slice(t);
            }
        }
        let mut ctx = EvalCtx::new(&varspec, &vfields, cex);
        ctx.set_witness(&ws);
        let mut facts_hold = true;
        for fact in &varspec.facts {
            if !ctx.conj(&fact.body, &mut Vec::new()) {
                facts_hold = false;
                break;
            }
        }
        let still_cex = facts_hold
            && match cmd.kind {
                CmdKind::Run => ctx.conj(&cex_cond, &mut Vec::new()),
                CmdKind::Check => !ctx.conj(&cex_cond, &mut Vec::new()),
            };
        if ctx.witness_poison {
            return WitnessSearch {
                outcome: WitnessOutcome::Unknown,
                trials,
            };
        }
        if !still_cex {
            return WitnessSearch {
                outcome: WitnessOutcome::Found,
                trials,
            };
        }
    }
    WitnessSearch {
        outcome: WitnessOutcome::Exhausted,
        trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::EvalCtx;
    use crate::instance::FieldTable;
    use crate::loc::resolve_marker;
    use crate::parse::parse;

    #[test]
    fn some_none_is_unsat_at_any_scope() {
        let spec = parse("sig A {} pred P { some none } run P for 2 expect 1").unwrap();
        let out = check_command(&spec, &spec.commands[0], &SolveOptions::default()).unwrap();
        assert!(!out.passed && out.witness.is_none());
        let flipped = parse("sig A {} pred P { some none } run P for 2 expect 0").unwrap();
        let out = check_command(&flipped, &flipped.commands[0], &SolveOptions::default()).unwrap();
        assert!(out.passed);
    }

    #[test]
    fn tautology_checks_valid() {
        let spec =
            parse("sig A {} assert T { all x: univ | x in univ } check T for 2").unwrap();
        let out = check_command(&spec, &spec.commands[0], &SolveOptions::default()).unwrap();
        assert!(out.passed && out.witness.is_none());
    }

    #[test]
    fn work_limit_surfaces_as_a_resource_error() {
        let spec = parse("sig A { f: set A } pred P { some f } run P for 3 expect 1").unwrap();
        let res = solve_command(&spec, &spec.commands[0], &SolveOptions { work_limit: 1 });
        assert!(matches!(res, Err(SolveError::Resource { limit: 1 })));
    }

    #[test]
    fn witnesses_reverify_and_repeat_identically() {
        let spec = parse(
            "sig A { f: lone A } fact NoSelf { no f & iden } pred P { some f } \
             run P for 2 expect 1",
        )
        .unwrap();
        let opts = SolveOptions::default();
        let a = check_command(&spec, &spec.commands[0], &opts).unwrap();
        let b = check_command(&spec, &spec.commands[0], &opts).unwrap();
        assert!(a.passed);
        let (wa, wb) = (a.witness.unwrap(), b.witness.unwrap());
        let ft = FieldTable::build(&spec);
        assert_eq!(wa.render(&spec, &ft), wb.render(&spec, &ft), "nondeterministic witness");
        // the claimed instance satisfies facts and target under re-evaluation
        let mut ctx = EvalCtx::new(&spec, &ft, &wa);
        assert!(ctx.conj(&spec.facts[0].body, &mut Vec::new()));
        assert!(ctx.conj(&spec.preds[0].body, &mut Vec::new()));
    }

    // Witness search over a variabilized location: a rescuable body reports
    // Found, a body conjoined with an unrescuable contradiction exhausts,
    // and a domain above the cap is Unknown rather than a guess.
    #[test]
    fn witness_search_three_outcomes() {
        let spec = parse(
            "sig A {}\n\
             pred Mark { 0 = 1 }\n\
             assert W { Mark[] }\n\
             assert X { 0 = 1 && Mark[] }\n\
             check W for 2\n\
             check X for 2\n",
        )
        .unwrap();
        let opts = SolveOptions::default();
        let loc = resolve_marker(&spec, "Mark").unwrap();

        let w = check_command(&spec, &spec.commands[0], &opts).unwrap();
        let cex = w.witness.expect("W fails with a counterexample");
        let found = exists_witness(&spec, &spec.commands[0], &[loc.clone()], &cex, 24);
        assert_eq!(found.outcome, WitnessOutcome::Found);
        assert!(found.trials <= 2, "empty-context domain is one tuple");

        let x = check_command(&spec, &spec.commands[1], &opts).unwrap();
        let cex = x.witness.expect("X fails with a counterexample");
        let exhausted = exists_witness(&spec, &spec.commands[1], &[loc.clone()], &cex, 24);
        assert_eq!(exhausted.outcome, WitnessOutcome::Exhausted);

        let capped = exists_witness(&spec, &spec.commands[0], &[loc], &cex, 0);
        assert_eq!(capped.outcome, WitnessOutcome::Unknown);
    }
}
