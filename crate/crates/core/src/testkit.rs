//! Test instruments, compiled only with the `testkit` feature: a seeded
//! generator for small well-typed specs, a naive full-enumeration solver used
//! to cross-check the staged search, random instances for evaluator laws, and
//! a fixed-branching mutant source whose space size is known in closed form.

use crate::ast::{
    CmdKind, CmpOp, Command, ExprKind, Formula, FormulaKind, Location, Mult, SigQual, Spec,
};
use crate::instance::{Atom, FieldTable, Instance, Tup, TupleSet, Universe};
use crate::mutate::{MutOp, MutantSource};
use crate::{types, Expr, Subtree};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Upper bound on the naive enumeration size a generated spec may require,
/// computed pessimistically (full blocks as extents).
pub const NAIVE_CAP: u128 = 200_000;

pub struct GenSpec {
    pub spec: Spec,
    pub text: String,
}

/// Generate a small random spec that parses, typechecks, and stays under
/// [`NAIVE_CAP`]. Same seed, same spec.
pub fn random_spec(seed: u64) -> GenSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..500 {
        let text = gen_text(&mut rng);
        let Ok(spec) = crate::parse(&text) else {
            continue;
        };
        if types::typecheck_spec(&spec).is_err() {
            continue;
        }
        let cmd = &spec.commands[0];
        match naive_size(&spec, cmd) {
            Some(n) if n <= NAIVE_CAP => return GenSpec { spec, text },
            _ => continue,
        }
    }
    panic!("seed {seed}: no viable spec in 500 attempts");
}

#[derive(Clone, Copy, PartialEq)]
enum Fam {
    Sig(usize),
    Int,
}

struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    sig_names: Vec<String>,
    /// (owner sig, name, mult, range)
    fields: Vec<(usize, String, Mult, Fam)>,
    env: Vec<(String, Fam)>,
    next_var: usize,
}

fn gen_text(rng: &mut ChaCha8Rng) -> String {
    let nsigs = rng.gen_range(1..=2usize);
    let sig_names: Vec<String> = (0..nsigs).map(|i| format!("{}", (b'A' + i as u8) as char)).collect();
    let nfields = rng.gen_range(0..=2usize);
    let mut fields = Vec::new();
    for i in 0..nfields {
        let owner = rng.gen_range(0..nsigs);
        // Int ranges are restricted to one/lone so the naive side never has
        // to enumerate subsets of a 2^bw-wide block.
        let (mult, range) = if rng.gen_bool(0.2) {
            (
                if rng.gen_bool(0.5) { Mult::One } else { Mult::Lone },
                Fam::Int,
            )
        } else {
            let m = match rng.gen_range(0..3) {
                0 => Mult::Set,
                1 => Mult::One,
                _ => Mult::Lone,
            };
            (m, Fam::Sig(rng.gen_range(0..nsigs)))
        };
        fields.push((owner, format!("f{i}"), mult, range));
    }

    let mut g = Gen {
        rng,
        sig_names,
        fields,
        env: Vec::new(),
        next_var: 0,
    };

    let mut out = String::new();
    for (i, name) in g.sig_names.iter().enumerate() {
        let decls: Vec<String> = g
            .fields
            .iter()
            .filter(|(o, ..)| *o == i)
            .map(|(_, fname, mult, range)| {
                let r = match range {
                    Fam::Sig(s) => g.sig_names[*s].clone(),
                    Fam::Int => "Int".to_string(),
                };
                format!("{fname}: {mult} {r}")
            })
            .collect();
        out.push_str(&format!("sig {name} {{ {} }}\n", decls.join(", ")));
    }
    if g.rng.gen_bool(0.6) {
        let n = g.rng.gen_range(1..=2);
        let body: Vec<String> = (0..n).map(|_| format!("  {}", g.formula(2))).collect();
        out.push_str(&format!("fact F0 {{\n{}\n}}\n", body.join("\n")));
    }
    let n = g.rng.gen_range(1..=2);
    let body: Vec<String> = (0..n).map(|_| format!("  {}", g.formula(2))).collect();
    out.push_str(&format!("pred P0 {{\n{}\n}}\n", body.join("\n")));
    out.push_str(&format!("assert A0 {{ {} }}\n", g.formula(2)));

    // Every sig gets an explicit scope so the naive side sees the same bounds.
    let scopes: Vec<String> = (0..g.sig_names.len())
        .map(|i| {
            let n = g.rng.gen_range(1..=3);
            let ex = if g.rng.gen_bool(0.4) { "exactly " } else { "" };
            format!("{ex}{n} {}", g.sig_names[i])
        })
        .collect();
    if g.rng.gen_bool(0.5) {
        let expect = if g.rng.gen_bool(0.5) { 1 } else { 0 };
        out.push_str(&format!("run P0 for {} expect {expect}\n", scopes.join(", ")));
    } else {
        out.push_str(&format!("check A0 for {}\n", scopes.join(", ")));
    }
    out
}

impl Gen<'_> {
    fn sig(&mut self) -> usize {
        self.rng.gen_range(0..self.sig_names.len())
    }

    fn formula(&mut self, d: u32) -> String {
        let roll = if d == 0 {
            self.rng.gen_range(0..3)
        } else {
            self.rng.gen_range(0..6)
        };
        match roll {
            0 => {
                let fam = self.sig();
                let a = self.unary(d, fam);
                let b = self.unary(d, fam);
                let op = ["in", "!in", "=", "!="][self.rng.gen_range(0..4)];
                format!("{a} {op} {b}")
            }
            1 => {
                let fam = self.sig();
                let e = self.unary(d, fam);
                let k = ["no", "some", "lone", "one"][self.rng.gen_range(0..4)];
                format!("{k} {e}")
            }
            2 => {
                let a = self.int_expr(d);
                let b = self.int_expr(d);
                let op = ["<", "<=", ">", ">=", "=", "!="][self.rng.gen_range(0..6)];
                format!("{a} {op} {b}")
            }
            3 => format!("!({})", self.formula(d - 1)),
            4 => {
                let a = self.formula(d - 1);
                let b = self.formula(d - 1);
                let op = ["&&", "||", "=>", "<=>"][self.rng.gen_range(0..4)];
                format!("({a}) {op} ({b})")
            }
            _ => {
                let q = ["all", "some", "no", "one", "lone"][self.rng.gen_range(0..5)];
                let (bound, fam) = if self.rng.gen_bool(0.15) {
                    ("Int".to_string(), Fam::Int)
                } else {
                    let s = self.sig();
                    (self.sig_names[s].clone(), Fam::Sig(s))
                };
                let v = format!("x{}", self.next_var);
                self.next_var += 1;
                self.env.push((v.clone(), fam));
                let body = self.formula(d - 1);
                self.env.pop();
                format!("{q} {v}: {bound} | ({body})")
            }
        }
    }

    /// Unary expression of the given sig family.
    fn unary(&mut self, d: u32, fam: usize) -> String {
        let vars: Vec<String> = self
            .env
            .iter()
            .filter(|(_, f)| *f == Fam::Sig(fam))
            .map(|(n, _)| n.clone())
            .collect();
        if d == 0 || self.rng.gen_bool(0.35) {
            if !vars.is_empty() && self.rng.gen_bool(0.6) {
                return vars[self.rng.gen_range(0..vars.len())].clone();
            }
            return self.sig_names[fam].clone();
        }
        // joins through a field landing in `fam`, or set algebra
        let into: Vec<usize> = (0..self.fields.len())
            .filter(|&i| self.fields[i].3 == Fam::Sig(fam))
            .collect();
        let back: Vec<usize> = (0..self.fields.len())
            .filter(|&i| self.fields[i].0 == fam && matches!(self.fields[i].3, Fam::Sig(_)))
            .collect();
        let square: Vec<usize> = into
            .iter()
            .copied()
            .filter(|&i| self.fields[i].0 == fam)
            .collect();
        let mut opts = vec![0, 0, 1]; // set ops twice, base once
        if !into.is_empty() {
            opts.push(2);
        }
        if !back.is_empty() {
            opts.push(3);
        }
        if !square.is_empty() {
            opts.push(4);
        }
        match opts[self.rng.gen_range(0..opts.len())] {
            0 => {
                let a = self.unary(d - 1, fam);
                let b = self.unary(d - 1, fam);
                let op = ["+", "&", "-"][self.rng.gen_range(0..3)];
                format!("({a} {op} {b})")
            }
            1 => self.unary(0, fam),
            2 => {
                let f = into[self.rng.gen_range(0..into.len())];
                let e = self.unary(d - 1, self.fields[f].0);
                format!("({e}.{})", self.fields[f].1)
            }
            3 => {
                let f = back[self.rng.gen_range(0..back.len())];
                let Fam::Sig(r) = self.fields[f].3 else { unreachable!() };
                let e = self.unary(d - 1, r);
                format!("({e}.~{})", self.fields[f].1)
            }
            _ => {
                let f = square[self.rng.gen_range(0..square.len())];
                let e = self.unary(d - 1, fam);
                let op = ["^", "*"][self.rng.gen_range(0..2)];
                format!("({e}.{op}{})", self.fields[f].1)
            }
        }
    }

    fn int_expr(&mut self, d: u32) -> String {
        let ints: Vec<String> = self
            .env
            .iter()
            .filter(|(_, f)| *f == Fam::Int)
            .map(|(n, _)| n.clone())
            .collect();
        let int_fields: Vec<usize> = (0..self.fields.len())
            .filter(|&i| self.fields[i].3 == Fam::Int)
            .collect();
        let mut opts = vec![0, 1];
        if !ints.is_empty() {
            opts.push(2);
        }
        if d > 0 && !int_fields.is_empty() {
            opts.push(3);
        }
        match opts[self.rng.gen_range(0..opts.len())] {
            0 => format!("{}", self.rng.gen_range(0..=3)),
            1 => {
                let fam = self.sig();
                format!("#{}", self.unary(d.saturating_sub(1), fam))
            }
            2 => ints[self.rng.gen_range(0..ints.len())].clone(),
            _ => {
                let f = int_fields[self.rng.gen_range(0..int_fields.len())];
                let e = self.unary(d - 1, self.fields[f].0);
                format!("({e}.{})", self.fields[f].1)
            }
        }
    }
}

/// Pessimistic naive enumeration size: extents assumed to be full blocks.
/// None when the spec uses features the naive solver refuses (sub-sigs,
/// quals, parameterized run targets) or the count overflows.
pub fn naive_size(spec: &Spec, cmd: &Command) -> Option<u128> {
    if spec
        .sigs
        .iter()
        .any(|s| s.parent.is_some() || s.qual != SigQual::Plain)
    {
        return None;
    }
    if cmd.kind == CmdKind::Run {
        let p = spec.preds.iter().find(|p| p.name == cmd.target)?;
        if !p.params.is_empty() {
            return None;
        }
    }
    let mut total: u128 = 1;
    let mut block = std::collections::HashMap::new();
    for s in &spec.sigs {
        let n = cmd.scope.count(&s.name);
        block.insert(s.name.clone(), n);
        let choices = if cmd.scope.exact(&s.name) {
            1u128
        } else {
            1u128.checked_shl(n)?
        };
        total = total.checked_mul(choices)?;
    }
    let int_block = 1u32.checked_shl(cmd.scope.bitwidth)?;
    for s in &spec.sigs {
        let bo = block[&s.name];
        for f in &s.fields {
            let br = if f.range == "Int" {
                int_block
            } else {
                *block.get(&f.range)?
            };
            let choices: u128 = match f.mult {
                Mult::Set => 1u128.checked_shl(bo.checked_mul(br)?)?,
                Mult::One => (br as u128).checked_pow(bo)?,
                Mult::Lone => (br as u128 + 1).checked_pow(bo)?,
            };
            total = total.checked_mul(choices)?;
        }
    }
    Some(total)
}

/// Decide the command by brute force: enumerate every extent assignment and
/// every multiplicity-respecting field value over those extents, evaluate
/// facts plus target on each. Returns whether any satisfying instance exists
/// (for checks: whether any counterexample exists), i.e. the same polarity as
/// `solve_command`'s witness. None when the spec is out of scope for this
/// reference.
pub fn naive_solve(spec: &Spec, cmd: &Command) -> Option<bool> {
    naive_size(spec, cmd)?;
    let fam = types::families(spec).ok()?;
    let ft = FieldTable::build(spec);
    let mut counts = vec![0u32; fam.names.len()];
    let fam_of: Vec<usize> = spec
        .sigs
        .iter()
        .map(|s| fam.names.iter().position(|n| *n == s.name).unwrap())
        .collect();
    for (i, s) in spec.sigs.iter().enumerate() {
        counts[fam_of[i]] = cmd.scope.count(&s.name);
    }
    let u = Arc::new(Universe::build(fam, &counts, cmd.scope.bitwidth));

    let negate;
    let target: &[Formula] = match cmd.kind {
        CmdKind::Run => {
            negate = false;
            &spec.preds.iter().find(|p| p.name == cmd.target)?.body
        }
        CmdKind::Check => {
            negate = true;
            &spec.asserts.iter().find(|a| a.name == cmd.target)?.body
        }
    };

    let sig_choices: Vec<Vec<TupleSet>> = spec
        .sigs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let atoms: Vec<Atom> = u.family_atoms(fam_of[i]).collect();
            if cmd.scope.exact(&s.name) {
                vec![TupleSet::unary(atoms)]
            } else {
                (0u64..1 << atoms.len())
                    .map(|m| TupleSet::unary(pick(&atoms, m)))
                    .collect()
            }
        })
        .collect();

    let mut extents = vec![TupleSet::empty(1); spec.sigs.len()];
    rec_sigs(
        spec, &ft, &u, &sig_choices, 0, &mut extents, target, negate,
    )
    .into()
}

fn pick(atoms: &[Atom], mask: u64) -> Vec<Atom> {
    atoms
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &a)| a)
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn rec_sigs(
    spec: &Spec,
    ft: &FieldTable,
    u: &Arc<Universe>,
    choices: &[Vec<TupleSet>],
    i: usize,
    extents: &mut Vec<TupleSet>,
    target: &[Formula],
    negate: bool,
) -> bool {
    if i == choices.len() {
        let mut fields = vec![TupleSet::empty(2); ft.len()];
        return rec_fields(spec, ft, u, 0, extents, &mut fields, target, negate);
    }
    for c in &choices[i] {
        extents[i] = c.clone();
        if rec_sigs(spec, ft, u, choices, i + 1, extents, target, negate) {
            return true;
        }
    }
    false
}

#[allow(clippy::too_many_arguments)]
fn rec_fields(
    spec: &Spec,
    ft: &FieldTable,
    u: &Arc<Universe>,
    fi: usize,
    extents: &[TupleSet],
    fields: &mut Vec<TupleSet>,
    target: &[Formula],
    negate: bool,
) -> bool {
    if fi == ft.len() {
        let inst = Instance {
            universe: u.clone(),
            sigs: extents.to_vec(),
            fields: fields.clone(),
        };
        let mut ctx = crate::eval::EvalCtx::new(spec, ft, &inst);
        let mut env = Vec::new();
        let facts_ok = spec.facts.iter().all(|f| ctx.conj(&f.body, &mut env));
        if !facts_ok {
            return false;
        }
        let t = ctx.conj(target, &mut env);
        return t != negate;
    }
    let owner = ft.owner_sig[fi];
    let decl = &ft.decls[fi];
    let own: Vec<Atom> = extents[owner].iter().map(|t| t[0]).collect();
    let rng_atoms: Vec<Atom> = if decl.range == "Int" {
        u.int_set().iter().map(|t| t[0]).collect()
    } else {
        let idx = spec.sigs.iter().position(|s| s.name == decl.range).unwrap();
        extents[idx].iter().map(|t| t[0]).collect()
    };
    let each = |fields: &mut Vec<TupleSet>, val: TupleSet| -> bool {
        fields[fi] = val;
        rec_fields(spec, ft, u, fi + 1, extents, fields, target, negate)
    };
    match decl.mult {
        Mult::Set => {
            let all: Vec<Tup> = own
                .iter()
                .flat_map(|&a| rng_atoms.iter().map(move |&b| Tup::of2(a, b)))
                .collect();
            for m in 0u64..1 << all.len() {
                let ts = TupleSet::from_tuples(
                    2,
                    all.iter()
                        .enumerate()
                        .filter(|(i, _)| m >> i & 1 == 1)
                        .map(|(_, &t)| t),
                );
                if each(fields, ts) {
                    return true;
                }
            }
            false
        }
        Mult::One | Mult::Lone => {
            // Odometer: one digit per owner atom; lone adds a "none" digit.
            let base = rng_atoms.len() + usize::from(decl.mult == Mult::Lone);
            if base == 0 {
                // `one` with an empty range: no legal value unless no owners.
                return own.is_empty() && each(fields, TupleSet::empty(2));
            }
            let mut digits = vec![0usize; own.len()];
            loop {
                let ts = TupleSet::from_tuples(
                    2,
                    own.iter().zip(&digits).filter_map(|(&a, &d)| {
                        if decl.mult == Mult::Lone {
                            (d > 0).then(|| Tup::of2(a, rng_atoms[d - 1]))
                        } else {
                            Some(Tup::of2(a, rng_atoms[d]))
                        }
                    }),
                );
                if each(fields, ts) {
                    return true;
                }
                let mut k = 0;
                loop {
                    if k == digits.len() {
                        return false;
                    }
                    digits[k] += 1;
                    if digits[k] < base {
                        break;
                    }
                    digits[k] = 0;
                    k += 1;
                }
            }
        }
    }
}

/// Fixture for evaluator-law tests: `sig S { link: set S }` with a random
/// extent and a random edge relation over it.
pub struct LawFixture {
    pub spec: Spec,
    pub fields: FieldTable,
    pub inst: Instance,
}

pub fn law_instance(seed: u64) -> LawFixture {
    let spec = crate::parse("sig S { link: set S }\n").expect("law fixture parses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fam = types::families(&spec).unwrap();
    let n = rng.gen_range(0..=5u32);
    let u = Arc::new(Universe::build(fam, &[n, 0], 3));
    let atoms: Vec<Atom> = u.family_atoms(0).collect();
    let ext = pick(&atoms, rng.gen::<u64>());
    let mut edges = Vec::new();
    for &a in &ext {
        for &b in &ext {
            if rng.gen_bool(0.4) {
                edges.push(Tup::of2(a, b));
            }
        }
    }
    let inst = Instance {
        universe: u,
        sigs: vec![TupleSet::unary(ext)],
        fields: vec![TupleSet::from_tuples(2, edges)],
    };
    LawFixture {
        fields: FieldTable::build(&spec),
        spec,
        inst,
    }
}

/// Mutant source with exactly three children per node, all fresh: rewrites
/// `0 = k` to `0 = 3k+1 | 3k+2 | 3k+3`. Labels stay injective across the
/// whole tree, so depth d holds exactly 3^d mutants.
pub struct Ternary;

impl MutantSource for Ternary {
    fn rewrites(&self, _spec: &Spec, _loc: &Location, node: &Subtree) -> Vec<(MutOp, Subtree)> {
        let Subtree::F(f) = node else {
            return Vec::new();
        };
        let FormulaKind::Cmp(CmpOp::Eq, l, r) = &f.kind else {
            return Vec::new();
        };
        let (ExprKind::IntLit(0), ExprKind::IntLit(k)) = (&l.kind, &r.kind) else {
            return Vec::new();
        };
        (1..=3)
            .map(|i| {
                let lit = |v: i64| Box::new(Expr::new(ExprKind::IntLit(v)));
                (
                    MutOp::IntNudge,
                    Subtree::F(Formula::new(FormulaKind::Cmp(CmpOp::Eq, lit(0), lit(3 * k + i)))),
                )
            })
            .collect()
    }
}

/// Single-location spec for accounting tests. The second conjunct keeps every
/// candidate unsatisfiable while the run target still depends on the marked
/// location, so neither prune can fire and the engine must sweep the whole
/// space. Drive it with [`Ternary`] and bitwidth 8 (labels reach 39 at depth
/// three).
pub const TERNARY_SRC: &str = "\
sig Thing {}

pred Gen {
  //@loc
  0 = 0
  0 = 1
}

run Gen for 3 expect 1
";

pub fn ternary_spec() -> (Spec, Location) {
    let spec = crate::parse(TERNARY_SRC).expect("ternary fixture parses");
    let loc = spec.markers[0].clone();
    (spec, loc)
}
