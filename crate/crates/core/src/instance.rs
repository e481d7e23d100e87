//! Finite universes, tuple sets, and instances.
//!
//! Atoms are dense u32 indices. Each top-level family gets a block of
//! dedicated atoms (`List$0`, `List$1`, ...); Int atoms are one per value
//! representable at the configured bitwidth, in ascending order.
//!
//! Tuples are inline fixed-width arrays (arity capped at [`MAX_ARITY`],
//! enforced by the typechecker), so a relation is a sorted `Vec` of `Copy`
//! values: set algebra is pointer-free merging, clones are single memcpys,
//! and iteration order, and thus every downstream artifact, stays
//! deterministic.

use crate::ast::*;
use crate::types::Families;
use std::collections::HashMap;
use std::fmt::Write;
use std::sync::Arc;

pub type Atom = u32;

/// Widest relation the evaluator supports.
pub const MAX_ARITY: usize = 7;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tup {
    // Unused slots stay zero so derived comparisons equal slice order.
    len: u8,
    a: [Atom; MAX_ARITY],
}

impl Tup {
    pub fn from_slice(s: &[Atom]) -> Tup {
        debug_assert!(s.len() <= MAX_ARITY, "relation arity exceeds {MAX_ARITY}");
        let mut a = [0; MAX_ARITY];
        a[..s.len()].copy_from_slice(s);
        Tup {
            len: s.len() as u8,
            a,
        }
    }

    pub fn of1(x: Atom) -> Tup {
        let mut a = [0; MAX_ARITY];
        a[0] = x;
        Tup { len: 1, a }
    }

    pub fn of2(x: Atom, y: Atom) -> Tup {
        let mut a = [0; MAX_ARITY];
        a[0] = x;
        a[1] = y;
        Tup { len: 2, a }
    }

    /// `self[..keep]` followed by `tail`.
    fn splice(&self, keep: usize, tail: &[Atom]) -> Tup {
        debug_assert!(keep + tail.len() <= MAX_ARITY);
        let mut a = [0; MAX_ARITY];
        a[..keep].copy_from_slice(&self.a[..keep]);
        a[keep..keep + tail.len()].copy_from_slice(tail);
        Tup {
            len: (keep + tail.len()) as u8,
            a,
        }
    }

    pub fn as_slice(&self) -> &[Atom] {
        &self.a[..self.len as usize]
    }
}

impl std::ops::Deref for Tup {
    type Target = [Atom];
    fn deref(&self) -> &[Atom] {
        self.as_slice()
    }
}

impl std::fmt::Debug for Tup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.as_slice().fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TupleSet {
    arity: u8,
    /// Sorted, unique.
    items: Vec<Tup>,
}

impl TupleSet {
    pub fn empty(arity: usize) -> TupleSet {
        TupleSet {
            arity: arity as u8,
            items: Vec::new(),
        }
    }

    pub fn singleton(t: Tup) -> TupleSet {
        TupleSet {
            arity: t.len,
            items: vec![t],
        }
    }

    pub fn from_tuples(arity: usize, it: impl IntoIterator<Item = Tup>) -> TupleSet {
        let mut items: Vec<Tup> = it.into_iter().collect();
        debug_assert!(items.iter().all(|t| t.len as usize == arity));
        items.sort_unstable();
        items.dedup();
        TupleSet {
            arity: arity as u8,
            items,
        }
    }

    pub fn unary(it: impl IntoIterator<Item = Atom>) -> TupleSet {
        TupleSet::from_tuples(1, it.into_iter().map(Tup::of1))
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, t: &[Atom]) -> bool {
        self.items.binary_search(&Tup::from_slice(t)).is_ok()
    }

    pub fn insert(&mut self, t: Tup) {
        debug_assert_eq!(t.len as usize, self.arity());
        if let Err(i) = self.items.binary_search(&t) {
            self.items.insert(i, t);
        }
    }

    pub fn insert_slice(&mut self, t: &[Atom]) {
        self.insert(Tup::from_slice(t));
    }

    pub fn remove(&mut self, t: &[Atom]) {
        if let Ok(i) = self.items.binary_search(&Tup::from_slice(t)) {
            self.items.remove(i);
        }
    }

    /// Tuples as atom slices, ascending.
    pub fn iter(&self) -> impl Iterator<Item = &[Atom]> {
        self.items.iter().map(Tup::as_slice)
    }

    /// Tuples by value, ascending.
    pub fn tups(&self) -> impl Iterator<Item = Tup> + '_ {
        self.items.iter().copied()
    }

    pub fn union(&self, other: &TupleSet) -> TupleSet {
        debug_assert_eq!(self.arity, other.arity);
        let (a, b) = (&self.items, &other.items);
        let mut items = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    items.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    items.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    items.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        items.extend_from_slice(&a[i..]);
        items.extend_from_slice(&b[j..]);
        TupleSet {
            arity: self.arity,
            items,
        }
    }

    pub fn inter(&self, other: &TupleSet) -> TupleSet {
        debug_assert_eq!(self.arity, other.arity);
        let (a, b) = (&self.items, &other.items);
        let mut items = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    items.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        TupleSet {
            arity: self.arity,
            items,
        }
    }

    pub fn diff(&self, other: &TupleSet) -> TupleSet {
        debug_assert_eq!(self.arity, other.arity);
        let (a, b) = (&self.items, &other.items);
        let mut items = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() {
            if j == b.len() {
                items.extend_from_slice(&a[i..]);
                break;
            }
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    items.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        TupleSet {
            arity: self.arity,
            items,
        }
    }

    pub fn subset_of(&self, other: &TupleSet) -> bool {
        let (a, b) = (&self.items, &other.items);
        let mut j = 0;
        for t in a {
            while j < b.len() && b[j] < *t {
                j += 1;
            }
            if j == b.len() || b[j] != *t {
                return false;
            }
            j += 1;
        }
        true
    }

    pub fn product(&self, other: &TupleSet) -> TupleSet {
        // Lexicographic order of (a ++ b) follows the nesting, and products
        // of unique tuples are unique: sortedness is free.
        let mut items = Vec::with_capacity(self.items.len() * other.items.len());
        for a in &self.items {
            for b in &other.items {
                items.push(a.splice(a.len as usize, b.as_slice()));
            }
        }
        TupleSet {
            arity: self.arity + other.arity,
            items,
        }
    }

    /// Rows of `other` whose head equals `last`: sortedness makes this a
    /// binary-searched range.
    fn head_range(other: &[Tup], last: Atom) -> std::ops::Range<usize> {
        let lo = other.partition_point(|t| t.a[0] < last);
        let hi = other.partition_point(|t| t.a[0] <= last);
        lo..hi
    }

    pub fn join(&self, other: &TupleSet) -> TupleSet {
        debug_assert!(self.arity() + other.arity() >= 3);
        let mut items = Vec::new();
        for a in &self.items {
            let keep = a.len as usize - 1;
            for b in &other.items[Self::head_range(&other.items, a.a[keep])] {
                items.push(a.splice(keep, &b.as_slice()[1..]));
            }
        }
        items.sort_unstable();
        items.dedup();
        TupleSet {
            arity: self.arity + other.arity - 2,
            items,
        }
    }

    pub fn transpose(&self) -> TupleSet {
        debug_assert_eq!(self.arity, 2);
        TupleSet::from_tuples(2, self.items.iter().map(|t| Tup::of2(t.a[1], t.a[0])))
    }

    /// Transitive closure by per-source reachability over the sorted edge
    /// list; sources ascend and each bitset drains in atom order, so the
    /// result is born sorted.
    pub fn closure(&self) -> TupleSet {
        debug_assert_eq!(self.arity, 2);
        let mut items = Vec::new();
        let edges = &self.items;
        let mut seen = AtomBits::new();
        let mut work: Vec<Atom> = Vec::new();
        let mut i = 0;
        while i < edges.len() {
            let src = edges[i].a[0];
            seen.clear();
            work.clear();
            work.push(src);
            while let Some(x) = work.pop() {
                for e in &edges[Self::head_range(edges, x)] {
                    if seen.set(e.a[1]) {
                        work.push(e.a[1]);
                    }
                }
            }
            for dst in seen.ones() {
                items.push(Tup::of2(src, dst));
            }
            while i < edges.len() && edges[i].a[0] == src {
                i += 1;
            }
        }
        TupleSet { arity: 2, items }
    }
}

/// Fixed 512-bit atom set for closure walks; universes stay well under it.
struct AtomBits {
    w: [u64; 8],
}

impl AtomBits {
    fn new() -> AtomBits {
        AtomBits { w: [0; 8] }
    }

    fn clear(&mut self) {
        self.w = [0; 8];
    }

    /// True when freshly set.
    fn set(&mut self, a: Atom) -> bool {
        let (i, b) = ((a / 64) as usize, a % 64);
        let fresh = self.w[i] & (1 << b) == 0;
        self.w[i] |= 1 << b;
        fresh
    }

    fn ones(&self) -> impl Iterator<Item = Atom> + '_ {
        self.w.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros();
                w &= w - 1;
                Some(i as u32 * 64 + b)
            })
        })
    }
}

#[derive(Debug)]
pub struct Universe {
    pub fam: Families,
    pub bitwidth: u32,
    names: Vec<String>,
    family_of: Vec<usize>,
    fam_range: Vec<(u32, u32)>,
    int_base: u32,
}

impl Universe {
    /// `counts[f]` is the atom count for family `f`; the Int family's count
    /// is ignored and derived from the bitwidth.
    pub fn build(fam: Families, counts: &[u32], bitwidth: u32) -> Universe {
        assert!((1..=8).contains(&bitwidth), "bitwidth must be in 1..=8");
        let mut names = Vec::new();
        let mut family_of = Vec::new();
        let mut fam_range = Vec::new();
        for (f, name) in fam.names.iter().enumerate() {
            let start = names.len() as u32;
            if f == fam.int {
                let lo = -(1i64 << (bitwidth - 1));
                let hi = (1i64 << (bitwidth - 1)) - 1;
                for v in lo..=hi {
                    names.push(v.to_string());
                    family_of.push(f);
                }
            } else {
                for i in 0..counts[f] {
                    names.push(format!("{name}${i}"));
                    family_of.push(f);
                }
            }
            fam_range.push((start, names.len() as u32));
        }
        assert!(names.len() <= 512, "universe exceeds 512 atoms");
        let int_base = fam_range[fam.int].0;
        Universe {
            fam,
            bitwidth,
            names,
            family_of,
            fam_range,
            int_base,
        }
    }

    pub fn n_atoms(&self) -> u32 {
        self.names.len() as u32
    }

    pub fn name(&self, a: Atom) -> &str {
        &self.names[a as usize]
    }

    pub fn family_of(&self, a: Atom) -> usize {
        self.family_of[a as usize]
    }

    pub fn family_atoms(&self, f: usize) -> std::ops::Range<u32> {
        let (a, b) = self.fam_range[f];
        a..b
    }

    pub fn int_min(&self) -> i64 {
        -(1i64 << (self.bitwidth - 1))
    }

    pub fn int_max(&self) -> i64 {
        (1i64 << (self.bitwidth - 1)) - 1
    }

    /// Two's-complement wraparound into the representable range.
    pub fn wrap(&self, v: i128) -> i64 {
        let m = 1i128 << self.bitwidth;
        let half = 1i128 << (self.bitwidth - 1);
        let r = ((v % m) + m) % m;
        (if r >= half { r - m } else { r }) as i64
    }

    pub fn int_value(&self, a: Atom) -> Option<i64> {
        if self.family_of(a) == self.fam.int {
            Some(self.int_min() + (a - self.int_base) as i64)
        } else {
            None
        }
    }

    /// Atom for an in-range value.
    pub fn int_atom(&self, v: i64) -> Atom {
        debug_assert!(v >= self.int_min() && v <= self.int_max());
        self.int_base + (v - self.int_min()) as u32
    }

    pub fn univ_set(&self) -> TupleSet {
        TupleSet::unary(0..self.n_atoms())
    }

    pub fn iden_set(&self) -> TupleSet {
        TupleSet::from_tuples(2, (0..self.n_atoms()).map(|a| Tup::of2(a, a)))
    }

    pub fn int_set(&self) -> TupleSet {
        TupleSet::unary(self.family_atoms(self.fam.int))
    }
}

/// Global field table: owners and declarations in declaration order.
#[derive(Debug, Clone)]
pub struct FieldTable {
    pub owner_sig: Vec<usize>,
    pub decls: Vec<FieldDecl>,
    index: HashMap<String, usize>,
}

impl FieldTable {
    pub fn build(spec: &Spec) -> FieldTable {
        let mut t = FieldTable {
            owner_sig: Vec::new(),
            decls: Vec::new(),
            index: HashMap::new(),
        };
        for (si, s) in spec.sigs.iter().enumerate() {
            for f in &s.fields {
                t.index.insert(f.name.clone(), t.decls.len());
                t.owner_sig.push(si);
                t.decls.push(f.clone());
            }
        }
        t
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub universe: Arc<Universe>,
    /// Extent per sig, aligned with `spec.sigs`.
    pub sigs: Vec<TupleSet>,
    /// Value per field, aligned with `FieldTable`.
    pub fields: Vec<TupleSet>,
}

impl Instance {
    pub fn sig_set(&self, spec: &Spec, name: &str) -> Option<&TupleSet> {
        spec.sigs
            .iter()
            .position(|s| s.name == name)
            .map(|i| &self.sigs[i])
    }

    /// Render for reports: one `name = {..}` line per sig and field, in
    /// declaration order, tuples in lexicographic atom order.
    pub fn render(&self, spec: &Spec, fields: &FieldTable) -> String {
        let mut out = String::new();
        let u = &self.universe;
        let fmt_ts = |ts: &TupleSet| -> String {
            let items: Vec<String> = ts
                .iter()
                .map(|t| {
                    if t.len() == 1 {
                        u.name(t[0]).to_string()
                    } else {
                        let parts: Vec<&str> = t.iter().map(|&a| u.name(a)).collect();
                        format!("({})", parts.join(", "))
                    }
                })
                .collect();
            format!("{{{}}}", items.join(", "))
        };
        for (i, s) in spec.sigs.iter().enumerate() {
            writeln!(out, "{} = {}", s.name, fmt_ts(&self.sigs[i])).unwrap();
        }
        for (i, f) in fields.decls.iter().enumerate() {
            writeln!(out, "{} = {}", f.name, fmt_ts(&self.fields[i])).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts2(pairs: &[(Atom, Atom)]) -> TupleSet {
        TupleSet::from_tuples(2, pairs.iter().map(|&(a, b)| Tup::of2(a, b)))
    }

    #[test]
    fn merges_agree_with_naive_sets() {
        let a = TupleSet::unary([1, 3, 5, 7]);
        let b = TupleSet::unary([3, 4, 7, 9]);
        let union: Vec<Atom> = a.union(&b).iter().map(|t| t[0]).collect();
        assert_eq!(union, [1, 3, 4, 5, 7, 9]);
        let inter: Vec<Atom> = a.inter(&b).iter().map(|t| t[0]).collect();
        assert_eq!(inter, [3, 7]);
        let diff: Vec<Atom> = a.diff(&b).iter().map(|t| t[0]).collect();
        assert_eq!(diff, [1, 5]);
        assert!(TupleSet::unary([3, 7]).subset_of(&a));
        assert!(!a.subset_of(&b));
    }

    #[test]
    fn join_matches_relational_composition() {
        let r = ts2(&[(0, 1), (1, 1), (2, 0)]);
        let s = ts2(&[(1, 5), (0, 9)]);
        let j: Vec<(Atom, Atom)> = r.join(&s).iter().map(|t| (t[0], t[1])).collect();
        assert_eq!(j, [(0, 5), (1, 5), (2, 9)]);
    }

    #[test]
    fn closure_reaches_along_chains_and_cycles() {
        // 0 -> 1 -> 2 -> 1 (cycle), 3 isolated edge 3 -> 3.
        let r = ts2(&[(0, 1), (1, 2), (2, 1), (3, 3)]);
        let c: Vec<(Atom, Atom)> = r.closure().iter().map(|t| (t[0], t[1])).collect();
        assert_eq!(
            c,
            [(0, 1), (0, 2), (1, 1), (1, 2), (2, 1), (2, 2), (3, 3)]
        );
    }

    #[test]
    fn product_and_transpose_orderings() {
        let a = TupleSet::unary([2, 1]);
        let b = TupleSet::unary([9, 4]);
        let p: Vec<(Atom, Atom)> = a.product(&b).iter().map(|t| (t[0], t[1])).collect();
        assert_eq!(p, [(1, 4), (1, 9), (2, 4), (2, 9)]);
        let t: Vec<(Atom, Atom)> = ts2(&[(0, 2), (1, 2)])
            .transpose()
            .iter()
            .map(|t| (t[0], t[1]))
            .collect();
        assert_eq!(t, [(2, 0), (2, 1)]);
    }
}
