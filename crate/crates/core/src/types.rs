//! Relational typing over top-level families.
//!
//! A family is a top-level sig or Int; every sig belongs to the family of
//! its root ancestor. A relation type is one family bitmask per column.
//! The invariant the rest of the tool leans on: evaluating an expression in
//! any instance yields only tuples whose atoms lie in the typed families.
//! Reflexive closure is the one subtle case, since `*r` contains `iden`
//! over the whole universe; standalone it types as (univ, univ), but under
//! a join the identity part collapses, so `x.*r` types as `x.^r` unioned
//! column-wise with `x`.

use crate::ast::*;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{span}: {msg}")]
pub struct TypeError {
    pub span: Span,
    pub msg: String,
}

fn terr<T>(span: Span, msg: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError {
        span,
        msg: msg.into(),
    })
}

pub type Mask = u32;
pub type RelType = Vec<Mask>;

#[derive(Debug, Clone)]
pub struct Families {
    /// Family index to name; the last entry is always `Int`.
    pub names: Vec<String>,
    sig_family: HashMap<String, usize>,
    pub int: usize,
}

impl Families {
    pub fn univ_mask(&self) -> Mask {
        if self.names.len() >= 32 {
            u32::MAX
        } else {
            (1u32 << self.names.len()) - 1
        }
    }

    pub fn int_mask(&self) -> Mask {
        1 << self.int
    }

    /// Family mask of a sig name, with `Int` resolving to the Int family.
    pub fn sig_mask(&self, name: &str) -> Option<Mask> {
        if name == "Int" {
            return Some(self.int_mask());
        }
        self.sig_family.get(name).map(|i| 1 << i)
    }

    pub fn mask_names(&self, mask: Mask) -> Vec<&str> {
        (0..self.names.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.names[i].as_str())
            .collect()
    }

    pub fn describe(&self, t: &RelType) -> String {
        let cols: Vec<String> = t
            .iter()
            .map(|m| format!("{{{}}}", self.mask_names(*m).join(", ")))
            .collect();
        format!("[{}]", cols.join(", "))
    }
}

pub fn families(spec: &Spec) -> Result<Families, TypeError> {
    let mut names = Vec::new();
    let mut sig_family = HashMap::new();
    for s in &spec.sigs {
        if s.parent.is_none() {
            sig_family.insert(s.name.clone(), names.len());
            names.push(s.name.clone());
        }
    }
    // Children inherit the root ancestor's family; parents always precede
    // children after resolve, but walk up to be safe.
    for s in &spec.sigs {
        if s.parent.is_some() {
            let mut cur = s;
            while let Some(p) = &cur.parent {
                cur = spec.sig(p).unwrap();
            }
            sig_family.insert(s.name.clone(), sig_family[&cur.name]);
        }
    }
    let int = names.len();
    names.push("Int".to_string());
    if names.len() > 32 {
        return terr(
            Span::synthetic(),
            format!("too many top-level sigs ({}); limit is 31", names.len() - 1),
        );
    }
    Ok(Families {
        names,
        sig_family,
        int,
    })
}

/// Ordered binding environment: pred params first, then quantifier and
/// comprehension binders outside-in. Order matters to variabilization.
pub type Env = Vec<(String, Mask)>;

fn lookup(env: &Env, name: &str) -> Option<Mask> {
    env.iter().rev().find(|(n, _)| n == name).map(|(_, m)| *m)
}

pub struct Typer<'a> {
    pub spec: &'a Spec,
    pub fam: &'a Families,
}

impl<'a> Typer<'a> {
    pub fn new(spec: &'a Spec, fam: &'a Families) -> Typer<'a> {
        Typer { spec, fam }
    }

    pub fn check_formula(&self, f: &Formula, env: &mut Env) -> Result<(), TypeError> {
        match &f.kind {
            FormulaKind::Lit(_) | FormulaKind::WitnessProbe { .. } => Ok(()),
            FormulaKind::Cmp(op, l, r) => {
                let tl = self.type_of(l, env)?;
                let tr = self.type_of(r, env)?;
                if op.is_int() {
                    if tl.len() != 1 || tr.len() != 1 {
                        return terr(f.span, "integer comparison needs arity-1 operands");
                    }
                    let int = self.fam.int_mask();
                    if tl[0] & int == 0 || tr[0] & int == 0 {
                        return terr(f.span, "integer comparison needs Int-bearing operands");
                    }
                } else if tl.len() != tr.len() {
                    return terr(
                        f.span,
                        format!(
                            "comparison operands have arities {} and {}",
                            tl.len(),
                            tr.len()
                        ),
                    );
                }
                Ok(())
            }
            FormulaKind::Mult(_, e) => {
                self.type_of(e, env)?;
                Ok(())
            }
            FormulaKind::Not(g) => self.check_formula(g, env),
            FormulaKind::Conn(_, l, r) => {
                self.check_formula(l, env)?;
                self.check_formula(r, env)
            }
            FormulaKind::Quant { bound, var, body, .. } => {
                let tb = self.type_of(bound, env)?;
                if tb.len() != 1 {
                    return terr(bound.span, "quantifier bound must have arity 1");
                }
                env.push((var.clone(), tb[0]));
                let r = self.check_formula(body, env);
                env.pop();
                r
            }
            FormulaKind::Call { name, args } => {
                let Some(p) = self.spec.pred(name) else {
                    return terr(f.span, format!("unknown pred `{name}`"));
                };
                for (a, param) in args.iter().zip(&p.params) {
                    let ta = self.type_of(a, env)?;
                    if ta.len() != 1 {
                        return terr(a.span, "pred argument must have arity 1");
                    }
                    let pm = self.fam.sig_mask(&param.sig).unwrap_or(0);
                    if ta[0] & !pm != 0 {
                        return terr(
                            a.span,
                            format!(
                                "argument type {} not contained in parameter `{}: {}`",
                                self.fam.describe(&ta),
                                param.name,
                                param.sig
                            ),
                        );
                    }
                }
                Ok(())
            }
        }
    }

    pub fn type_of(&self, e: &Expr, env: &mut Env) -> Result<RelType, TypeError> {
        match &e.kind {
            ExprKind::Ident(name) => {
                if let Some(m) = lookup(env, name) {
                    return Ok(vec![m]);
                }
                if let Some(m) = self.fam.sig_mask(name) {
                    return Ok(vec![m]);
                }
                if let Some((owner, f)) = self.spec.field_owner(name) {
                    let lm = self.fam.sig_mask(&owner.name).unwrap();
                    let rm = self.fam.sig_mask(&f.range).unwrap();
                    return Ok(vec![lm, rm]);
                }
                terr(e.span, format!("unknown name `{name}`"))
            }
            ExprKind::IntLit(_) => Ok(vec![self.fam.int_mask()]),
            ExprKind::IntSet => Ok(vec![self.fam.int_mask()]),
            ExprKind::Univ => Ok(vec![self.fam.univ_mask()]),
            ExprKind::Iden => Ok(vec![self.fam.univ_mask(), self.fam.univ_mask()]),
            ExprKind::NoneSet => Ok(vec![0]),
            ExprKind::Card(a) => {
                self.type_of(a, env)?;
                Ok(vec![self.fam.int_mask()])
            }
            ExprKind::Un(UnOp::Transpose, a) => {
                let t = self.type_of(a, env)?;
                if t.len() != 2 {
                    return terr(e.span, "transpose needs a binary relation");
                }
                Ok(vec![t[1], t[0]])
            }
            ExprKind::Un(UnOp::Closure, a) => {
                let t = self.type_of(a, env)?;
                if t.len() != 2 {
                    return terr(e.span, "closure needs a binary relation");
                }
                Ok(t)
            }
            ExprKind::Un(UnOp::RClosure, a) => {
                let t = self.type_of(a, env)?;
                if t.len() != 2 {
                    return terr(e.span, "closure needs a binary relation");
                }
                // Standalone `*r` includes iden over everything.
                Ok(vec![self.fam.univ_mask(), self.fam.univ_mask()])
            }
            ExprKind::Bin(BinOp::Union, l, r) => {
                let (tl, tr) = (self.type_of(l, env)?, self.type_of(r, env)?);
                self.same_arity(e.span, &tl, &tr)?;
                Ok(tl.iter().zip(&tr).map(|(a, b)| a | b).collect())
            }
            ExprKind::Bin(BinOp::Diff, l, r) => {
                let (tl, tr) = (self.type_of(l, env)?, self.type_of(r, env)?);
                self.same_arity(e.span, &tl, &tr)?;
                Ok(tl)
            }
            ExprKind::Bin(BinOp::Inter, l, r) => {
                let (tl, tr) = (self.type_of(l, env)?, self.type_of(r, env)?);
                self.same_arity(e.span, &tl, &tr)?;
                Ok(tl.iter().zip(&tr).map(|(a, b)| a & b).collect())
            }
            ExprKind::Bin(BinOp::Product, l, r) => {
                let (mut tl, tr) = (self.type_of(l, env)?, self.type_of(r, env)?);
                tl.extend(tr);
                // Tuples are stored inline; see instance::MAX_ARITY.
                if tl.len() > crate::instance::MAX_ARITY {
                    return terr(e.span, format!("relation arity {} exceeds 7", tl.len()));
                }
                Ok(tl)
            }
            ExprKind::Bin(BinOp::Join, l, r) => self.type_join(e.span, l, r, env),
            ExprKind::Compr { var, bound, body } => {
                let tb = self.type_of(bound, env)?;
                if tb.len() != 1 {
                    return terr(bound.span, "comprehension bound must have arity 1");
                }
                env.push((var.clone(), tb[0]));
                let r = self.check_formula(body, env);
                env.pop();
                r?;
                Ok(vec![tb[0]])
            }
            ExprKind::WitnessJoin { arity, .. } => {
                Ok(vec![self.fam.univ_mask(); *arity])
            }
        }
    }

    fn same_arity(&self, span: Span, a: &RelType, b: &RelType) -> Result<(), TypeError> {
        if a.len() != b.len() {
            terr(
                span,
                format!("operands have arities {} and {}", a.len(), b.len()),
            )
        } else {
            Ok(())
        }
    }

    /// Join typing with the reflexive-closure distribution: the iden half
    /// of `*r` is the identity for join, so `x.*r : type(x.^r) | type(x)`.
    fn type_join(
        &self,
        span: Span,
        l: &Expr,
        r: &Expr,
        env: &mut Env,
    ) -> Result<RelType, TypeError> {
        if let ExprKind::Un(UnOp::RClosure, inner) = &r.kind {
            let closed = Expr::new(ExprKind::Un(UnOp::Closure, inner.clone()));
            let a = self.type_join(span, l, &closed, env)?;
            let b = self.type_of(l, env)?;
            return union_types(span, a, b);
        }
        if let ExprKind::Un(UnOp::RClosure, inner) = &l.kind {
            let closed = Expr::new(ExprKind::Un(UnOp::Closure, inner.clone()));
            let a = self.type_join(span, &closed, r, env)?;
            let b = self.type_of(r, env)?;
            return union_types(span, a, b);
        }
        let tl = self.type_of(l, env)?;
        let tr = self.type_of(r, env)?;
        if tl.len() + tr.len() < 3 {
            return terr(span, "join of two arity-1 expressions yields arity 0");
        }
        let overlap = tl[tl.len() - 1] & tr[0];
        let mut cols: RelType = tl[..tl.len() - 1].to_vec();
        cols.extend_from_slice(&tr[1..]);
        if overlap == 0 {
            // Provably empty join; zero columns flag it for mutant filters.
            for c in &mut cols {
                *c = 0;
            }
        }
        Ok(cols)
    }
}

fn union_types(span: Span, a: RelType, b: RelType) -> Result<RelType, TypeError> {
    if a.len() != b.len() {
        return terr(span, "union of different arities in closure typing");
    }
    Ok(a.iter().zip(&b).map(|(x, y)| x | y).collect())
}

pub fn param_env(spec: &Spec, fam: &Families, p: &PredDecl) -> Result<Env, TypeError> {
    let mut env = Env::new();
    for param in &p.params {
        let Some(m) = fam.sig_mask(&param.sig) else {
            return terr(param.span, format!("unknown sig `{}`", param.sig));
        };
        env.push((param.name.clone(), m));
    }
    let _ = spec;
    Ok(env)
}

pub fn typecheck_spec(spec: &Spec) -> Result<(), TypeError> {
    let fam = families(spec)?;
    let typer = Typer::new(spec, &fam);
    for f in &spec.facts {
        for fla in &f.body {
            typer.check_formula(fla, &mut Env::new())?;
        }
    }
    for p in &spec.preds {
        let mut env = param_env(spec, &fam, p)?;
        for fla in &p.body {
            typer.check_formula(fla, &mut env)?;
        }
    }
    for a in &spec.asserts {
        for fla in &a.body {
            typer.check_formula(fla, &mut Env::new())?;
        }
    }
    Ok(())
}

/// The binding environment in scope at a location, outermost first.
pub fn env_at(spec: &Spec, fam: &Families, loc: &Location) -> Result<Env, TypeError> {
    let typer = Typer::new(spec, fam);
    let mut env = match loc.decl.kind {
        DeclKind::Pred => param_env(spec, fam, &spec.preds[loc.decl.index])?,
        _ => Env::new(),
    };
    let body = spec
        .decl_body(loc.decl)
        .ok_or_else(|| TypeError {
            span: loc.span,
            msg: "location declaration out of range".into(),
        })?;
    let mut node = NodeRef::F(body.get(loc.path[0]).ok_or_else(|| TypeError {
        span: loc.span,
        msg: "location body index out of range".into(),
    })?);
    for &i in &loc.path[1..] {
        // Descending into a binder's body (child 1) brings the binder into
        // scope; its bound types in the env built so far.
        match node {
            NodeRef::F(f) => {
                if let FormulaKind::Quant { var, bound, .. } = &f.kind {
                    if i == 1 {
                        let tb = typer.type_of(bound, &mut env)?;
                        env.push((var.clone(), tb[0]));
                    }
                }
            }
            NodeRef::E(e) => {
                if let ExprKind::Compr { var, bound, .. } = &e.kind {
                    if i == 1 {
                        let tb = typer.type_of(bound, &mut env)?;
                        env.push((var.clone(), tb[0]));
                    }
                }
            }
        }
        node = node.child(i).ok_or_else(|| TypeError {
            span: loc.span,
            msg: "location path does not resolve".into(),
        })?;
    }
    Ok(env)
}

/// Type of the expression at an expr-sorted location, in context.
pub fn bounding_type(spec: &Spec, loc: &Location) -> Result<RelType, TypeError> {
    let fam = families(spec)?;
    let mut env = env_at(spec, &fam, loc)?;
    let node = crate::loc::node_at(spec, loc).ok_or_else(|| TypeError {
        span: loc.span,
        msg: "location does not resolve".into(),
    })?;
    match node {
        NodeRef::E(e) => Typer::new(spec, &fam).type_of(e, &mut env),
        NodeRef::F(_) => terr(loc.span, "bounding_type needs an expr location"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Expr, ExprKind, UnOp};
    use crate::loc::resolve_marker;
    use crate::parse::parse;

    const LIST: &str = "sig List { header: lone Node }\n\
                        sig Node { link: lone Node, elem: one Int }\n\
                        pred Q[This: List] { all n: This.header.*link | n.elem < n.link.elem }\n";

    fn masks(spec: &Spec) -> (Families, Mask, Mask) {
        let fam = families(spec).unwrap();
        let list = fam.sig_mask("List").unwrap();
        let node = fam.sig_mask("Node").unwrap();
        (fam, list, node)
    }

    #[test]
    fn closure_join_collapses_to_unary() {
        let spec = parse(LIST).unwrap();
        let (fam, _, node) = masks(&spec);
        let loc = resolve_marker(&spec, "Q/0/0").unwrap();
        let bound = crate::loc::node_at(&spec, &loc).unwrap();
        let NodeRef::E(e) = bound else { panic!("bound is an expr") };
        let mut env = param_env(&spec, &fam, &spec.preds[0]).unwrap();
        let t = Typer::new(&spec, &fam).type_of(e, &mut env).unwrap();
        assert_eq!(t, vec![node]);
    }

    #[test]
    fn transpose_swaps_columns() {
        let spec = parse(LIST).unwrap();
        let (fam, list, node) = masks(&spec);
        let e = Expr::new(ExprKind::Un(UnOp::Transpose, Box::new(Expr::ident("header"))));
        let t = Typer::new(&spec, &fam).type_of(&e, &mut Env::new()).unwrap();
        assert_eq!(t, vec![node, list]);
    }

    #[test]
    fn join_chains_fields() {
        let spec = parse(LIST).unwrap();
        let (fam, _, node) = masks(&spec);
        let e = Expr::new(ExprKind::Bin(
            crate::ast::BinOp::Join,
            Box::new(Expr::ident("link")),
            Box::new(Expr::ident("elem")),
        ));
        let t = Typer::new(&spec, &fam).type_of(&e, &mut Env::new()).unwrap();
        assert_eq!(t, vec![node, fam.int_mask()]);
    }

    #[test]
    fn closure_requires_binary() {
        assert!(parse("sig A {} pred P { some ^A }").is_ok());
        let spec = parse("sig A {} pred P { some ^A }").unwrap();
        assert!(typecheck_spec(&spec).is_err());
    }

    #[test]
    fn int_comparison_demands_int_operands() {
        for body in ["link < 0", "List < 0"] {
            let spec = parse(&format!("{LIST} pred R {{ {body} }}")).unwrap();
            assert!(typecheck_spec(&spec).is_err(), "{body} should not type");
        }
        let ok = parse(&format!("{LIST} pred R {{ Node.elem < 3 }}")).unwrap();
        assert!(typecheck_spec(&ok).is_ok());
    }

    #[test]
    fn env_at_tracks_binders() {
        let spec = parse(LIST).unwrap();
        let (fam, list, node) = masks(&spec);
        let loc = resolve_marker(&spec, "Q/0/1").unwrap();
        let env = env_at(&spec, &fam, &loc).unwrap();
        let shape: Vec<(&str, Mask)> = env.iter().map(|(n, m)| (n.as_str(), *m)).collect();
        assert_eq!(shape, [("This", list), ("n", node)]);
    }

    #[test]
    fn bounding_type_is_the_expr_type_in_context() {
        let spec = parse(LIST).unwrap();
        let fam = families(&spec).unwrap();
        let lhs = resolve_marker(&spec, "Q/0/1/0").unwrap();
        assert_eq!(bounding_type(&spec, &lhs).unwrap(), vec![fam.int_mask()]);
        // formula locations have no expression type
        let body = resolve_marker(&spec, "Q/0/1").unwrap();
        assert!(bounding_type(&spec, &body).is_err());
    }
}
