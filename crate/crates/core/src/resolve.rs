//! Post-parse validation: name uniqueness, reference resolution, binder
//! hygiene, extends-graph shape, command targets, and call-graph acyclicity.

use crate::ast::*;
use crate::parse::ParseError;
use std::collections::{HashMap, HashSet};

fn err(span: Span, msg: String) -> ParseError {
    ParseError::Resolve { span, msg }
}

pub fn validate(spec: &Spec) -> Result<(), ParseError> {
    let mut sig_names = HashSet::new();
    for s in &spec.sigs {
        if s.name == "Int" {
            return Err(err(s.span, "`Int` is reserved".into()));
        }
        if !sig_names.insert(s.name.as_str()) {
            return Err(err(s.span, format!("duplicate sig `{}`", s.name)));
        }
    }
    // Parents exist and the extends graph is a forest.
    let idx: HashMap<&str, usize> = spec
        .sigs
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.as_str(), i))
        .collect();
    for s in &spec.sigs {
        if let Some(p) = &s.parent {
            if !idx.contains_key(p.as_str()) {
                return Err(err(s.span, format!("unknown parent sig `{p}`")));
            }
            // Abstract extents are defined as the union of their children,
            // which only composes cleanly at the top of the hierarchy.
            if s.qual == SigQual::Abstract {
                return Err(err(s.span, format!("abstract sig `{}` cannot extend", s.name)));
            }
        }
    }
    for (i, s) in spec.sigs.iter().enumerate() {
        let mut seen = HashSet::from([i]);
        let mut cur = s;
        while let Some(p) = &cur.parent {
            let pi = idx[p.as_str()];
            if !seen.insert(pi) {
                return Err(err(s.span, format!("cyclic extends through `{}`", s.name)));
            }
            cur = &spec.sigs[pi];
        }
    }

    // Field names are globally unique and distinct from sig names.
    let mut field_names = HashSet::new();
    for s in &spec.sigs {
        for f in &s.fields {
            if f.name == "Int" {
                return Err(err(f.span, "`Int` is reserved".into()));
            }
            if sig_names.contains(f.name.as_str()) {
                return Err(err(
                    f.span,
                    format!("field `{}` collides with a sig name", f.name),
                ));
            }
            if !field_names.insert(f.name.as_str()) {
                return Err(err(f.span, format!("duplicate field `{}`", f.name)));
            }
            if f.range != "Int" && !sig_names.contains(f.range.as_str()) {
                return Err(err(f.span, format!("unknown field range `{}`", f.range)));
            }
        }
    }

    // Facts, preds and asserts share one namespace so location markers can
    // name any of them unambiguously.
    let mut block_names = HashSet::new();
    let blocks = spec
        .facts
        .iter()
        .map(|b| (b.name.as_str(), b.span))
        .chain(spec.preds.iter().map(|p| (p.name.as_str(), p.span)))
        .chain(spec.asserts.iter().map(|b| (b.name.as_str(), b.span)));
    for (name, span) in blocks {
        if !block_names.insert(name) {
            return Err(err(span, format!("duplicate declaration name `{name}`")));
        }
    }

    let ctx = Ctx {
        spec,
        sigs: &sig_names,
        fields: &field_names,
    };

    for f in &spec.facts {
        for fla in &f.body {
            ctx.formula(fla, &mut Vec::new())?;
        }
    }
    for p in &spec.preds {
        let mut env = Vec::new();
        let mut pnames = HashSet::new();
        for param in &p.params {
            if !pnames.insert(param.name.as_str()) {
                return Err(err(
                    param.span,
                    format!("duplicate parameter `{}`", param.name),
                ));
            }
            if sig_names.contains(param.name.as_str())
                || field_names.contains(param.name.as_str())
            {
                return Err(err(
                    param.span,
                    format!("parameter `{}` shadows a declared name", param.name),
                ));
            }
            if param.sig != "Int" && !sig_names.contains(param.sig.as_str()) {
                return Err(err(param.span, format!("unknown sig `{}`", param.sig)));
            }
            env.push(param.name.clone());
        }
        for fla in &p.body {
            ctx.formula(fla, &mut env)?;
        }
    }
    for a in &spec.asserts {
        for fla in &a.body {
            ctx.formula(fla, &mut Vec::new())?;
        }
    }

    for c in &spec.commands {
        match c.kind {
            CmdKind::Run => {
                // Parameterized targets are run with params implicitly
                // existentially quantified.
                if spec.pred(&c.target).is_none() {
                    return Err(err(c.span, format!("run target `{}` is not a pred", c.target)));
                }
            }
            CmdKind::Check => {
                if spec.assert_block(&c.target).is_none() {
                    return Err(err(
                        c.span,
                        format!("check target `{}` is not an assert", c.target),
                    ));
                }
            }
        }
        for (sig, _, _) in &c.scope.overrides {
            if !sig_names.contains(sig.as_str()) {
                return Err(err(c.span, format!("scope names unknown sig `{sig}`")));
            }
        }
    }

    call_graph_acyclic(spec)?;
    Ok(())
}

struct Ctx<'a> {
    spec: &'a Spec,
    sigs: &'a HashSet<&'a str>,
    fields: &'a HashSet<&'a str>,
}

impl Ctx<'_> {
    fn formula(&self, f: &Formula, env: &mut Vec<String>) -> Result<(), ParseError> {
        match &f.kind {
            FormulaKind::Lit(_) | FormulaKind::WitnessProbe { .. } => Ok(()),
            FormulaKind::Cmp(_, l, r) => {
                self.expr(l, env)?;
                self.expr(r, env)
            }
            FormulaKind::Mult(_, e) => self.expr(e, env),
            FormulaKind::Not(g) => self.formula(g, env),
            FormulaKind::Conn(_, l, r) => {
                self.formula(l, env)?;
                self.formula(r, env)
            }
            FormulaKind::Quant { var, bound, body, .. } => {
                self.expr(bound, env)?;
                self.bind(var, f.span, env)?;
                self.formula(body, env)?;
                env.pop();
                Ok(())
            }
            FormulaKind::Call { name, args } => {
                let Some(p) = self.spec.pred(name) else {
                    return Err(err(f.span, format!("call to unknown pred `{name}`")));
                };
                if p.params.len() != args.len() {
                    return Err(err(
                        f.span,
                        format!(
                            "`{name}` takes {} argument(s), got {}",
                            p.params.len(),
                            args.len()
                        ),
                    ));
                }
                for a in args {
                    self.expr(a, env)?;
                }
                Ok(())
            }
        }
    }

    fn expr(&self, e: &Expr, env: &mut Vec<String>) -> Result<(), ParseError> {
        match &e.kind {
            ExprKind::Ident(name) => {
                if env.iter().any(|v| v == name)
                    || self.sigs.contains(name.as_str())
                    || self.fields.contains(name.as_str())
                {
                    Ok(())
                } else if self.spec.pred(name).is_some() {
                    Err(err(
                        e.span,
                        format!("`{name}` is a pred; call it with `{name}[..]`"),
                    ))
                } else {
                    Err(err(e.span, format!("unknown name `{name}`")))
                }
            }
            ExprKind::IntLit(_)
            | ExprKind::IntSet
            | ExprKind::Univ
            | ExprKind::Iden
            | ExprKind::NoneSet
            | ExprKind::WitnessJoin { .. } => Ok(()),
            ExprKind::Un(_, a) => self.expr(a, env),
            ExprKind::Bin(_, l, r) => {
                self.expr(l, env)?;
                self.expr(r, env)
            }
            ExprKind::Card(a) => self.expr(a, env),
            ExprKind::Compr { var, bound, body } => {
                self.expr(bound, env)?;
                self.bind(var, e.span, env)?;
                self.formula(body, env)?;
                env.pop();
                Ok(())
            }
        }
    }

    fn bind(&self, var: &str, span: Span, env: &mut Vec<String>) -> Result<(), ParseError> {
        if env.iter().any(|v| v == var)
            || self.sigs.contains(var)
            || self.fields.contains(var)
            || var == "Int"
        {
            return Err(err(span, format!("binder `{var}` shadows another name")));
        }
        env.push(var.to_string());
        Ok(())
    }
}

/// Pred-to-pred calls must not form a cycle; evaluation inlines them.
fn call_graph_acyclic(spec: &Spec) -> Result<(), ParseError> {
    fn calls_in(f: &Formula, out: &mut Vec<String>) {
        if let FormulaKind::Call { name, .. } = &f.kind {
            out.push(name.clone());
        }
        for c in NodeRef::F(f).children() {
            match c {
                NodeRef::F(g) => calls_in(g, out),
                NodeRef::E(e) => calls_in_expr(e, out),
            }
        }
    }
    fn calls_in_expr(e: &Expr, out: &mut Vec<String>) {
        if let ExprKind::Compr { body, .. } = &e.kind {
            calls_in(body, out);
        }
        for c in NodeRef::E(e).children() {
            match c {
                NodeRef::F(g) => calls_in(g, out),
                NodeRef::E(e2) => calls_in_expr(e2, out),
            }
        }
    }

    let mut edges: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, p) in spec.preds.iter().enumerate() {
        let mut names = Vec::new();
        for f in &p.body {
            calls_in(f, &mut names);
        }
        let mut tgts = Vec::new();
        for n in names {
            if let Some(j) = spec.pred_index(&n) {
                tgts.push(j);
            }
        }
        edges.insert(i, tgts);
    }
    // 0 = unvisited, 1 = on stack, 2 = done.
    let mut state = vec![0u8; spec.preds.len()];
    fn dfs(
        v: usize,
        edges: &HashMap<usize, Vec<usize>>,
        state: &mut [u8],
        spec: &Spec,
    ) -> Result<(), ParseError> {
        state[v] = 1;
        for &w in &edges[&v] {
            match state[w] {
                0 => dfs(w, edges, state, spec)?,
                1 => {
                    return Err(err(
                        spec.preds[w].span,
                        format!("recursive pred `{}`", spec.preds[w].name),
                    ))
                }
                _ => {}
            }
        }
        state[v] = 2;
        Ok(())
    }
    for i in 0..spec.preds.len() {
        if state[i] == 0 {
            dfs(i, &edges, &mut state, spec)?;
        }
    }
    Ok(())
}
