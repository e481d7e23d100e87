//! Deterministic pretty printer. Parens are minimal under the grammar's
//! precedence; reparsing printed output yields a structurally equal spec.
//!
//! Quantified formulas swallow everything to their right, so they print
//! bare only in rightmost positions and parenthesized elsewhere. A block
//! formula whose printed form starts with `-` is parenthesized so it cannot
//! merge into the previous line's trailing expression.

use crate::ast::*;
use std::fmt::Write;

// Formula precedence, weakest binds lowest.
const F_IFF: u8 = 1;
const F_IMPLIES: u8 = 2;
const F_OR: u8 = 3;
const F_AND: u8 = 4;
const F_UNARY: u8 = 5;

// Expression precedence.
const E_UNION: u8 = 1;
const E_INTER: u8 = 2;
const E_PRODUCT: u8 = 3;
const E_CARD: u8 = 4;
const E_JOIN: u8 = 5;
const E_PREFIX: u8 = 6;
const E_ATOM: u8 = 7;

pub fn print_spec(spec: &Spec) -> String {
    let mut out = String::new();
    for s in &spec.sigs {
        let qual = match s.qual {
            SigQual::Plain => "",
            SigQual::Abstract => "abstract ",
            SigQual::One => "one ",
        };
        write!(out, "{qual}sig {}", s.name).unwrap();
        if let Some(p) = &s.parent {
            write!(out, " extends {p}").unwrap();
        }
        if s.fields.is_empty() {
            out.push_str(" {}\n");
        } else {
            out.push_str(" {\n");
            for (i, f) in s.fields.iter().enumerate() {
                let sep = if i + 1 < s.fields.len() { "," } else { "" };
                writeln!(out, "  {}: {} {}{sep}", f.name, f.mult, f.range).unwrap();
            }
            out.push_str("}\n");
        }
    }
    for f in &spec.facts {
        write!(out, "\nfact {} ", f.name).unwrap();
        block(&mut out, &f.body);
    }
    for p in &spec.preds {
        write!(out, "\npred {}", p.name).unwrap();
        if !p.params.is_empty() {
            out.push('[');
            for (i, param) in p.params.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write!(out, "{}: {}", param.name, param.sig).unwrap();
            }
            out.push(']');
        }
        out.push(' ');
        block(&mut out, &p.body);
    }
    for a in &spec.asserts {
        write!(out, "\nassert {} ", a.name).unwrap();
        block(&mut out, &a.body);
    }
    if !spec.commands.is_empty() {
        out.push('\n');
    }
    for c in &spec.commands {
        if !c.is_oracle {
            out.push_str("//@no-oracle\n");
        }
        let kw = match c.kind {
            CmdKind::Run => "run",
            CmdKind::Check => "check",
        };
        write!(out, "{kw} {}", c.target).unwrap();
        let sc = &c.scope;
        if sc.default != DEFAULT_SCOPE || !sc.overrides.is_empty() {
            write!(out, " for {}", sc.default).unwrap();
            if !sc.overrides.is_empty() {
                out.push_str(" but ");
                for (i, (sig, n, exact)) in sc.overrides.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    if *exact {
                        out.push_str("exactly ");
                    }
                    write!(out, "{n} {sig}").unwrap();
                }
            }
        }
        if c.kind == CmdKind::Run && !c.expect_sat {
            out.push_str(" expect 0");
        }
        out.push('\n');
    }
    out
}

fn block(out: &mut String, body: &[Formula]) {
    if body.is_empty() {
        out.push_str("{}\n");
        return;
    }
    out.push_str("{\n");
    for f in body {
        let s = print_formula(f);
        if s.starts_with('-') {
            writeln!(out, "  ({s})").unwrap();
        } else {
            writeln!(out, "  {s}").unwrap();
        }
    }
    out.push_str("}\n");
}

pub fn print_formula(f: &Formula) -> String {
    let mut s = String::new();
    fmt_f(f, &mut s, 0, true);
    s
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    fmt_e(e, &mut s, 0);
    s
}

fn fmt_f(f: &Formula, out: &mut String, ctx: u8, rightmost: bool) {
    match &f.kind {
        FormulaKind::Lit(b) => out.push_str(if *b { "true" } else { "false" }),
        FormulaKind::Cmp(op, l, r) => {
            fmt_e(l, out, E_UNION);
            write!(out, " {} ", op.symbol()).unwrap();
            fmt_e(r, out, E_UNION);
        }
        FormulaKind::Mult(m, e) => {
            write!(out, "{} ", m.keyword()).unwrap();
            fmt_e(e, out, E_UNION);
        }
        FormulaKind::Not(g) => {
            out.push('!');
            fmt_f(g, out, F_UNARY, rightmost);
        }
        FormulaKind::Conn(op, l, r) => {
            let (p, right_assoc) = match op {
                ConnOp::Iff => (F_IFF, false),
                ConnOp::Implies => (F_IMPLIES, true),
                ConnOp::Or => (F_OR, false),
                ConnOp::And => (F_AND, false),
            };
            let wrap = p < ctx;
            if wrap {
                out.push('(');
            }
            let (lc, rc) = if right_assoc { (p + 1, p) } else { (p, p + 1) };
            fmt_f(l, out, lc, false);
            write!(out, " {} ", op.symbol()).unwrap();
            fmt_f(r, out, rc, if wrap { true } else { rightmost });
            if wrap {
                out.push(')');
            }
        }
        FormulaKind::Quant { q, var, bound, body } => {
            let wrap = !rightmost;
            if wrap {
                out.push('(');
            }
            write!(out, "{} {var}: ", q.keyword()).unwrap();
            fmt_e(bound, out, E_UNION);
            out.push_str(" | ");
            fmt_f(body, out, 0, true);
            if wrap {
                out.push(')');
            }
        }
        FormulaKind::Call { name, args } => {
            write!(out, "{name}[").unwrap();
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                fmt_e(a, out, E_UNION);
            }
            out.push(']');
        }
        FormulaKind::WitnessProbe { ctx: vars, slot } => {
            // Internal node, never written back to disk; not reparseable.
            write!(out, "$probe{slot}[{}]", vars.join(", ")).unwrap();
        }
    }
}

fn eprec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Bin(BinOp::Union | BinOp::Diff, ..) => E_UNION,
        ExprKind::Bin(BinOp::Inter, ..) => E_INTER,
        ExprKind::Bin(BinOp::Product, ..) => E_PRODUCT,
        ExprKind::Bin(BinOp::Join, ..) => E_JOIN,
        ExprKind::Card(_) => E_CARD,
        ExprKind::Un(..) => E_PREFIX,
        ExprKind::Ident(_)
        | ExprKind::IntLit(_)
        | ExprKind::IntSet
        | ExprKind::Univ
        | ExprKind::Iden
        | ExprKind::NoneSet
        | ExprKind::Compr { .. }
        | ExprKind::WitnessJoin { .. } => E_ATOM,
    }
}

fn fmt_e(e: &Expr, out: &mut String, ctx: u8) {
    let p = eprec(e);
    let wrap = p < ctx;
    if wrap {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Ident(s) => out.push_str(s),
        ExprKind::IntLit(n) => {
            write!(out, "{n}").unwrap();
        }
        ExprKind::IntSet => out.push_str("Int"),
        ExprKind::Univ => out.push_str("univ"),
        ExprKind::Iden => out.push_str("iden"),
        ExprKind::NoneSet => out.push_str("none"),
        ExprKind::Un(op, a) => {
            out.push_str(op.symbol());
            fmt_e(a, out, E_PREFIX);
        }
        ExprKind::Bin(op, l, r) => {
            let spaced = !matches!(op, BinOp::Join);
            fmt_e(l, out, p);
            if spaced {
                write!(out, " {} ", op.symbol()).unwrap();
            } else {
                out.push_str(op.symbol());
            }
            fmt_e(r, out, p + 1);
        }
        ExprKind::Card(a) => {
            out.push('#');
            fmt_e(a, out, E_JOIN);
        }
        ExprKind::Compr { var, bound, body } => {
            write!(out, "{{{var}: ").unwrap();
            fmt_e(bound, out, E_UNION);
            out.push_str(" | ");
            fmt_f(body, out, 0, true);
            out.push('}');
        }
        ExprKind::WitnessJoin { ctx: vars, arity, slot } => {
            write!(out, "$witness{slot}[{}]:{arity}", vars.join(", ")).unwrap();
        }
    }
    if wrap {
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;

    const RICH: &str = "abstract sig Shape {}\n\
        sig Circle extends Shape { r: one Int }\n\
        one sig World { all_shapes: set Shape }\n\
        fact Grounded { Shape in World.all_shapes }\n\
        pred Big[c: Circle] { c.r > 2 || (some s: Shape | s in Circle && #Circle >= 1) }\n\
        assert NonNeg { all c: Circle | lone c.r }\n\
        run Big for 3 but exactly 2 Circle expect 1\n\
        check NonNeg for 2\n";

    #[test]
    fn printed_text_reparses_equal_and_is_stable() {
        let spec = parse(RICH).unwrap();
        let once = print_spec(&spec);
        let again = parse(&once).unwrap();
        assert!(again == spec, "round trip changed the spec:\n{once}");
        assert_eq!(print_spec(&again), once, "printer not idempotent");
    }

    fn round(body: &str) -> String {
        let spec = parse(&format!("sig A {{ f: set A }} pred P[x: A] {{ {body} }}")).unwrap();
        print_formula(&spec.preds[0].body[0])
    }

    #[test]
    fn parens_are_minimal() {
        // && over || needs no parens, the converse does
        assert_eq!(round("(some x && no x) || x in A"), "some x && no x || x in A");
        assert_eq!(round("some x && (no x || x in A)"), "some x && (no x || x in A)");
        assert_eq!(round("some ((A + x).f)"), "some (A + x).f");
        assert_eq!(round("some (A.f + x)"), "some A.f + x");
        assert_eq!(round("no ^(~f)"), "no ^~f");
    }

    #[test]
    fn quantifiers_parenthesize_off_the_tail() {
        // left of && the quantifier would swallow the conjunct, so parens stay
        assert_eq!(
            round("(all y: A | some y.f) && no x"),
            "(all y: A | some y.f) && no x"
        );
        // in tail position it prints bare
        assert_eq!(round("no x && (all y: A | some y.f)"), "no x && all y: A | some y.f");
    }
}
