use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use relfix_core::ast::{BinOp, ConnOp, ExprKind, FormulaKind, MultOp, Quant, UnOp};
use relfix_core::eval::EvalCtx;
use relfix_core::testkit::law_instance;
use relfix_core::{Expr, Formula};

fn bx(e: Expr) -> Box<Expr> {
    Box::new(e)
}

// random binary relational expr over `link`
fn rel(rng: &mut ChaCha8Rng, d: u32) -> Expr {
    if d == 0 || rng.gen_bool(0.3) {
        return Expr::ident("link");
    }
    match rng.gen_range(0..5) {
        0 => Expr::new(ExprKind::Un(UnOp::Transpose, bx(rel(rng, d - 1)))),
        1 => Expr::new(ExprKind::Un(UnOp::Closure, bx(rel(rng, d - 1)))),
        2 => Expr::new(ExprKind::Bin(BinOp::Union, bx(rel(rng, d - 1)), bx(rel(rng, d - 1)))),
        3 => Expr::new(ExprKind::Bin(BinOp::Diff, bx(rel(rng, d - 1)), bx(rel(rng, d - 1)))),
        _ => Expr::new(ExprKind::Bin(BinOp::Join, bx(rel(rng, d - 1)), bx(rel(rng, d - 1)))),
    }
}

fn body(rng: &mut ChaCha8Rng, var: &str) -> Formula {
    let x = || Expr::ident(var);
    match rng.gen_range(0..3) {
        0 => Formula::new(FormulaKind::Mult(
            match rng.gen_range(0..4) {
                0 => MultOp::No,
                1 => MultOp::Some,
                2 => MultOp::One,
                _ => MultOp::Lone,
            },
            bx(Expr::new(ExprKind::Bin(BinOp::Join, bx(x()), bx(rel(rng, 1))))),
        )),
        1 => Formula::new(FormulaKind::Cmp(
            relfix_core::ast::CmpOp::In,
            bx(x()),
            bx(Expr::new(ExprKind::Bin(BinOp::Join, bx(x()), bx(rel(rng, 1))))),
        )),
        _ => Formula::new(FormulaKind::Conn(
            ConnOp::Or,
            Box::new(body(rng, var)),
            Box::new(Formula::new(FormulaKind::Mult(MultOp::Some, bx(x())))),
        )),
    }
}

#[test]
#[ignore]
fn probe() {
    let t0 = std::time::Instant::now();
    for seed in 0..500u64 {
        let fx = law_instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut ctx = EvalCtx::new(&fx.spec, &fx.fields, &fx.inst);
        let mut env = Vec::new();

        let r = rel(&mut rng, 3);
        // *r == ^r + iden
        let star = Expr::new(ExprKind::Un(UnOp::RClosure, bx(r.clone())));
        let plus_iden = Expr::new(ExprKind::Bin(
            BinOp::Union,
            bx(Expr::new(ExprKind::Un(UnOp::Closure, bx(r.clone())))),
            bx(Expr::new(ExprKind::Iden)),
        ));
        assert_eq!(ctx.expr(&star, &mut env), ctx.expr(&plus_iden, &mut env), "seed {seed} star");

        // ~~r == r
        let tt = Expr::new(ExprKind::Un(
            UnOp::Transpose,
            bx(Expr::new(ExprKind::Un(UnOp::Transpose, bx(r.clone())))),
        ));
        assert_eq!(ctx.expr(&tt, &mut env), ctx.expr(&r, &mut env), "seed {seed} transpose");

        // all x: S | F  ==  !(some x: S | !F)
        let f = body(&mut rng, "x0");
        let all = Formula::new(FormulaKind::Quant {
            q: Quant::All,
            var: "x0".into(),
            bound: bx(Expr::ident("S")),
            body: Box::new(f.clone()),
        });
        let not_some_not = Formula::new(FormulaKind::Not(Box::new(Formula::new(
            FormulaKind::Quant {
                q: Quant::Some,
                var: "x0".into(),
                bound: bx(Expr::ident("S")),
                body: Box::new(Formula::new(FormulaKind::Not(Box::new(f)))),
            },
        ))));
        assert_eq!(
            ctx.formula(&all, &mut env),
            ctx.formula(&not_some_not, &mut env),
            "seed {seed} duality"
        );

        // lone e == no e || one e
        let e = Expr::new(ExprKind::Bin(BinOp::Join, bx(Expr::ident("S")), bx(rel(&mut rng, 2))));
        let lone = Formula::new(FormulaKind::Mult(MultOp::Lone, bx(e.clone())));
        let no_or_one = Formula::new(FormulaKind::Conn(
            ConnOp::Or,
            Box::new(Formula::new(FormulaKind::Mult(MultOp::No, bx(e.clone())))),
            Box::new(Formula::new(FormulaKind::Mult(MultOp::One, bx(e)))),
        ));
        assert_eq!(
            ctx.formula(&lone, &mut env),
            ctx.formula(&no_or_one, &mut env),
            "seed {seed} lone"
        );
    }
    println!("500 law instances in {:?}", t0.elapsed());
}
