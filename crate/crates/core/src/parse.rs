//! Lexer and recursive-descent parser for `.rspec` files.
//!
//! Operator precedence, weakest to tightest. Formulas: quantifier bodies
//! extend maximally right, then `<=>`, `=>` (right-assoc), `||`, `&&`, `!`,
//! then comparisons. Expressions: `+`/`-`, `&`, `->`, `.`, prefix `~ ^ *`;
//! `#` takes a join-precedence operand. Blocks are implicit conjunctions.

use crate::ast::*;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{pos}: {msg}")]
    Lex { pos: Pos, msg: String },
    #[error("{span}: expected {expected}, found {found}")]
    Unexpected {
        span: Span,
        expected: String,
        found: String,
    },
    #[error("{span}: {msg}")]
    Resolve { span: Span, msg: String },
    #[error("{pos}: {msg}")]
    Marker { pos: Pos, msg: String },
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    KwAbstract,
    KwSig,
    KwExtends,
    KwFact,
    KwPred,
    KwAssert,
    KwRun,
    KwCheck,
    KwFor,
    KwBut,
    KwExactly,
    KwExpect,
    KwAll,
    KwSome,
    KwOne,
    KwLone,
    KwNo,
    KwSet,
    KwIn,
    KwUniv,
    KwIden,
    KwNone,
    KwTrue,
    KwFalse,
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    LParen,
    RParen,
    Comma,
    Colon,
    Bar,
    Dot,
    Plus,
    Minus,
    Amp,
    Tilde,
    Caret,
    Star,
    Hash,
    Eq,
    Bang,
    Lt,
    Gt,
    Le,
    Ge,
    Ne,
    Arrow,
    Implies,
    Iff,
    AndAnd,
    OrOr,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            t => format!("`{}`", t.text()),
        }
    }

    fn text(&self) -> &str {
        match self {
            Tok::Ident(_) | Tok::Int(_) => "",
            Tok::KwAbstract => "abstract",
            Tok::KwSig => "sig",
            Tok::KwExtends => "extends",
            Tok::KwFact => "fact",
            Tok::KwPred => "pred",
            Tok::KwAssert => "assert",
            Tok::KwRun => "run",
            Tok::KwCheck => "check",
            Tok::KwFor => "for",
            Tok::KwBut => "but",
            Tok::KwExactly => "exactly",
            Tok::KwExpect => "expect",
            Tok::KwAll => "all",
            Tok::KwSome => "some",
            Tok::KwOne => "one",
            Tok::KwLone => "lone",
            Tok::KwNo => "no",
            Tok::KwSet => "set",
            Tok::KwIn => "in",
            Tok::KwUniv => "univ",
            Tok::KwIden => "iden",
            Tok::KwNone => "none",
            Tok::KwTrue => "true",
            Tok::KwFalse => "false",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Bar => "|",
            Tok::Dot => ".",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Amp => "&",
            Tok::Tilde => "~",
            Tok::Caret => "^",
            Tok::Star => "*",
            Tok::Hash => "#",
            Tok::Eq => "=",
            Tok::Bang => "!",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Le => "<=",
            Tok::Ge => ">=",
            Tok::Ne => "!=",
            Tok::Arrow => "->",
            Tok::Implies => "=>",
            Tok::Iff => "<=>",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MagicKind {
    Loc,
    NoOracle,
}

#[derive(Debug, Clone, Copy)]
struct Magic {
    kind: MagicKind,
    pos: Pos,
}

struct Lexer<'a> {
    src: &'a [u8],
    i: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer {
            src: src.as_bytes(),
            i: 0,
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.i).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.i + 1).copied()
    }

    fn peek3(&self) -> Option<u8> {
        self.src.get(self.i + 2).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.i += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn lex(mut self) -> Result<(Vec<Token>, Vec<Magic>), ParseError> {
        let mut toks = Vec::new();
        let mut magics = Vec::new();
        loop {
            while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
                self.bump();
            }
            if self.peek() == Some(b'/') && self.peek2() == Some(b'/') {
                let start = self.pos();
                let mut text = Vec::new();
                while let Some(c) = self.peek() {
                    if c == b'\n' {
                        break;
                    }
                    text.push(c);
                    self.bump();
                }
                let text = String::from_utf8_lossy(&text);
                let body = text.trim_start_matches('/').trim();
                if body == "@loc" {
                    magics.push(Magic {
                        kind: MagicKind::Loc,
                        pos: start,
                    });
                } else if body == "@no-oracle" {
                    magics.push(Magic {
                        kind: MagicKind::NoOracle,
                        pos: start,
                    });
                }
                continue;
            }
            let start = self.pos();
            let Some(c) = self.peek() else { break };
            let tok = match c {
                b'{' => {
                    self.bump();
                    Tok::LBrace
                }
                b'}' => {
                    self.bump();
                    Tok::RBrace
                }
                b'[' => {
                    self.bump();
                    Tok::LBrack
                }
                b']' => {
                    self.bump();
                    Tok::RBrack
                }
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b':' => {
                    self.bump();
                    Tok::Colon
                }
                b'.' => {
                    self.bump();
                    Tok::Dot
                }
                b'+' => {
                    self.bump();
                    Tok::Plus
                }
                b'~' => {
                    self.bump();
                    Tok::Tilde
                }
                b'^' => {
                    self.bump();
                    Tok::Caret
                }
                b'*' => {
                    self.bump();
                    Tok::Star
                }
                b'#' => {
                    self.bump();
                    Tok::Hash
                }
                b'|' => {
                    self.bump();
                    if self.peek() == Some(b'|') {
                        self.bump();
                        Tok::OrOr
                    } else {
                        Tok::Bar
                    }
                }
                b'&' => {
                    self.bump();
                    if self.peek() == Some(b'&') {
                        self.bump();
                        Tok::AndAnd
                    } else {
                        Tok::Amp
                    }
                }
                b'-' => {
                    self.bump();
                    if self.peek() == Some(b'>') {
                        self.bump();
                        Tok::Arrow
                    } else {
                        Tok::Minus
                    }
                }
                b'=' => {
                    self.bump();
                    if self.peek() == Some(b'>') {
                        self.bump();
                        Tok::Implies
                    } else {
                        Tok::Eq
                    }
                }
                b'!' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Ne
                    } else {
                        Tok::Bang
                    }
                }
                b'<' => {
                    if self.peek2() == Some(b'=') && self.peek3() == Some(b'>') {
                        self.bump();
                        self.bump();
                        self.bump();
                        Tok::Iff
                    } else if self.peek2() == Some(b'=') {
                        self.bump();
                        self.bump();
                        Tok::Le
                    } else {
                        self.bump();
                        Tok::Lt
                    }
                }
                b'>' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Ge
                    } else {
                        Tok::Gt
                    }
                }
                b'0'..=b'9' => {
                    let mut n: i64 = 0;
                    while let Some(d @ b'0'..=b'9') = self.peek() {
                        n = n
                            .checked_mul(10)
                            .and_then(|n| n.checked_add((d - b'0') as i64))
                            .ok_or_else(|| ParseError::Lex {
                                pos: start,
                                msg: "integer literal overflows i64".into(),
                            })?;
                        self.bump();
                    }
                    Tok::Int(n)
                }
                b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                    let mut s = String::new();
                    while let Some(c) = self.peek() {
                        if c.is_ascii_alphanumeric() || c == b'_' || c == b'\'' {
                            s.push(c as char);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    match s.as_str() {
                        "abstract" => Tok::KwAbstract,
                        "sig" => Tok::KwSig,
                        "extends" => Tok::KwExtends,
                        "fact" => Tok::KwFact,
                        "pred" => Tok::KwPred,
                        "assert" => Tok::KwAssert,
                        "run" => Tok::KwRun,
                        "check" => Tok::KwCheck,
                        "for" => Tok::KwFor,
                        "but" => Tok::KwBut,
                        "exactly" => Tok::KwExactly,
                        "expect" => Tok::KwExpect,
                        "all" => Tok::KwAll,
                        "some" => Tok::KwSome,
                        "one" => Tok::KwOne,
                        "lone" => Tok::KwLone,
                        "no" => Tok::KwNo,
                        "set" => Tok::KwSet,
                        "in" => Tok::KwIn,
                        "univ" => Tok::KwUniv,
                        "iden" => Tok::KwIden,
                        "none" => Tok::KwNone,
                        "true" => Tok::KwTrue,
                        "false" => Tok::KwFalse,
                        _ => Tok::Ident(s),
                    }
                }
                other => {
                    return Err(ParseError::Lex {
                        pos: start,
                        msg: format!("unexpected character `{}`", other as char),
                    })
                }
            };
            toks.push(Token {
                tok,
                span: Span {
                    start,
                    end: self.pos(),
                },
            });
        }
        Ok((toks, magics))
    }
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    eof: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.i + k).map(|t| &t.tok)
    }

    fn span_here(&self) -> Span {
        self.toks.get(self.i).map(|t| t.span).unwrap_or(Span {
            start: self.eof,
            end: self.eof,
        })
    }

    fn prev_end(&self) -> Pos {
        if self.i == 0 {
            Pos { line: 1, col: 1 }
        } else {
            self.toks[self.i - 1].span.end
        }
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.i).cloned();
        if t.is_some() {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if self.peek() == Some(&tok) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, ParseError> {
        if self.peek() == Some(&tok) {
            Ok(self.bump().unwrap())
        } else {
            Err(self.unexpected(&format!("`{}`", tok.text())))
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let (span, found) = match self.toks.get(self.i) {
            Some(t) => (t.span, t.tok.describe()),
            None => (
                Span {
                    start: self.eof,
                    end: self.eof,
                },
                "end of input".to_string(),
            ),
        };
        ParseError::Unexpected {
            span,
            expected: expected.to_string(),
            found,
        }
    }

    fn ident(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek() {
            Some(Tok::Ident(_)) => {
                let t = self.bump().unwrap();
                let Tok::Ident(s) = t.tok else { unreachable!() };
                Ok((s, t.span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    // ---- expressions ----

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let start = self.span_here().start;
        let mut lhs = self.parse_inter()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Union,
                Some(Tok::Minus) => BinOp::Diff,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_inter()?;
            lhs = self.mk_bin(op, lhs, rhs, start);
        }
        Ok(lhs)
    }

    fn parse_inter(&mut self) -> Result<Expr, ParseError> {
        let start = self.span_here().start;
        let mut lhs = self.parse_product()?;
        while self.eat(Tok::Amp) {
            let rhs = self.parse_product()?;
            lhs = self.mk_bin(BinOp::Inter, lhs, rhs, start);
        }
        Ok(lhs)
    }

    fn parse_product(&mut self) -> Result<Expr, ParseError> {
        let start = self.span_here().start;
        let mut lhs = self.parse_join()?;
        while self.eat(Tok::Arrow) {
            let rhs = self.parse_join()?;
            lhs = self.mk_bin(BinOp::Product, lhs, rhs, start);
        }
        Ok(lhs)
    }

    fn parse_join(&mut self) -> Result<Expr, ParseError> {
        let start = self.span_here().start;
        let mut lhs = self.parse_unary()?;
        while self.eat(Tok::Dot) {
            let rhs = self.parse_unary()?;
            lhs = self.mk_bin(BinOp::Join, lhs, rhs, start);
        }
        Ok(lhs)
    }

    fn mk_bin(&self, op: BinOp, l: Expr, r: Expr, start: Pos) -> Expr {
        Expr::with_span(
            ExprKind::Bin(op, Box::new(l), Box::new(r)),
            Span {
                start,
                end: self.prev_end(),
            },
        )
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        let start = self.span_here().start;
        let op = match self.peek() {
            Some(Tok::Tilde) => Some(UnOp::Transpose),
            Some(Tok::Caret) => Some(UnOp::Closure),
            Some(Tok::Star) => Some(UnOp::RClosure),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let e = self.parse_unary()?;
            return Ok(Expr::with_span(
                ExprKind::Un(op, Box::new(e)),
                Span {
                    start,
                    end: self.prev_end(),
                },
            ));
        }
        if self.eat(Tok::Hash) {
            let e = self.parse_join()?;
            return Ok(Expr::with_span(
                ExprKind::Card(Box::new(e)),
                Span {
                    start,
                    end: self.prev_end(),
                },
            ));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span_here();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let kind = if s == "Int" {
                    ExprKind::IntSet
                } else {
                    ExprKind::Ident(s.clone())
                };
                self.bump();
                Ok(Expr::with_span(kind, span))
            }
            Some(Tok::Int(n)) => {
                let n = *n;
                self.bump();
                Ok(Expr::with_span(ExprKind::IntLit(n), span))
            }
            Some(Tok::Minus) => {
                let start = span.start;
                self.bump();
                match self.peek() {
                    Some(Tok::Int(n)) => {
                        let n = *n;
                        self.bump();
                        Ok(Expr::with_span(
                            ExprKind::IntLit(-n),
                            Span {
                                start,
                                end: self.prev_end(),
                            },
                        ))
                    }
                    _ => Err(self.unexpected("integer literal after `-`")),
                }
            }
            Some(Tok::KwUniv) => {
                self.bump();
                Ok(Expr::with_span(ExprKind::Univ, span))
            }
            Some(Tok::KwIden) => {
                self.bump();
                Ok(Expr::with_span(ExprKind::Iden, span))
            }
            Some(Tok::KwNone) => {
                self.bump();
                Ok(Expr::with_span(ExprKind::NoneSet, span))
            }
            Some(Tok::LParen) => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::LBrace) => {
                let start = span.start;
                self.bump();
                let (var, _) = self.ident()?;
                self.expect(Tok::Colon)?;
                let bound = self.parse_expr()?;
                self.expect(Tok::Bar)?;
                let body = self.parse_formula()?;
                self.expect(Tok::RBrace)?;
                Ok(Expr::with_span(
                    ExprKind::Compr {
                        var,
                        bound: Box::new(bound),
                        body: Box::new(body),
                    },
                    Span {
                        start,
                        end: self.prev_end(),
                    },
                ))
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    // ---- formulas ----

    fn parse_formula(&mut self) -> Result<Formula, ParseError> {
        let start = self.span_here().start;
        let mut lhs = self.parse_implies()?;
        while self.eat(Tok::Iff) {
            let rhs = self.parse_implies()?;
            lhs = self.mk_conn(ConnOp::Iff, lhs, rhs, start);
        }
        Ok(lhs)
    }

    fn parse_implies(&mut self) -> Result<Formula, ParseError> {
        let start = self.span_here().start;
        let lhs = self.parse_or()?;
        if self.eat(Tok::Implies) {
            // Right-assoc.
            let rhs = self.parse_implies()?;
            return Ok(self.mk_conn(ConnOp::Implies, lhs, rhs, start));
        }
        Ok(lhs)
    }

    fn parse_or(&mut self) -> Result<Formula, ParseError> {
        let start = self.span_here().start;
        let mut lhs = self.parse_and()?;
        while self.eat(Tok::OrOr) {
            let rhs = self.parse_and()?;
            lhs = self.mk_conn(ConnOp::Or, lhs, rhs, start);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Formula, ParseError> {
        let start = self.span_here().start;
        let mut lhs = self.parse_funary()?;
        while self.eat(Tok::AndAnd) {
            let rhs = self.parse_funary()?;
            lhs = self.mk_conn(ConnOp::And, lhs, rhs, start);
        }
        Ok(lhs)
    }

    fn mk_conn(&self, op: ConnOp, l: Formula, r: Formula, start: Pos) -> Formula {
        Formula::with_span(
            FormulaKind::Conn(op, Box::new(l), Box::new(r)),
            Span {
                start,
                end: self.prev_end(),
            },
        )
    }

    /// True when the tokens after a quantifier keyword look like binders:
    /// `x (, y)* :`.
    fn binders_ahead(&self) -> bool {
        let mut k = 0;
        loop {
            match self.peek_at(k) {
                Some(Tok::Ident(_)) => {}
                _ => return false,
            }
            match self.peek_at(k + 1) {
                Some(Tok::Colon) => return true,
                Some(Tok::Comma) => k += 2,
                _ => return false,
            }
        }
    }

    fn parse_funary(&mut self) -> Result<Formula, ParseError> {
        let span = self.span_here();
        let start = span.start;
        match self.peek() {
            Some(Tok::Bang) => {
                self.bump();
                let f = self.parse_funary()?;
                Ok(Formula::with_span(
                    FormulaKind::Not(Box::new(f)),
                    Span {
                        start,
                        end: self.prev_end(),
                    },
                ))
            }
            Some(Tok::KwTrue) => {
                self.bump();
                Ok(Formula::with_span(FormulaKind::Lit(true), span))
            }
            Some(Tok::KwFalse) => {
                self.bump();
                Ok(Formula::with_span(FormulaKind::Lit(false), span))
            }
            Some(Tok::KwAll | Tok::KwSome | Tok::KwOne | Tok::KwLone | Tok::KwNo) => {
                let q = match self.peek().unwrap() {
                    Tok::KwAll => Quant::All,
                    Tok::KwSome => Quant::Some,
                    Tok::KwOne => Quant::One,
                    Tok::KwLone => Quant::Lone,
                    Tok::KwNo => Quant::No,
                    _ => unreachable!(),
                };
                let mult = match q {
                    Quant::All => None,
                    Quant::Some => Some(MultOp::Some),
                    Quant::One => Some(MultOp::One),
                    Quant::Lone => Some(MultOp::Lone),
                    Quant::No => Some(MultOp::No),
                };
                self.bump();
                if self.binders_ahead() {
                    self.parse_quant_tail(q, start)
                } else if let Some(m) = mult {
                    let e = self.parse_expr()?;
                    Ok(Formula::with_span(
                        FormulaKind::Mult(m, Box::new(e)),
                        Span {
                            start,
                            end: self.prev_end(),
                        },
                    ))
                } else {
                    Err(self.unexpected("binders after `all`"))
                }
            }
            Some(Tok::Ident(_)) if self.peek_at(1) == Some(&Tok::LBrack) => {
                let (name, _) = self.ident()?;
                self.expect(Tok::LBrack)?;
                let mut args = Vec::new();
                if self.peek() != Some(&Tok::RBrack) {
                    loop {
                        args.push(self.parse_expr()?);
                        if !self.eat(Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBrack)?;
                Ok(Formula::with_span(
                    FormulaKind::Call { name, args },
                    Span {
                        start,
                        end: self.prev_end(),
                    },
                ))
            }
            Some(Tok::LParen) => {
                // Either a parenthesized formula or an expression comparison
                // whose left operand is parenthesized; try the formula first.
                let save = self.i;
                self.bump();
                if let Ok(f) = self.parse_formula() {
                    if self.eat(Tok::RParen) && !self.expr_continues() {
                        return Ok(f);
                    }
                }
                self.i = save;
                self.parse_comparison()
            }
            _ => self.parse_comparison(),
        }
    }

    /// After `(F)`: a following token that can only continue an expression
    /// means the parenthesis was an expression operand after all.
    fn expr_continues(&self) -> bool {
        matches!(
            self.peek(),
            Some(
                Tok::Dot
                    | Tok::Plus
                    | Tok::Minus
                    | Tok::Amp
                    | Tok::Arrow
                    | Tok::KwIn
                    | Tok::Eq
                    | Tok::Ne
                    | Tok::Lt
                    | Tok::Gt
                    | Tok::Le
                    | Tok::Ge
                    | Tok::Bang
            )
        )
    }

    /// Binders already confirmed ahead. Groups `x, y: e` desugar to nested
    /// single-binder quantifiers; multiple binders only for `all`/`some`.
    fn parse_quant_tail(&mut self, q: Quant, start: Pos) -> Result<Formula, ParseError> {
        let mut binders: Vec<(String, Expr)> = Vec::new();
        loop {
            let mut names = Vec::new();
            loop {
                let (n, sp) = self.ident()?;
                names.push((n, sp));
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::Colon)?;
            let bound = self.parse_expr()?;
            for (n, _) in &names {
                binders.push((n.clone(), bound.clone()));
            }
            // Another binder group begins with `ident (, ident)* :`.
            if self.peek() == Some(&Tok::Comma) {
                self.bump();
                if !self.binders_ahead() {
                    return Err(self.unexpected("binder group"));
                }
            } else {
                break;
            }
        }
        self.expect(Tok::Bar)?;
        let body = self.parse_formula()?;
        if binders.len() > 1 && !matches!(q, Quant::All | Quant::Some) {
            return Err(ParseError::Resolve {
                span: Span {
                    start,
                    end: self.prev_end(),
                },
                msg: format!(
                    "`{}` quantifier takes a single binder; only `all`/`some` nest",
                    q.keyword()
                ),
            });
        }
        let span = Span {
            start,
            end: self.prev_end(),
        };
        let mut f = body;
        for (var, bound) in binders.into_iter().rev() {
            f = Formula::with_span(
                FormulaKind::Quant {
                    q,
                    var,
                    bound: Box::new(bound),
                    body: Box::new(f),
                },
                span,
            );
        }
        Ok(f)
    }

    fn parse_comparison(&mut self) -> Result<Formula, ParseError> {
        let start = self.span_here().start;
        let lhs = self.parse_expr()?;
        let op = match self.peek() {
            Some(Tok::KwIn) => CmpOp::In,
            Some(Tok::Bang) if self.peek_at(1) == Some(&Tok::KwIn) => {
                self.bump();
                CmpOp::NotIn
            }
            Some(Tok::Eq) => CmpOp::Eq,
            Some(Tok::Ne) => CmpOp::Ne,
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::Gt) => CmpOp::Gt,
            Some(Tok::Ge) => CmpOp::Ge,
            _ => return Err(self.unexpected("comparison operator")),
        };
        self.bump();
        let rhs = self.parse_expr()?;
        Ok(Formula::with_span(
            FormulaKind::Cmp(op, Box::new(lhs), Box::new(rhs)),
            Span {
                start,
                end: self.prev_end(),
            },
        ))
    }

    // ---- declarations ----

    fn parse_block_body(&mut self) -> Result<Vec<Formula>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        while self.peek() != Some(&Tok::RBrace) {
            if self.peek().is_none() {
                return Err(self.unexpected("`}`"));
            }
            body.push(self.parse_formula()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(body)
    }

    fn parse_sig(&mut self, start: Pos) -> Result<Vec<SigDecl>, ParseError> {
        let mut qual = SigQual::Plain;
        loop {
            match self.peek() {
                Some(Tok::KwAbstract) => {
                    if qual != SigQual::Plain {
                        return Err(self.unexpected("`sig`"));
                    }
                    qual = SigQual::Abstract;
                    self.bump();
                }
                Some(Tok::KwOne) => {
                    if qual != SigQual::Plain {
                        return Err(self.unexpected("`sig`"));
                    }
                    qual = SigQual::One;
                    self.bump();
                }
                _ => break,
            }
        }
        self.expect(Tok::KwSig)?;
        let mut names = Vec::new();
        loop {
            names.push(self.ident()?);
            if !self.eat(Tok::Comma) {
                break;
            }
        }
        let parent = if self.eat(Tok::KwExtends) {
            Some(self.ident()?.0)
        } else {
            None
        };
        self.expect(Tok::LBrace)?;
        let mut fields = Vec::new();
        while self.peek() != Some(&Tok::RBrace) {
            let fstart = self.span_here().start;
            let (fname, _) = self.ident()?;
            self.expect(Tok::Colon)?;
            let mult = match self.peek() {
                Some(Tok::KwSet) => {
                    self.bump();
                    Mult::Set
                }
                Some(Tok::KwOne) => {
                    self.bump();
                    Mult::One
                }
                Some(Tok::KwLone) => {
                    self.bump();
                    Mult::Lone
                }
                _ => Mult::One,
            };
            let (range, _) = self.ident()?;
            fields.push(FieldDecl {
                name: fname,
                mult,
                range,
                span: Span {
                    start: fstart,
                    end: self.prev_end(),
                },
            });
            if !self.eat(Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        let span = Span {
            start,
            end: self.prev_end(),
        };
        if names.len() > 1 && !fields.is_empty() {
            return Err(ParseError::Resolve {
                span,
                msg: "multi-name sig declarations cannot declare fields".into(),
            });
        }
        Ok(names
            .into_iter()
            .map(|(name, _)| SigDecl {
                name,
                qual,
                parent: parent.clone(),
                fields: fields.clone(),
                span,
            })
            .collect())
    }

    fn parse_scope(&mut self) -> Result<Scope, ParseError> {
        let mut scope = Scope::default();
        if !self.eat(Tok::KwFor) {
            return Ok(scope);
        }
        let parse_override =
            |p: &mut Parser, scope: &mut Scope| -> Result<(), ParseError> {
                let exact = p.eat(Tok::KwExactly);
                let n = match p.peek() {
                    Some(Tok::Int(n)) => {
                        let n = *n;
                        p.bump();
                        n
                    }
                    _ => return Err(p.unexpected("scope count")),
                };
                let (sig, sp) = p.ident()?;
                if n < 0 || n > 1_000_000 {
                    return Err(ParseError::Resolve {
                        span: sp,
                        msg: format!("scope count {n} out of range"),
                    });
                }
                scope.overrides.push((sig, n as u32, exact));
                Ok(())
            };
        match self.peek() {
            Some(Tok::Int(n)) if !matches!(self.peek_at(1), Some(Tok::Ident(_))) => {
                let n = *n;
                self.bump();
                if n < 0 || n > 1_000_000 {
                    return Err(ParseError::Resolve {
                        span: self.span_here(),
                        msg: format!("scope count {n} out of range"),
                    });
                }
                scope.default = n as u32;
                if self.eat(Tok::KwBut) {
                    loop {
                        parse_override(self, &mut scope)?;
                        if !self.eat(Tok::Comma) {
                            break;
                        }
                    }
                }
            }
            _ => loop {
                parse_override(self, &mut scope)?;
                if !self.eat(Tok::Comma) {
                    break;
                }
            },
        }
        Ok(scope)
    }

    fn parse_spec(&mut self, magics: &[Magic]) -> Result<Spec, ParseError> {
        let mut spec = Spec::default();
        let no_oracle: Vec<Pos> = magics
            .iter()
            .filter(|m| m.kind == MagicKind::NoOracle)
            .map(|m| m.pos)
            .collect();
        while let Some(tok) = self.peek() {
            let start = self.span_here().start;
            match tok {
                Tok::KwAbstract | Tok::KwOne | Tok::KwSig => {
                    spec.sigs.extend(self.parse_sig(start)?);
                }
                Tok::KwFact => {
                    self.bump();
                    let (name, _) = self.ident()?;
                    let body = self.parse_block_body()?;
                    spec.facts.push(NamedBlock {
                        name,
                        body,
                        span: Span {
                            start,
                            end: self.prev_end(),
                        },
                    });
                }
                Tok::KwPred => {
                    self.bump();
                    let (name, _) = self.ident()?;
                    let mut params = Vec::new();
                    if self.eat(Tok::LBrack) {
                        while self.peek() != Some(&Tok::RBrack) {
                            let pstart = self.span_here().start;
                            let (pname, _) = self.ident()?;
                            self.expect(Tok::Colon)?;
                            let (psig, _) = self.ident()?;
                            params.push(Param {
                                name: pname,
                                sig: psig,
                                span: Span {
                                    start: pstart,
                                    end: self.prev_end(),
                                },
                            });
                            if !self.eat(Tok::Comma) {
                                break;
                            }
                        }
                        self.expect(Tok::RBrack)?;
                    }
                    let body = self.parse_block_body()?;
                    spec.preds.push(PredDecl {
                        name,
                        params,
                        body,
                        span: Span {
                            start,
                            end: self.prev_end(),
                        },
                    });
                }
                Tok::KwAssert => {
                    self.bump();
                    let (name, _) = self.ident()?;
                    let body = self.parse_block_body()?;
                    spec.asserts.push(NamedBlock {
                        name,
                        body,
                        span: Span {
                            start,
                            end: self.prev_end(),
                        },
                    });
                }
                Tok::KwRun | Tok::KwCheck => {
                    let kind = if *tok == Tok::KwRun {
                        CmdKind::Run
                    } else {
                        CmdKind::Check
                    };
                    self.bump();
                    let (target, _) = self.ident()?;
                    let scope = self.parse_scope()?;
                    let mut expect_sat = true;
                    if self.eat(Tok::KwExpect) {
                        let span = self.span_here();
                        match (kind, self.peek()) {
                            (CmdKind::Run, Some(Tok::Int(0))) => expect_sat = false,
                            (CmdKind::Run, Some(Tok::Int(1))) => expect_sat = true,
                            (CmdKind::Run, _) => {
                                return Err(self.unexpected("`expect 0` or `expect 1`"))
                            }
                            (CmdKind::Check, _) => {
                                return Err(ParseError::Resolve {
                                    span,
                                    msg: "`expect` is only valid on run commands".into(),
                                })
                            }
                        }
                        self.bump();
                    }
                    let span = Span {
                        start,
                        end: self.prev_end(),
                    };
                    // A //@no-oracle comment between the previous token and
                    // this command opts it out of the oracle set.
                    let cmd_start = start;
                    let is_oracle = !no_oracle
                        .iter()
                        .any(|p| *p < cmd_start && self.magic_applies(*p, cmd_start));
                    spec.commands.push(Command {
                        kind,
                        target,
                        scope,
                        expect_sat,
                        is_oracle,
                        span,
                    });
                }
                _ => return Err(self.unexpected("declaration or command")),
            }
        }
        Ok(spec)
    }

    /// A magic comment applies to the next token after it; `next` must be the
    /// first token position past `p`.
    fn magic_applies(&self, p: Pos, next: Pos) -> bool {
        self.toks
            .iter()
            .find(|t| t.span.start > p)
            .map(|t| t.span.start == next)
            .unwrap_or(false)
    }
}

/// Parse and validate a specification.
pub fn parse(src: &str) -> Result<Spec, ParseError> {
    let (toks, magics) = Lexer::new(src).lex()?;
    let eof = toks.last().map(|t| t.span.end).unwrap_or(Pos { line: 1, col: 1 });
    let mut p = Parser { toks, i: 0, eof };
    let mut spec = p.parse_spec(&magics)?;
    attach_markers(&mut spec, &p.toks, &magics)?;
    crate::resolve::validate(&spec)?;
    Ok(spec)
}

/// Resolve each `//@loc` comment to the outermost node starting at the next
/// token, searching every declaration body.
fn attach_markers(
    spec: &mut Spec,
    toks: &[Token],
    magics: &[Magic],
) -> Result<(), ParseError> {
    let mut markers = Vec::new();
    for m in magics.iter().filter(|m| m.kind == MagicKind::Loc) {
        let Some(t) = toks.iter().find(|t| t.span.start > m.pos) else {
            return Err(ParseError::Marker {
                pos: m.pos,
                msg: "//@loc marker at end of file".into(),
            });
        };
        let target = t.span.start;
        let loc = find_node_starting_at(spec, target).ok_or(ParseError::Marker {
            pos: m.pos,
            msg: "//@loc marker must precede a formula or expression".into(),
        })?;
        markers.push(loc);
    }
    spec.markers = markers;
    Ok(())
}

fn find_node_starting_at(spec: &Spec, at: Pos) -> Option<Location> {
    let decls = crate::loc::all_decls(spec);
    for decl in decls {
        let body = spec.decl_body(decl).unwrap();
        for (i, f) in body.iter().enumerate() {
            let root = NodeRef::F(f);
            let mut path = vec![i];
            if let Some(loc) = scan(root, &mut path, at, decl) {
                return Some(loc);
            }
        }
    }
    return None;

    // Pre-order: the outermost node starting at `at` wins.
    fn scan(
        node: NodeRef<'_>,
        path: &mut Vec<usize>,
        at: Pos,
        decl: DeclRef,
    ) -> Option<Location> {
        if node.span().start == at {
            return Some(Location {
                decl,
                path: path.clone(),
                sort: node.sort(),
                span: node.span(),
            });
        }
        for (i, c) in node.children().into_iter().enumerate() {
            path.push(i);
            if let Some(loc) = scan(c, path, at, decl) {
                return Some(loc);
            }
            path.pop();
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{CmpOp, ConnOp, FormulaKind};

    #[test]
    fn minimal_sig() {
        let spec = parse("sig A {}").unwrap();
        assert_eq!(spec.sigs.len(), 1);
        assert_eq!(spec.sigs[0].name, "A");
        assert!(spec.sigs[0].fields.is_empty());
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let spec = parse("pred P { 0 = 1 || 0 = 2 && 0 = 3 }").unwrap();
        let FormulaKind::Conn(ConnOp::Or, _, rhs) = &spec.preds[0].body[0].kind else {
            panic!("expected || at the top");
        };
        assert!(matches!(rhs.kind, FormulaKind::Conn(ConnOp::And, _, _)));
    }

    #[test]
    fn comparison_negations_lex() {
        let spec = parse("pred P[x: A] { x !in A && 0 != 1 } sig A {}").unwrap();
        let FormulaKind::Conn(_, l, r) = &spec.preds[0].body[0].kind else {
            panic!("expected conjunction");
        };
        assert!(matches!(l.kind, FormulaKind::Cmp(CmpOp::NotIn, _, _)));
        assert!(matches!(r.kind, FormulaKind::Cmp(CmpOp::Ne, _, _)));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse("sig A {").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected"), "unhelpful: {msg}");
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(parse("sig A {} sig A {}").is_err());
        assert!(parse("pred P { 0 = 0 } fact P { 0 = 0 }").is_err());
    }

    #[test]
    fn unknown_references_rejected() {
        // field range, pred param sig, and command target all resolve
        assert!(parse("sig A { f: one B }").is_err());
        assert!(parse("pred P[x: B] { some x }").is_err());
        assert!(parse("run Nope for 2").is_err());
    }

    #[test]
    fn expect_is_run_only() {
        let err = parse("pred P { 0 = 0 } assert A0 { 0 = 0 } check A0 for 2 expect 1")
            .unwrap_err();
        assert!(err.to_string().contains("run"), "{err}");
        assert!(parse("pred P { 0 = 0 } run P for 2 expect 0").is_ok());
        assert!(parse("pred P { 0 = 0 } run P for 2 expect 3").is_err());
    }

    #[test]
    fn no_oracle_magic_opts_a_command_out() {
        let spec = parse(
            "pred P { 0 = 0 }\nrun P for 2 expect 1\n//@no-oracle\nrun P for 3 expect 1\n",
        )
        .unwrap();
        assert!(spec.commands[0].is_oracle);
        assert!(!spec.commands[1].is_oracle);
    }

    #[test]
    fn inline_loc_marker_lands_on_the_next_node() {
        let spec = parse("pred P { //@loc\n 0 = 1 }").unwrap();
        assert_eq!(spec.markers.len(), 1);
        assert_eq!(spec.markers[0].path, [0]);
    }

    #[test]
    fn scope_forms() {
        let spec = parse(
            "sig A {} sig B {} pred P { some A } \
             run P for 5 but exactly 2 A expect 1 \
             run P for 4 A, 1 B expect 1 \
             run P expect 1",
        )
        .unwrap();
        let s0 = &spec.commands[0].scope;
        assert_eq!((s0.default, s0.count("A"), s0.exact("A")), (5, 2, true));
        let s1 = &spec.commands[1].scope;
        assert_eq!((s1.count("A"), s1.count("B"), s1.exact("A")), (4, 1, false));
        assert_eq!(spec.commands[2].scope.default, crate::ast::DEFAULT_SCOPE);
    }
}
