//! Abstract syntax for `.rspec` specifications.
//!
//! Expressions and formulas are separate sorts sharing one tree shape. Equality
//! and hashing are structural: source spans are carried on every node but do
//! not participate, so a reparse of pretty-printed output compares equal.

use std::fmt;

/// 1-based source position; `col` counts characters, end-exclusive in spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

/// Source range `start..end`. Synthetic nodes use the zero span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Span {
    pub start: Pos,
    pub end: Pos,
}

impl Span {
    pub fn synthetic() -> Span {
        Span::default()
    }

    pub fn is_synthetic(&self) -> bool {
        *self == Span::default()
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}..{}:{}",
            self.start.line, self.start.col, self.end.line, self.end.col
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SigQual {
    Plain,
    Abstract,
    One,
}

/// Field multiplicity as declared; enforced by the solver as an implicit fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mult {
    Set,
    One,
    Lone,
}

impl fmt::Display for Mult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mult::Set => "set",
            Mult::One => "one",
            Mult::Lone => "lone",
        })
    }
}

/// Binary field `owner.name: mult range`; `range` is a sig name or `"Int"`.
#[derive(Debug, Clone)]
pub struct FieldDecl {
    pub name: String,
    pub mult: Mult,
    pub range: String,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct SigDecl {
    pub name: String,
    pub qual: SigQual,
    pub parent: Option<String>,
    pub fields: Vec<FieldDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Transpose,
    Closure,
    RClosure,
}

impl UnOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            UnOp::Transpose => "~",
            UnOp::Closure => "^",
            UnOp::RClosure => "*",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Union,
    Diff,
    Inter,
    Join,
    Product,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Union => "+",
            BinOp::Diff => "-",
            BinOp::Inter => "&",
            BinOp::Join => ".",
            BinOp::Product => "->",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    In,
    NotIn,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CmpOp::In => "in",
            CmpOp::NotIn => "!in",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// Integer-valued comparison (operands coerced by summation).
    pub fn is_int(&self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MultOp {
    No,
    Some,
    One,
    Lone,
}

impl MultOp {
    pub fn keyword(&self) -> &'static str {
        match self {
            MultOp::No => "no",
            MultOp::Some => "some",
            MultOp::One => "one",
            MultOp::Lone => "lone",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quant {
    All,
    Some,
    One,
    Lone,
    No,
}

impl Quant {
    pub fn keyword(&self) -> &'static str {
        match self {
            Quant::All => "all",
            Quant::Some => "some",
            Quant::One => "one",
            Quant::Lone => "lone",
            Quant::No => "no",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConnOp {
    And,
    Or,
    Implies,
    Iff,
}

impl ConnOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            ConnOp::And => "&&",
            ConnOp::Or => "||",
            ConnOp::Implies => "=>",
            ConnOp::Iff => "<=>",
        }
    }
}

/// Relational expression. Equality/hash ignore `span`.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExprKind {
    /// Sig, field, or bound-variable reference; resolution is contextual.
    Ident(String),
    IntLit(i64),
    /// `Int`: every integer atom in scope.
    IntSet,
    Univ,
    Iden,
    NoneSet,
    Un(UnOp, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Card(Box<Expr>),
    /// `{x: bound | body}`, arity 1.
    Compr {
        var: String,
        bound: Box<Expr>,
        body: Box<Formula>,
    },
    /// Substituted witness slot used during variabilization; carries the
    /// context variables whose bindings prefix the witness tuple and the
    /// index of the witness relation it reads.
    WitnessJoin {
        ctx: Vec<String>,
        arity: usize,
        slot: usize,
    },
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}
impl Eq for Expr {}
impl std::hash::Hash for Expr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.kind.hash(state);
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr {
            kind,
            span: Span::synthetic(),
        }
    }

    pub fn with_span(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }

    pub fn ident(name: &str) -> Expr {
        Expr::new(ExprKind::Ident(name.to_string()))
    }
}

/// Formula. Equality/hash ignore `span`.
#[derive(Debug, Clone)]
pub struct Formula {
    pub kind: FormulaKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FormulaKind {
    Lit(bool),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Mult(MultOp, Box<Expr>),
    Not(Box<Formula>),
    Conn(ConnOp, Box<Formula>, Box<Formula>),
    Quant {
        q: Quant,
        var: String,
        bound: Box<Expr>,
        body: Box<Formula>,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
    /// Membership probe installed by variabilization at formula locations.
    WitnessProbe { ctx: Vec<String>, slot: usize },
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}
impl Eq for Formula {}
impl std::hash::Hash for Formula {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.kind.hash(state);
    }
}

impl Formula {
    pub fn new(kind: FormulaKind) -> Formula {
        Formula {
            kind,
            span: Span::synthetic(),
        }
    }

    pub fn with_span(kind: FormulaKind, span: Span) -> Formula {
        Formula { kind, span }
    }
}

/// Named formula block (fact or assertion); the body is an implicit
/// conjunction in source order.
#[derive(Debug, Clone)]
pub struct NamedBlock {
    pub name: String,
    pub body: Vec<Formula>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub sig: String,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct PredDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Formula>,
    pub span: Span,
}

/// Per-command atom budget. `overrides` holds `(sig, count, exact)` in source
/// order; `one` sigs are pinned to a single atom regardless.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scope {
    pub default: u32,
    pub overrides: Vec<(String, u32, bool)>,
    pub bitwidth: u32,
}

pub const DEFAULT_SCOPE: u32 = 3;
pub const DEFAULT_BITWIDTH: u32 = 4;

impl Default for Scope {
    fn default() -> Scope {
        Scope {
            default: DEFAULT_SCOPE,
            overrides: Vec::new(),
            bitwidth: DEFAULT_BITWIDTH,
        }
    }
}

impl Scope {
    pub fn exact(&self, sig: &str) -> bool {
        self.overrides
            .iter()
            .find(|(s, _, _)| s == sig)
            .map(|&(_, _, e)| e)
            .unwrap_or(false)
    }

    pub fn count(&self, sig: &str) -> u32 {
        self.overrides
            .iter()
            .find(|(s, _, _)| s == sig)
            .map(|&(_, c, _)| c)
            .unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmdKind {
    Run,
    Check,
}

/// Analysis command. Runs expect SAT (`expect 1`) or UNSAT (`expect 0`);
/// checks always expect validity. `is_oracle` marks repair oracles; commands
/// are oracles unless prefixed with a `//@no-oracle` comment.
#[derive(Debug, Clone)]
pub struct Command {
    pub kind: CmdKind,
    pub target: String,
    pub scope: Scope,
    /// For runs: `true` = expect SAT. Always `true` placeholder for checks.
    pub expect_sat: bool,
    pub is_oracle: bool,
    pub span: Span,
}

impl Command {
    pub fn display_name(&self) -> String {
        match self.kind {
            CmdKind::Run => format!("run {}", self.target),
            CmdKind::Check => format!("check {}", self.target),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeclKind {
    Fact,
    Pred,
    Assert,
}

/// Declaration slot a location lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeclRef {
    pub kind: DeclKind,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocSort {
    Expr,
    Formula,
}

/// Structural path to a suspicious node: `path[0]` indexes the body block of
/// `decl`, the rest are child indices. Stable under subtree replacement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub decl: DeclRef,
    pub path: Vec<usize>,
    pub sort: LocSort,
    pub span: Span,
}

#[derive(Debug, Clone, Default)]
pub struct Spec {
    pub sigs: Vec<SigDecl>,
    pub facts: Vec<NamedBlock>,
    pub preds: Vec<PredDecl>,
    pub asserts: Vec<NamedBlock>,
    pub commands: Vec<Command>,
    /// Locations flagged inline with `//@loc`, in source order.
    pub markers: Vec<Location>,
}

impl PartialEq for Spec {
    fn eq(&self, other: &Self) -> bool {
        // Structural: declarations compare by content, markers are metadata.
        fn sig_eq(a: &SigDecl, b: &SigDecl) -> bool {
            a.name == b.name
                && a.qual == b.qual
                && a.parent == b.parent
                && a.fields.len() == b.fields.len()
                && a.fields.iter().zip(&b.fields).all(|(x, y)| {
                    x.name == y.name && x.mult == y.mult && x.range == y.range
                })
        }
        fn block_eq(a: &NamedBlock, b: &NamedBlock) -> bool {
            a.name == b.name && a.body == b.body
        }
        fn pred_eq(a: &PredDecl, b: &PredDecl) -> bool {
            a.name == b.name
                && a.params.len() == b.params.len()
                && a.params
                    .iter()
                    .zip(&b.params)
                    .all(|(x, y)| x.name == y.name && x.sig == y.sig)
                && a.body == b.body
        }
        fn cmd_eq(a: &Command, b: &Command) -> bool {
            a.kind == b.kind
                && a.target == b.target
                && a.scope == b.scope
                && a.expect_sat == b.expect_sat
                && a.is_oracle == b.is_oracle
        }
        self.sigs.len() == other.sigs.len()
            && self.sigs.iter().zip(&other.sigs).all(|(a, b)| sig_eq(a, b))
            && self.facts.len() == other.facts.len()
            && self.facts.iter().zip(&other.facts).all(|(a, b)| block_eq(a, b))
            && self.preds.len() == other.preds.len()
            && self.preds.iter().zip(&other.preds).all(|(a, b)| pred_eq(a, b))
            && self.asserts.len() == other.asserts.len()
            && self
                .asserts
                .iter()
                .zip(&other.asserts)
                .all(|(a, b)| block_eq(a, b))
            && self.commands.len() == other.commands.len()
            && self
                .commands
                .iter()
                .zip(&other.commands)
                .all(|(a, b)| cmd_eq(a, b))
    }
}

impl Spec {
    pub fn sig(&self, name: &str) -> Option<&SigDecl> {
        self.sigs.iter().find(|s| s.name == name)
    }

    pub fn pred(&self, name: &str) -> Option<&PredDecl> {
        self.preds.iter().find(|p| p.name == name)
    }

    pub fn pred_index(&self, name: &str) -> Option<usize> {
        self.preds.iter().position(|p| p.name == name)
    }

    pub fn assert_block(&self, name: &str) -> Option<&NamedBlock> {
        self.asserts.iter().find(|a| a.name == name)
    }

    /// Owner sig of a field, if `name` is a field.
    pub fn field_owner(&self, name: &str) -> Option<(&SigDecl, &FieldDecl)> {
        for s in &self.sigs {
            if let Some(f) = s.fields.iter().find(|f| f.name == name) {
                return Some((s, f));
            }
        }
        None
    }

    pub fn decl_body(&self, decl: DeclRef) -> Option<&[Formula]> {
        match decl.kind {
            DeclKind::Fact => self.facts.get(decl.index).map(|b| b.body.as_slice()),
            DeclKind::Pred => self.preds.get(decl.index).map(|p| p.body.as_slice()),
            DeclKind::Assert => self.asserts.get(decl.index).map(|b| b.body.as_slice()),
        }
    }

    pub fn decl_body_mut(&mut self, decl: DeclRef) -> Option<&mut Vec<Formula>> {
        match decl.kind {
            DeclKind::Fact => self.facts.get_mut(decl.index).map(|b| &mut b.body),
            DeclKind::Pred => self.preds.get_mut(decl.index).map(|p| &mut p.body),
            DeclKind::Assert => self.asserts.get_mut(decl.index).map(|b| &mut b.body),
        }
    }

    pub fn decl_name(&self, decl: DeclRef) -> &str {
        match decl.kind {
            DeclKind::Fact => &self.facts[decl.index].name,
            DeclKind::Pred => &self.preds[decl.index].name,
            DeclKind::Assert => &self.asserts[decl.index].name,
        }
    }

    /// Params of the decl a location sits in (empty for facts/asserts).
    pub fn decl_params(&self, decl: DeclRef) -> &[Param] {
        match decl.kind {
            DeclKind::Pred => &self.preds[decl.index].params,
            _ => &[],
        }
    }
}

/// Shared read view over the two node sorts.
#[derive(Debug, Clone, Copy)]
pub enum NodeRef<'a> {
    E(&'a Expr),
    F(&'a Formula),
}

impl<'a> NodeRef<'a> {
    pub fn sort(&self) -> LocSort {
        match self {
            NodeRef::E(_) => LocSort::Expr,
            NodeRef::F(_) => LocSort::Formula,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            NodeRef::E(e) => e.span,
            NodeRef::F(f) => f.span,
        }
    }

    /// Children in syntactic order. Conventions: binary nodes `[lhs, rhs]`,
    /// quantifiers and comprehensions `[bound, body]`, calls list their args.
    pub fn children(&self) -> Vec<NodeRef<'a>> {
        match self {
            NodeRef::E(e) => match &e.kind {
                ExprKind::Un(_, a) | ExprKind::Card(a) => vec![NodeRef::E(a)],
                ExprKind::Bin(_, a, b) => vec![NodeRef::E(a), NodeRef::E(b)],
                ExprKind::Compr { bound, body, .. } => {
                    vec![NodeRef::E(bound), NodeRef::F(body)]
                }
                _ => Vec::new(),
            },
            NodeRef::F(f) => match &f.kind {
                FormulaKind::Cmp(_, a, b) => vec![NodeRef::E(a), NodeRef::E(b)],
                FormulaKind::Mult(_, a) => vec![NodeRef::E(a)],
                FormulaKind::Not(g) => vec![NodeRef::F(g)],
                FormulaKind::Conn(_, a, b) => vec![NodeRef::F(a), NodeRef::F(b)],
                FormulaKind::Quant { bound, body, .. } => {
                    vec![NodeRef::E(bound), NodeRef::F(body)]
                }
                FormulaKind::Call { args, .. } => args.iter().map(NodeRef::E).collect(),
                _ => Vec::new(),
            },
        }
    }

    pub fn child(&self, i: usize) -> Option<NodeRef<'a>> {
        self.children().into_iter().nth(i)
    }

    /// Follow a child-index path.
    pub fn descend(&self, path: &[usize]) -> Option<NodeRef<'a>> {
        let mut node = *self;
        for &i in path {
            node = node.child(i)?;
        }
        Some(node)
    }
}

/// Owned replacement subtree, one per sort.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Subtree {
    E(Expr),
    F(Formula),
}

impl Subtree {
    pub fn sort(&self) -> LocSort {
        match self {
            Subtree::E(_) => LocSort::Expr,
            Subtree::F(_) => LocSort::Formula,
        }
    }

    pub fn from_node(n: NodeRef<'_>) -> Subtree {
        match n {
            NodeRef::E(e) => Subtree::E(e.clone()),
            NodeRef::F(f) => Subtree::F(f.clone()),
        }
    }
}
