//! Syntax tree for SCL sources.
//!
//! Every node carries a [`Span`] for diagnostics. Spans compare equal to each
//! other unconditionally, so `==` on syntax trees is structural equality.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Source position attached to a syntax node. Ignored by `PartialEq`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span(pub Pos);

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl Span {
    pub fn pos(&self) -> Pos {
        self.0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DesignAst {
    pub modules: Vec<ModuleDecl>,
    pub instances: Vec<InstanceDecl>,
    pub binds: Vec<BindDecl>,
    pub properties: Vec<PropertyDecl>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceDecl {
    pub name: String,
    pub module: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortRef {
    pub instance: String,
    pub port: String,
    pub span: Span,
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.instance, self.port)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BindDecl {
    pub from: PortRef,
    pub to: PortRef,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyDecl {
    pub name: String,
    pub kind: PropertyKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PropertyKind {
    Ltl(LtlAst),
    Invariant(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleDecl {
    pub name: String,
    pub ports: Vec<PortDecl>,
    pub signals: Vec<StateDecl>,
    pub vars: Vec<StateDecl>,
    pub events: Vec<EventDecl>,
    pub processes: Vec<ProcessDecl>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dir {
    In,
    Out,
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dir::In => "in",
            Dir::Out => "out",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortDecl {
    pub dir: Dir,
    pub name: String,
    pub ty: TypeExpr,
    pub span: Span,
}

/// A `signal` or `var` member with its initial literal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateDecl {
    pub name: String,
    pub ty: TypeExpr,
    pub init: Literal,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventDecl {
    pub name: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessDecl {
    pub name: String,
    pub body: Vec<Stmt>,
    pub span: Span,
}

/// Type as written; range and label checks happen during elaboration.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    Bool,
    Int { lo: i64, hi: i64 },
    Enum(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Label(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Int(n) => write!(f, "{n}"),
            Literal::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Bool(bool),
    Int(i64),
    /// `x` or `inst.x`. A bare name may also denote an enum label.
    Name(Vec<String>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Assign { target: String, value: Expr },
    Write { target: String, value: Expr },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Option<Vec<Stmt>> },
    While { cond: Expr, body: Vec<Stmt> },
    Wait(WaitAst),
    Notify { event: String, when: NotifyAst },
    Assert(Expr),
    Skip,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WaitAst {
    Time(i64),
    Change(String),
    Event(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NotifyAst {
    Immediate,
    Delta,
    Time(i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn apply(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

/// LTL formula as written inside an `ltl NAME { ... }` block, names unresolved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LtlAst {
    Const(bool),
    Atom { name: Vec<String>, cmp: Option<(CmpOp, Literal)>, span: Span },
    Not(Box<LtlAst>),
    And(Box<LtlAst>, Box<LtlAst>),
    Or(Box<LtlAst>, Box<LtlAst>),
    Implies(Box<LtlAst>, Box<LtlAst>),
    Next(Box<LtlAst>),
    Finally(Box<LtlAst>),
    Globally(Box<LtlAst>),
    Until(Box<LtlAst>, Box<LtlAst>),
    Release(Box<LtlAst>, Box<LtlAst>),
}
