// SPDX-License-Identifier: Apache-2.0

//! Syntax tree for the supported SystemVerilog subset.
//!
//! Every node carries a [`Loc`]; locations are ignored by `PartialEq`, so
//! trees compare structurally.

use serde::{Deserialize, Serialize};

use crate::diag::Loc;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SourceUnit {
    pub modules: Vec<ModuleDecl>,
}

impl SourceUnit {
    pub fn module(&self, name: &str) -> Option<&ModuleDecl> {
        self.modules.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleDecl {
    pub name: String,
    /// Parameters declared in the `#( ... )` header.
    pub params: Vec<ParamDecl>,
    pub ports: Vec<Port>,
    pub items: Vec<Item>,
    pub loc: Loc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    /// No explicit kind; behaves like `logic`/`wire` depending on use.
    Implicit,
    Logic,
    Reg,
    Wire,
    Bit,
    Integer,
    Int,
}

impl NetKind {
    pub fn keyword(self) -> Option<&'static str> {
        match self {
            NetKind::Implicit => None,
            NetKind::Logic => Some("logic"),
            NetKind::Reg => Some("reg"),
            NetKind::Wire => Some("wire"),
            NetKind::Bit => Some("bit"),
            NetKind::Integer => Some("integer"),
            NetKind::Int => Some("int"),
        }
    }

    /// `integer`/`int` are implicitly 32 bits wide.
    pub fn implicit_width(self) -> Option<u32> {
        match self {
            NetKind::Integer | NetKind::Int => Some(32),
            _ => None,
        }
    }
}

/// A packed or unpacked `[msb:lsb]` range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub direction: Direction,
    pub kind: NetKind,
    pub signed: bool,
    pub range: Option<Range>,
    pub name: String,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDecl {
    pub local: bool,
    pub range: Option<Range>,
    pub name: String,
    pub value: Expr,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    /// Unpacked dimensions, outermost first.
    pub unpacked: Vec<Range>,
    pub init: Option<Expr>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetDecl {
    pub kind: NetKind,
    pub signed: bool,
    pub range: Option<Range>,
    pub vars: Vec<VarDecl>,
    pub loc: Loc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlwaysKind {
    Always,
    AlwaysFf,
    AlwaysComb,
}

impl AlwaysKind {
    pub fn keyword(self) -> &'static str {
        match self {
            AlwaysKind::Always => "always",
            AlwaysKind::AlwaysFf => "always_ff",
            AlwaysKind::AlwaysComb => "always_comb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Posedge,
    Negedge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sensitivity {
    /// `always_comb`, which has no event control.
    None,
    /// `@(*)` or `@*`.
    Star,
    /// `@(a or b)` / `@(a, b)` level-sensitive list.
    Signals(Vec<String>),
    /// `@(posedge clk or negedge rst_n)`.
    Edges(Vec<(Edge, String)>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connection {
    pub port: String,
    /// `None` for an explicitly unconnected `.port()`.
    pub expr: Option<Expr>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub module: String,
    pub params: Vec<(String, Expr)>,
    pub name: String,
    pub connections: Vec<Connection>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Item {
    Param(ParamDecl),
    Net(NetDecl),
    Assign { lhs: Expr, rhs: Expr, loc: Loc },
    Always { kind: AlwaysKind, sensitivity: Sensitivity, body: Stmt, loc: Loc },
    Instance(Instance),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Case,
    Casez,
    Casex,
}

impl CaseKind {
    pub fn keyword(self) -> &'static str {
        match self {
            CaseKind::Case => "case",
            CaseKind::Casez => "casez",
            CaseKind::Casex => "casex",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseItem {
    pub labels: Vec<Expr>,
    pub body: Stmt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stmt {
    Block { stmts: Vec<Stmt>, loc: Loc },
    If { cond: Expr, then_branch: Box<Stmt>, else_branch: Option<Box<Stmt>>, loc: Loc },
    Case {
        kind: CaseKind,
        subject: Expr,
        items: Vec<CaseItem>,
        default: Option<Box<Stmt>>,
        loc: Loc,
    },
    /// `lhs = rhs`
    Blocking { lhs: Expr, rhs: Expr, loc: Loc },
    /// `lhs <= rhs`
    NonBlocking { lhs: Expr, rhs: Expr, loc: Loc },
    /// `for (int i = init; cond; i = step) body` with a constant trip count.
    For { var: String, init: Expr, cond: Expr, step: Expr, body: Box<Stmt>, loc: Loc },
    Null { loc: Loc },
}

impl Stmt {
    pub fn loc(&self) -> Loc {
        match self {
            Stmt::Block { loc, .. }
            | Stmt::If { loc, .. }
            | Stmt::Case { loc, .. }
            | Stmt::Blocking { loc, .. }
            | Stmt::NonBlocking { loc, .. }
            | Stmt::For { loc, .. }
            | Stmt::Null { loc } => *loc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Base {
    Binary,
    Octal,
    Decimal,
    Hex,
}

impl Base {
    pub fn radix(self) -> u32 {
        match self {
            Base::Binary => 2,
            Base::Octal => 8,
            Base::Decimal => 10,
            Base::Hex => 16,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Base::Binary => 'b',
            Base::Octal => 'o',
            Base::Decimal => 'd',
            Base::Hex => 'h',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Literal {
    /// A plain or based number. `size` is `None` for unsized literals.
    Number {
        size: Option<u32>,
        signed: bool,
        base: Option<Base>,
        value: u64,
        /// Bits written as `x`, `z` or `?`.
        xz_mask: u64,
    },
    /// `'0` or `'1`, which fill the context width.
    Fill(bool),
    Str(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Plus,
    Neg,
    BitNot,
    LogNot,
    RedAnd,
    RedNand,
    RedOr,
    RedNor,
    RedXor,
    RedXnor,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Plus => "+",
            UnaryOp::Neg => "-",
            UnaryOp::BitNot => "~",
            UnaryOp::LogNot => "!",
            UnaryOp::RedAnd => "&",
            UnaryOp::RedNand => "~&",
            UnaryOp::RedOr => "|",
            UnaryOp::RedNor => "~|",
            UnaryOp::RedXor => "^",
            UnaryOp::RedXnor => "~^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Mul,
    Div,
    Mod,
    Pow,
    Add,
    Sub,
    Shl,
    Shr,
    AShl,
    AShr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    BitAnd,
    BitXor,
    BitXnor,
    BitOr,
    LogAnd,
    LogOr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
            BinaryOp::Pow => "**",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::AShl => "<<<",
            BinaryOp::AShr => ">>>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::CaseEq => "===",
            BinaryOp::CaseNe => "!==",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitXor => "^",
            BinaryOp::BitXnor => "~^",
            BinaryOp::BitOr => "|",
            BinaryOp::LogAnd => "&&",
            BinaryOp::LogOr => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Pow => 12,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod => 11,
            BinaryOp::Add | BinaryOp::Sub => 10,
            BinaryOp::Shl | BinaryOp::Shr | BinaryOp::AShl | BinaryOp::AShr => 9,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 8,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::CaseEq | BinaryOp::CaseNe => 7,
            BinaryOp::BitAnd => 6,
            BinaryOp::BitXor | BinaryOp::BitXnor => 5,
            BinaryOp::BitOr => 4,
            BinaryOp::LogAnd => 3,
            BinaryOp::LogOr => 2,
        }
    }

    pub fn from_symbol(sym: &str) -> Option<BinaryOp> {
        Some(match sym {
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "%" => BinaryOp::Mod,
            "**" => BinaryOp::Pow,
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "<<" => BinaryOp::Shl,
            ">>" => BinaryOp::Shr,
            "<<<" => BinaryOp::AShl,
            ">>>" => BinaryOp::AShr,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "===" => BinaryOp::CaseEq,
            "!==" => BinaryOp::CaseNe,
            "&" => BinaryOp::BitAnd,
            "^" => BinaryOp::BitXor,
            "~^" | "^~" => BinaryOp::BitXnor,
            "|" => BinaryOp::BitOr,
            "&&" => BinaryOp::LogAnd,
            "||" => BinaryOp::LogOr,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Ident { name: String, loc: Loc },
    /// Dotted hierarchical reference such as `u_fifo.count`.
    Hier { path: Vec<String>, loc: Loc },
    Literal { lit: Literal, loc: Loc },
    Unary { op: UnaryOp, arg: Box<Expr>, loc: Loc },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr>, loc: Loc },
    Ternary { cond: Box<Expr>, then_expr: Box<Expr>, else_expr: Box<Expr>, loc: Loc },
    Concat { parts: Vec<Expr>, loc: Loc },
    Replicate { count: Box<Expr>, parts: Vec<Expr>, loc: Loc },
    /// `base[index]`: a bit select or an unpacked-array element.
    Index { base: Box<Expr>, index: Box<Expr>, loc: Loc },
    /// `base[msb:lsb]`
    Range { base: Box<Expr>, msb: Box<Expr>, lsb: Box<Expr>, loc: Loc },
    /// `base[start +: width]` (`up`) or `base[start -: width]`.
    IndexedRange { base: Box<Expr>, start: Box<Expr>, width: Box<Expr>, up: bool, loc: Loc },
    /// `$name(args)`
    SysCall { name: String, args: Vec<Expr>, loc: Loc },
}

impl Expr {
    pub fn loc(&self) -> Loc {
        match self {
            Expr::Ident { loc, .. }
            | Expr::Hier { loc, .. }
            | Expr::Literal { loc, .. }
            | Expr::Unary { loc, .. }
            | Expr::Binary { loc, .. }
            | Expr::Ternary { loc, .. }
            | Expr::Concat { loc, .. }
            | Expr::Replicate { loc, .. }
            | Expr::Index { loc, .. }
            | Expr::Range { loc, .. }
            | Expr::IndexedRange { loc, .. }
            | Expr::SysCall { loc, .. } => *loc,
        }
    }

    pub fn ident(name: &str) -> Expr {
        Expr::Ident { name: name.to_string(), loc: Loc::default() }
    }

    pub fn number(value: u64) -> Expr {
        Expr::Literal {
            lit: Literal::Number { size: None, signed: false, base: None, value, xz_mask: 0 },
            loc: Loc::default(),
        }
    }

    /// The variable at the root of an lvalue (`a` in `a[3][1:0]`).
    pub fn root_name(&self) -> Option<&str> {
        match self {
            Expr::Ident { name, .. } => Some(name),
            Expr::Index { base, .. } | Expr::Range { base, .. } | Expr::IndexedRange { base, .. } => {
                base.root_name()
            }
            _ => None,
        }
    }

    /// Visits this expression and all sub-expressions, parents first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Ident { .. } | Expr::Hier { .. } | Expr::Literal { .. } => {}
            Expr::Unary { arg, .. } => arg.walk(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Ternary { cond, then_expr, else_expr, .. } => {
                cond.walk(f);
                then_expr.walk(f);
                else_expr.walk(f);
            }
            Expr::Concat { parts, .. } => parts.iter().for_each(|p| p.walk(f)),
            Expr::Replicate { count, parts, .. } => {
                count.walk(f);
                parts.iter().for_each(|p| p.walk(f));
            }
            Expr::Index { base, index, .. } => {
                base.walk(f);
                index.walk(f);
            }
            Expr::Range { base, msb, lsb, .. } => {
                base.walk(f);
                msb.walk(f);
                lsb.walk(f);
            }
            Expr::IndexedRange { base, start, width, .. } => {
                base.walk(f);
                start.walk(f);
                width.walk(f);
            }
            Expr::SysCall { args, .. } => args.iter().for_each(|a| a.walk(f)),
        }
    }
}

impl Stmt {
    /// Visits every statement in this tree, parents first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        match self {
            Stmt::Block { stmts, .. } => stmts.iter().for_each(|s| s.walk(f)),
            Stmt::If { then_branch, else_branch, .. } => {
                then_branch.walk(f);
                if let Some(e) = else_branch {
                    e.walk(f);
                }
            }
            Stmt::Case { items, default, .. } => {
                items.iter().for_each(|i| i.body.walk(f));
                if let Some(d) = default {
                    d.walk(f);
                }
            }
            Stmt::For { body, .. } => body.walk(f),
            Stmt::Blocking { .. } | Stmt::NonBlocking { .. } | Stmt::Null { .. } => {}
        }
    }
}
