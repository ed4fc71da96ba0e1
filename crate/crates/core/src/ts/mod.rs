// SPDX-License-Identifier: Apache-2.0

//! Word-level transition systems over a hash-consed expression arena.

pub mod dump;
pub mod elaborate;
pub(crate) mod lower;
pub mod sim;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostic;

pub use elaborate::{elaborate, elaborate_source};
pub use sim::{simulate_step, StepResult};

/// Widest bitvector supported anywhere in the toolkit.
pub const MAX_WIDTH: u32 = 64;

/// All-ones mask of `width` bits.
pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExprRef(pub u32);

impl ExprRef {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    RedAnd,
    RedOr,
    RedXor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    And,
    Or,
    Xor,
    Add,
    Sub,
    Mul,
    /// Unsigned division; `x / 0` is all ones.
    Udiv,
    /// Unsigned remainder; `x % 0` is `x`.
    Urem,
    Shl,
    Lshr,
    Eq,
    Ult,
}

impl UnOp {
    pub fn name(self) -> &'static str {
        match self {
            UnOp::Not => "not",
            UnOp::RedAnd => "redand",
            UnOp::RedOr => "redor",
            UnOp::RedXor => "redxor",
        }
    }
}

impl BinOp {
    pub fn name(self) -> &'static str {
        match self {
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Udiv => "udiv",
            BinOp::Urem => "urem",
            BinOp::Shl => "shl",
            BinOp::Lshr => "lshr",
            BinOp::Eq => "eq",
            BinOp::Ult => "ult",
        }
    }

    fn commutative(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Add | BinOp::Mul | BinOp::Eq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Node {
    Const { value: u64, width: u32 },
    Input { index: u32, width: u32 },
    State { index: u32, width: u32 },
    Unary { op: UnOp, arg: ExprRef, width: u32 },
    Binary { op: BinOp, lhs: ExprRef, rhs: ExprRef, width: u32 },
    Mux { cond: ExprRef, then_: ExprRef, else_: ExprRef, width: u32 },
    /// `{hi, lo}`
    Concat { hi: ExprRef, lo: ExprRef, width: u32 },
    /// `arg[lo + width - 1 : lo]`
    Slice { arg: ExprRef, lo: u32, width: u32 },
    Zext { arg: ExprRef, width: u32 },
}

impl Node {
    pub fn width(&self) -> u32 {
        match *self {
            Node::Const { width, .. }
            | Node::Input { width, .. }
            | Node::State { width, .. }
            | Node::Unary { width, .. }
            | Node::Binary { width, .. }
            | Node::Mux { width, .. }
            | Node::Concat { width, .. }
            | Node::Slice { width, .. }
            | Node::Zext { width, .. } => width,
        }
    }

    pub fn children(&self) -> impl Iterator<Item = ExprRef> {
        let v: [Option<ExprRef>; 3] = match *self {
            Node::Const { .. } | Node::Input { .. } | Node::State { .. } => [None, None, None],
            Node::Unary { arg, .. } | Node::Slice { arg, .. } | Node::Zext { arg, .. } => {
                [Some(arg), None, None]
            }
            Node::Binary { lhs, rhs, .. } => [Some(lhs), Some(rhs), None],
            Node::Concat { hi, lo, .. } => [Some(hi), Some(lo), None],
            Node::Mux { cond, then_, else_, .. } => [Some(cond), Some(then_), Some(else_)],
        };
        v.into_iter().flatten()
    }
}

/// Evaluates a unary operator on concrete operands.
pub fn eval_unary(op: UnOp, a: u64, arg_width: u32, width: u32) -> u64 {
    match op {
        UnOp::Not => !a & mask(width),
        UnOp::RedAnd => (a == mask(arg_width)) as u64,
        UnOp::RedOr => (a != 0) as u64,
        UnOp::RedXor => (a.count_ones() & 1) as u64,
    }
}

/// Evaluates a binary operator; `a` and `b` are already masked to their widths.
pub fn eval_binary(op: BinOp, a: u64, b: u64, width: u32) -> u64 {
    let m = mask(width);
    match op {
        BinOp::And => a & b,
        BinOp::Or => a | b,
        BinOp::Xor => a ^ b,
        BinOp::Add => a.wrapping_add(b) & m,
        BinOp::Sub => a.wrapping_sub(b) & m,
        BinOp::Mul => a.wrapping_mul(b) & m,
        BinOp::Udiv => {
            if b == 0 {
                m
            } else {
                a / b
            }
        }
        BinOp::Urem => {
            if b == 0 {
                a
            } else {
                a % b
            }
        }
        BinOp::Shl => {
            if b >= width as u64 {
                0
            } else {
                (a << b) & m
            }
        }
        BinOp::Lshr => {
            if b >= 64 {
                0
            } else {
                a >> b
            }
        }
        BinOp::Eq => (a == b) as u64,
        BinOp::Ult => (a < b) as u64,
    }
}

/// Hash-consed expression DAG. Node indices are a topological order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExprArena {
    nodes: Vec<Node>,
    #[serde(skip)]
    table: HashMap<Node, ExprRef>,
}

impl PartialEq for ExprArena {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for ExprArena {}

impl ExprArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, e: ExprRef) -> &Node {
        &self.nodes[e.index()]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn width(&self, e: ExprRef) -> u32 {
        self.nodes[e.index()].width()
    }

    pub fn const_value(&self, e: ExprRef) -> Option<u64> {
        match self.nodes[e.index()] {
            Node::Const { value, .. } => Some(value),
            _ => None,
        }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn rehash(&mut self) {
        self.table = self.nodes.iter().enumerate().map(|(i, n)| (*n, ExprRef(i as u32))).collect();
    }

    fn intern(&mut self, node: Node) -> ExprRef {
        debug_assert!(node.width() >= 1 && node.width() <= MAX_WIDTH, "{node:?}");
        if let Some(&r) = self.table.get(&node) {
            return r;
        }
        let r = ExprRef(self.nodes.len() as u32);
        self.nodes.push(node);
        self.table.insert(node, r);
        r
    }

    pub fn konst(&mut self, value: u64, width: u32) -> ExprRef {
        self.intern(Node::Const { value: value & mask(width), width })
    }

    pub fn zero(&mut self, width: u32) -> ExprRef {
        self.konst(0, width)
    }

    pub fn ones(&mut self, width: u32) -> ExprRef {
        self.konst(u64::MAX, width)
    }

    pub fn tru(&mut self) -> ExprRef {
        self.konst(1, 1)
    }

    pub fn fals(&mut self) -> ExprRef {
        self.konst(0, 1)
    }

    pub fn input(&mut self, index: u32, width: u32) -> ExprRef {
        self.intern(Node::Input { index, width })
    }

    pub fn state(&mut self, index: u32, width: u32) -> ExprRef {
        self.intern(Node::State { index, width })
    }

    pub fn unary(&mut self, op: UnOp, arg: ExprRef) -> ExprRef {
        let aw = self.width(arg);
        let width = if op == UnOp::Not { aw } else { 1 };
        if let Some(a) = self.const_value(arg) {
            return self.konst(eval_unary(op, a, aw, width), width);
        }
        match op {
            UnOp::Not => {
                if let Node::Unary { op: UnOp::Not, arg: inner, .. } = *self.node(arg) {
                    return inner;
                }
            }
            _ if aw == 1 => return arg,
            _ => {}
        }
        self.intern(Node::Unary { op, arg, width })
    }

    pub fn not(&mut self, a: ExprRef) -> ExprRef {
        self.unary(UnOp::Not, a)
    }

    pub fn red_or(&mut self, a: ExprRef) -> ExprRef {
        self.unary(UnOp::RedOr, a)
    }

    pub fn red_and(&mut self, a: ExprRef) -> ExprRef {
        self.unary(UnOp::RedAnd, a)
    }

    pub fn red_xor(&mut self, a: ExprRef) -> ExprRef {
        self.unary(UnOp::RedXor, a)
    }

    pub fn binary(&mut self, op: BinOp, lhs: ExprRef, rhs: ExprRef) -> ExprRef {
        let lw = self.width(lhs);
        let rw = self.width(rhs);
        let shift = matches!(op, BinOp::Shl | BinOp::Lshr);
        assert!(shift || lw == rw, "width mismatch in {op:?}: {lw} vs {rw}");
        let width = match op {
            BinOp::Eq | BinOp::Ult => 1,
            _ => lw,
        };
        let (mut a, mut b) = (lhs, rhs);
        if op.commutative() {
            let ka = self.const_value(a).is_some();
            let kb = self.const_value(b).is_some();
            if (kb && !ka) || (ka == kb && a > b) {
                std::mem::swap(&mut a, &mut b);
            }
        }
        let ca = self.const_value(a);
        let cb = self.const_value(b);
        if let (Some(x), Some(y)) = (ca, cb) {
            return self.konst(eval_binary(op, x, y, lw), width);
        }
        let m = mask(lw);
        // Constants sort first for commutative operators.
        match (op, ca, cb) {
            (BinOp::And, Some(0), _) => return a,
            (BinOp::And, Some(x), _) if x == m => return b,
            (BinOp::Or, Some(0), _) => return b,
            (BinOp::Or, Some(x), _) if x == m => return a,
            (BinOp::Xor | BinOp::Add, Some(0), _) => return b,
            (BinOp::Xor, Some(x), _) if x == m => return self.not(b),
            (BinOp::Mul, Some(0), _) => return a,
            (BinOp::Mul, Some(1), _) => return b,
            (BinOp::Sub | BinOp::Shl | BinOp::Lshr, _, Some(0)) => return a,
            (BinOp::Shl | BinOp::Lshr, _, Some(s)) if s >= lw as u64 => return self.zero(lw),
            (BinOp::Shl | BinOp::Lshr, Some(0), _) => return a,
            (BinOp::Ult, _, Some(0)) => return self.fals(),
            (BinOp::Eq, Some(1), _) if lw == 1 => return b,
            (BinOp::Eq, Some(0), _) if lw == 1 => return self.not(b),
            _ => {}
        }
        if matches!(op, BinOp::Eq | BinOp::Ult) {
            if let Some(r) = self.narrow_compare(op, a, b) {
                return r;
            }
        }
        if a == b {
            match op {
                BinOp::And | BinOp::Or => return a,
                BinOp::Xor | BinOp::Sub => return self.zero(lw),
                BinOp::Eq => return self.tru(),
                BinOp::Ult => return self.fals(),
                _ => {}
            }
        }
        self.intern(Node::Binary { op, lhs: a, rhs: b, width })
    }

    /// Compares zero-extended operands at their narrower width.
    fn narrow_compare(&mut self, op: BinOp, a: ExprRef, b: ExprRef) -> Option<ExprRef> {
        let inner = |s: &Self, e: ExprRef| match *s.node(e) {
            Node::Zext { arg, .. } => Some(arg),
            _ => None,
        };
        let (ia, ib) = (inner(self, a), inner(self, b));
        let (ca, cb) = (self.const_value(a), self.const_value(b));
        match (ia, ib, ca, cb) {
            (Some(x), Some(y), _, _) => {
                let w = self.width(x).max(self.width(y));
                let (x, y) = (self.zext(x, w), self.zext(y, w));
                Some(self.binary(op, x, y))
            }
            (Some(x), None, _, Some(c)) => {
                let w = self.width(x);
                if c > mask(w) {
                    // x < c always; x == c never.
                    return Some(if op == BinOp::Eq { self.fals() } else { self.tru() });
                }
                let k = self.konst(c, w);
                Some(self.binary(op, x, k))
            }
            (None, Some(y), Some(c), _) => {
                let w = self.width(y);
                if c > mask(w) {
                    return Some(self.fals());
                }
                let k = self.konst(c, w);
                Some(self.binary(op, k, y))
            }
            _ => None,
        }
    }

    pub fn and(&mut self, a: ExprRef, b: ExprRef) -> ExprRef {
        self.binary(BinOp::And, a, b)
    }

    pub fn or(&mut self, a: ExprRef, b: ExprRef) -> ExprRef {
        self.binary(BinOp::Or, a, b)
    }

    pub fn xor(&mut self, a: ExprRef, b: ExprRef) -> ExprRef {
        self.binary(BinOp::Xor, a, b)
    }

    pub fn add(&mut self, a: ExprRef, b: ExprRef) -> ExprRef {
        self.binary(BinOp::Add, a, b)
    }

    pub fn sub(&mut self, a: ExprRef, b: ExprRef) -> ExprRef {
        self.binary(BinOp::Sub, a, b)
    }

    pub fn eq(&mut self, a: ExprRef, b: ExprRef) -> ExprRef {
        self.binary(BinOp::Eq, a, b)
    }

    pub fn ne(&mut self, a: ExprRef, b: ExprRef) -> ExprRef {
        let e = self.eq(a, b);
        self.not(e)
    }

    pub fn ult(&mut self, a: ExprRef, b: ExprRef) -> ExprRef {
        self.binary(BinOp::Ult, a, b)
    }

    pub fn ule(&mut self, a: ExprRef, b: ExprRef) -> ExprRef {
        let lt = self.ult(b, a);
        self.not(lt)
    }

    pub fn implies(&mut self, a: ExprRef, b: ExprRef) -> ExprRef {
        let na = self.not(a);
        self.or(na, b)
    }

    pub fn mux(&mut self, cond: ExprRef, then_: ExprRef, else_: ExprRef) -> ExprRef {
        debug_assert_eq!(self.width(cond), 1);
        let w = self.width(then_);
        assert_eq!(w, self.width(else_), "mux arm width mismatch");
        if then_ == else_ {
            return then_;
        }
        match self.const_value(cond) {
            Some(1) => return then_,
            Some(_) => return else_,
            None => {}
        }
        if w == 1 {
            match (self.const_value(then_), self.const_value(else_)) {
                (Some(1), Some(0)) => return cond,
                (Some(0), Some(1)) => return self.not(cond),
                (Some(0), None) => {
                    let nc = self.not(cond);
                    return self.and(nc, else_);
                }
                (Some(1), None) => return self.or(cond, else_),
                (None, Some(0)) => return self.and(cond, then_),
                (None, Some(1)) => {
                    let nc = self.not(cond);
                    return self.or(nc, then_);
                }
                _ => {}
            }
        }
        if let Node::Unary { op: UnOp::Not, arg, .. } = *self.node(cond) {
            return self.mux(arg, else_, then_);
        }
        self.intern(Node::Mux { cond, then_, else_, width: w })
    }

    pub fn concat(&mut self, hi: ExprRef, lo: ExprRef) -> ExprRef {
        let hw = self.width(hi);
        let lw = self.width(lo);
        let width = hw + lw;
        assert!(width <= MAX_WIDTH, "concatenation wider than {MAX_WIDTH} bits");
        if let (Some(h), Some(l)) = (self.const_value(hi), self.const_value(lo)) {
            return self.konst((h << lw) | l, width);
        }
        if self.const_value(hi) == Some(0) {
            return self.zext(lo, width);
        }
        // Adjacent slices of the same word merge back together.
        if let (Node::Slice { arg: a1, lo: l1, .. }, Node::Slice { arg: a2, lo: l2, width: w2 }) =
            (*self.node(hi), *self.node(lo))
        {
            if a1 == a2 && l1 == l2 + w2 {
                return self.slice(a1, l2, width);
            }
        }
        self.intern(Node::Concat { hi, lo, width })
    }

    pub fn slice(&mut self, arg: ExprRef, lo: u32, width: u32) -> ExprRef {
        let aw = self.width(arg);
        assert!(lo + width <= aw, "slice [{}:{}] out of width {}", lo + width - 1, lo, aw);
        if lo == 0 && width == aw {
            return arg;
        }
        match *self.node(arg) {
            Node::Const { value, .. } => return self.konst(value >> lo, width),
            Node::Slice { arg: inner, lo: l2, .. } => return self.slice(inner, lo + l2, width),
            Node::Concat { hi, lo: low, .. } => {
                let lw = self.width(low);
                if lo + width <= lw {
                    return self.slice(low, lo, width);
                }
                if lo >= lw {
                    return self.slice(hi, lo - lw, width);
                }
            }
            Node::Zext { arg: inner, .. } => {
                let iw = self.width(inner);
                if lo + width <= iw {
                    return self.slice(inner, lo, width);
                }
                if lo >= iw {
                    return self.zero(width);
                }
                let part = self.slice(inner, lo, iw - lo);
                return self.zext(part, width);
            }
            _ => {}
        }
        self.intern(Node::Slice { arg, lo, width })
    }

    pub fn zext(&mut self, arg: ExprRef, width: u32) -> ExprRef {
        let aw = self.width(arg);
        assert!(width >= aw);
        if width == aw {
            return arg;
        }
        match *self.node(arg) {
            Node::Const { value, .. } => return self.konst(value, width),
            Node::Zext { arg: inner, .. } => return self.zext(inner, width),
            _ => {}
        }
        self.intern(Node::Zext { arg, width })
    }

    /// Zero-extends or truncates to `width`.
    pub fn resize(&mut self, arg: ExprRef, width: u32) -> ExprRef {
        let aw = self.width(arg);
        if width >= aw {
            self.zext(arg, width)
        } else {
            self.slice(arg, 0, width)
        }
    }

    /// Nonzero test: a 1-bit boolean.
    pub fn to_bool(&mut self, arg: ExprRef) -> ExprRef {
        self.red_or(arg)
    }

    /// Nodes reachable from `roots`, in increasing (topological) order.
    pub fn cone(&self, roots: &[ExprRef]) -> Vec<ExprRef> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<ExprRef> = roots.to_vec();
        while let Some(e) = stack.pop() {
            if std::mem::replace(&mut seen[e.index()], true) {
                continue;
            }
            stack.extend(self.nodes[e.index()].children());
        }
        seen.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| ExprRef(i as u32)).collect()
    }

    /// Rebuilds `root` with `Input`/`State` leaves replaced by `subst`, folding constants.
    pub fn substitute(&mut self, root: ExprRef, subst: &dyn Fn(&Node) -> Option<ExprRef>) -> ExprRef {
        let cone = self.cone(&[root]);
        let mut map: HashMap<ExprRef, ExprRef> = HashMap::with_capacity(cone.len());
        for e in cone {
            let node = self.nodes[e.index()];
            let m = |r: ExprRef| map[&r];
            let new = match node {
                Node::Const { .. } => e,
                Node::Input { .. } | Node::State { .. } => subst(&node).unwrap_or(e),
                Node::Unary { op, arg, .. } => self.unary(op, m(arg)),
                Node::Binary { op, lhs, rhs, .. } => self.binary(op, m(lhs), m(rhs)),
                Node::Mux { cond, then_, else_, .. } => self.mux(m(cond), m(then_), m(else_)),
                Node::Concat { hi, lo, .. } => self.concat(m(hi), m(lo)),
                Node::Slice { arg, lo, width } => self.slice(m(arg), lo, width),
                Node::Zext { arg, width } => self.zext(m(arg), width),
            };
            map.insert(e, new);
        }
        map[&root]
    }
}

/// Evaluates a fixed set of roots repeatedly under different valuations.
#[derive(Debug, Clone)]
pub struct Evaluator {
    order: Vec<ExprRef>,
    values: Vec<u64>,
}

impl Evaluator {
    pub fn new(arena: &ExprArena, roots: &[ExprRef]) -> Self {
        Evaluator { order: arena.cone(roots), values: vec![0; arena.len()] }
    }

    pub fn run(&mut self, arena: &ExprArena, inputs: &[u64], states: &[u64]) {
        for &e in &self.order {
            let node = arena.node(e);
            let v = match *node {
                Node::Const { value, .. } => value,
                Node::Input { index, width } => inputs[index as usize] & mask(width),
                Node::State { index, width } => states[index as usize] & mask(width),
                Node::Unary { op, arg, width } => {
                    eval_unary(op, self.values[arg.index()], arena.width(arg), width)
                }
                Node::Binary { op, lhs, rhs, .. } => eval_binary(
                    op,
                    self.values[lhs.index()],
                    self.values[rhs.index()],
                    arena.width(lhs),
                ),
                Node::Mux { cond, then_, else_, .. } => {
                    if self.values[cond.index()] != 0 {
                        self.values[then_.index()]
                    } else {
                        self.values[else_.index()]
                    }
                }
                Node::Concat { hi, lo, .. } => {
                    (self.values[hi.index()] << arena.width(lo)) | self.values[lo.index()]
                }
                Node::Slice { arg, lo, width } => (self.values[arg.index()] >> lo) & mask(width),
                Node::Zext { arg, .. } => self.values[arg.index()],
            };
            self.values[e.index()] = v;
        }
    }

    pub fn get(&self, e: ExprRef) -> u64 {
        self.values[e.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputVar {
    pub name: String,
    pub width: u32,
    pub expr: ExprRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVar {
    pub name: String,
    pub width: u32,
    /// Value forced by reset, when reset drives this state to a constant.
    pub reset_value: Option<u64>,
    /// Initial value; `None` means free (any value).
    pub init: Option<u64>,
    pub expr: ExprRef,
    pub next: ExprRef,
}

/// A named combinational signal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Define {
    pub name: String,
    pub width: u32,
    pub expr: ExprRef,
}

/// One procedural assignment to a state, kept for counterexample explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Driver {
    pub state: usize,
    /// Path condition under which the assignment executes.
    pub guard: ExprRef,
    /// Value assigned when the guard holds.
    pub value: ExprRef,
    pub line: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetInfo {
    pub name: String,
    pub active_low: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub lo: i64,
    pub hi: i64,
    pub elem_width: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionSystem {
    pub top: String,
    pub arena: ExprArena,
    pub inputs: Vec<InputVar>,
    pub states: Vec<StateVar>,
    /// Every named combinational signal, flattened (`inst.sig`).
    pub defines: Vec<Define>,
    /// Top-level output ports.
    pub outputs: Vec<Define>,
    pub clock: Option<String>,
    pub reset: Option<ResetInfo>,
    pub arrays: BTreeMap<String, ArrayInfo>,
    /// Packed declared ranges `(msb, lsb)` for named signals.
    pub ranges: BTreeMap<String, (i64, i64)>,
    /// `(instance path, module name)` for every instance below the top.
    pub instances: Vec<(String, String)>,
    pub drivers: Vec<Driver>,
    pub warnings: Vec<Diagnostic>,
}

impl TransitionSystem {
    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|i| i.name == name)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    /// Looks up an input, state or define by flattened name.
    pub fn signal(&self, name: &str) -> Option<(ExprRef, u32)> {
        if let Some(i) = self.inputs.iter().find(|i| i.name == name) {
            return Some((i.expr, i.width));
        }
        if let Some(s) = self.states.iter().find(|s| s.name == name) {
            return Some((s.expr, s.width));
        }
        self.defines.iter().find(|d| d.name == name).map(|d| (d.expr, d.width))
    }

    pub fn state_bits(&self) -> u32 {
        self.states.iter().map(|s| s.width).sum()
    }

    pub fn input_bits(&self) -> u32 {
        self.inputs.iter().map(|i| i.width).sum()
    }

    /// Appends a fresh state whose next function is set later.
    pub fn add_state(&mut self, name: String, width: u32, init: Option<u64>) -> usize {
        let index = self.states.len();
        let expr = self.arena.state(index as u32, width);
        self.states.push(StateVar { name, width, reset_value: None, init, expr, next: expr });
        index
    }

    /// Appends a fresh input.
    pub fn add_input(&mut self, name: String, width: u32) -> usize {
        let index = self.inputs.len();
        let expr = self.arena.input(index as u32, width);
        self.inputs.push(InputVar { name, width, expr });
        index
    }

    /// Expression asserting that the reset input is active, if a reset is known.
    pub fn reset_active(&mut self) -> Option<ExprRef> {
        let r = self.reset.clone()?;
        let (e, _) = self.signal(&r.name)?;
        let b = self.arena.to_bool(e);
        Some(if r.active_low { self.arena.not(b) } else { b })
    }
}
