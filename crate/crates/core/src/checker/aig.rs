// SPDX-License-Identifier: Apache-2.0

//! And-inverter graphs with structural hashing, and bit-blasting of
//! transition-system expressions onto them.

use std::collections::HashMap;
use std::fmt;

use crate::ts::{BinOp, ExprArena, ExprRef, Node, UnOp};

/// A possibly negated AIG variable: `var << 1 | negated`. Variable 0 is the
/// constant false.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(pub u32);

impl Lit {
    pub const FALSE: Lit = Lit(0);
    pub const TRUE: Lit = Lit(1);

    pub fn new(var: u32, negated: bool) -> Lit {
        Lit(var << 1 | negated as u32)
    }

    pub fn var(self) -> u32 {
        self.0 >> 1
    }

    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn is_const(self) -> bool {
        self.var() == 0
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Lit::FALSE => write!(f, "0"),
            Lit::TRUE => write!(f, "1"),
            l => write!(f, "{}x{}", if l.is_negated() { "!" } else { "" }, l.var()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AigNode {
    Const,
    Input,
    And(Lit, Lit),
}

#[derive(Debug, Clone)]
pub struct Aig {
    nodes: Vec<AigNode>,
    strash: HashMap<(Lit, Lit), Lit>,
}

impl Default for Aig {
    fn default() -> Self {
        Self::new()
    }
}

impl Aig {
    pub fn new() -> Self {
        Aig { nodes: vec![AigNode::Const], strash: HashMap::new() }
    }

    /// Number of variables including the constant.
    pub fn num_vars(&self) -> u32 {
        self.nodes.len() as u32
    }

    pub fn num_ands(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, AigNode::And(..))).count()
    }

    pub fn node(&self, var: u32) -> AigNode {
        self.nodes[var as usize]
    }

    pub fn input(&mut self) -> Lit {
        self.nodes.push(AigNode::Input);
        Lit::new(self.nodes.len() as u32 - 1, false)
    }

    pub fn inputs(&mut self, n: u32) -> Vec<Lit> {
        (0..n).map(|_| self.input()).collect()
    }

    pub fn and(&mut self, a: Lit, b: Lit) -> Lit {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == Lit::FALSE || a == !b {
            return Lit::FALSE;
        }
        if a == Lit::TRUE || a == b {
            return b;
        }
        if let Some(&l) = self.strash.get(&(a, b)) {
            return l;
        }
        self.nodes.push(AigNode::And(a, b));
        let l = Lit::new(self.nodes.len() as u32 - 1, false);
        self.strash.insert((a, b), l);
        l
    }

    pub fn or(&mut self, a: Lit, b: Lit) -> Lit {
        !self.and(!a, !b)
    }

    pub fn xor(&mut self, a: Lit, b: Lit) -> Lit {
        let x = self.and(a, !b);
        let y = self.and(!a, b);
        self.or(x, y)
    }

    pub fn mux(&mut self, c: Lit, t: Lit, e: Lit) -> Lit {
        if t == e {
            return t;
        }
        let x = self.and(c, t);
        let y = self.and(!c, e);
        self.or(x, y)
    }

    pub fn and_all(&mut self, lits: impl IntoIterator<Item = Lit>) -> Lit {
        lits.into_iter().fold(Lit::TRUE, |acc, l| self.and(acc, l))
    }

    pub fn or_all(&mut self, lits: impl IntoIterator<Item = Lit>) -> Lit {
        lits.into_iter().fold(Lit::FALSE, |acc, l| self.or(acc, l))
    }

    /// Evaluates every node given values for the input variables.
    pub fn simulate(&self, input: &dyn Fn(u32) -> bool) -> Vec<bool> {
        let mut v = vec![false; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            v[i] = match *n {
                AigNode::Const => false,
                AigNode::Input => input(i as u32),
                AigNode::And(a, b) => lit_value(&v, a) && lit_value(&v, b),
            };
        }
        v
    }

    /// Variables in the transitive fan-in of `roots`, in topological order.
    pub fn cone(&self, roots: &[Lit]) -> Vec<u32> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<u32> = roots.iter().map(|l| l.var()).collect();
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v as usize], true) {
                continue;
            }
            if let AigNode::And(a, b) = self.nodes[v as usize] {
                stack.push(a.var());
                stack.push(b.var());
            }
        }
        (0..self.nodes.len() as u32).filter(|&v| seen[v as usize]).collect()
    }
}

pub fn lit_value(values: &[bool], l: Lit) -> bool {
    values[l.var() as usize] ^ l.is_negated()
}

/// Little-endian bit vector.
pub type Bits = Vec<Lit>;

pub fn const_bits(value: u64, width: u32) -> Bits {
    (0..width).map(|i| if value >> i & 1 == 1 { Lit::TRUE } else { Lit::FALSE }).collect()
}

fn add_bits(g: &mut Aig, a: &[Lit], b: &[Lit], mut carry: Lit) -> (Bits, Lit) {
    let mut out = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        let p = g.xor(x, y);
        out.push(g.xor(p, carry));
        let g1 = g.and(x, y);
        let g2 = g.and(p, carry);
        carry = g.or(g1, g2);
    }
    (out, carry)
}

fn neg_bits(a: &[Lit]) -> Bits {
    a.iter().map(|&l| !l).collect()
}

/// `a < b` as unsigned numbers of equal width.
fn ult_bits(g: &mut Aig, a: &[Lit], b: &[Lit]) -> Lit {
    // a - b borrows exactly when a < b.
    let (_, carry) = add_bits(g, a, &neg_bits(b), Lit::TRUE);
    !carry
}

fn eq_bits(g: &mut Aig, a: &[Lit], b: &[Lit]) -> Lit {
    let diffs: Vec<Lit> = a.iter().zip(b).map(|(&x, &y)| g.xor(x, y)).collect();
    let any = g.or_all(diffs);
    !any
}

fn mul_bits(g: &mut Aig, a: &[Lit], b: &[Lit]) -> Bits {
    let w = a.len();
    let mut acc = const_bits(0, w as u32);
    for (i, &bi) in b.iter().enumerate() {
        if bi == Lit::FALSE {
            continue;
        }
        let mut part = vec![Lit::FALSE; w];
        for j in 0..w - i {
            part[i + j] = g.and(a[j], bi);
        }
        acc = add_bits(g, &acc, &part, Lit::FALSE).0;
    }
    acc
}

/// Restoring division. Division by zero yields all ones and remainder `a`.
fn divrem_bits(g: &mut Aig, a: &[Lit], b: &[Lit]) -> (Bits, Bits) {
    let w = a.len();
    let mut rem = const_bits(0, w as u32 + 1);
    let mut bx: Bits = b.to_vec();
    bx.push(Lit::FALSE);
    let mut q = vec![Lit::FALSE; w];
    for i in (0..w).rev() {
        rem.pop();
        rem.insert(0, a[i]);
        let lt = ult_bits(g, &rem, &bx);
        let (diff, _) = add_bits(g, &rem, &neg_bits(&bx), Lit::TRUE);
        q[i] = !lt;
        rem = rem.iter().zip(&diff).map(|(&r, &d)| g.mux(lt, r, d)).collect();
    }
    rem.pop();
    (q, rem)
}

fn shift_bits(g: &mut Aig, a: &[Lit], amt: &[Lit], left: bool) -> Bits {
    let w = a.len();
    let mut cur = a.to_vec();
    let mut overflow = Lit::FALSE;
    for (k, &s) in amt.iter().enumerate() {
        let dist = 1u64.checked_shl(k as u32).unwrap_or(u64::MAX);
        if dist >= w as u64 {
            overflow = g.or(overflow, s);
            continue;
        }
        let d = dist as usize;
        let shifted: Bits = (0..w)
            .map(|i| {
                if left {
                    if i >= d { cur[i - d] } else { Lit::FALSE }
                } else if i + d < w {
                    cur[i + d]
                } else {
                    Lit::FALSE
                }
            })
            .collect();
        cur = cur.iter().zip(&shifted).map(|(&c, &sh)| g.mux(s, sh, c)).collect();
    }
    cur.into_iter().map(|l| g.and(l, !overflow)).collect()
}

/// Bit-blasts arena expressions for one time frame.
pub struct Blaster<'a> {
    pub arena: &'a ExprArena,
    pub inputs: &'a [Bits],
    pub states: &'a [Bits],
    cache: HashMap<ExprRef, Bits>,
}

impl<'a> Blaster<'a> {
    pub fn new(arena: &'a ExprArena, inputs: &'a [Bits], states: &'a [Bits]) -> Self {
        Blaster { arena, inputs, states, cache: HashMap::new() }
    }

    pub fn bits(&mut self, g: &mut Aig, root: ExprRef) -> Bits {
        if let Some(b) = self.cache.get(&root) {
            return b.clone();
        }
        for e in self.arena.cone(&[root]) {
            if self.cache.contains_key(&e) {
                continue;
            }
            let b = self.node(g, e);
            self.cache.insert(e, b);
        }
        self.cache[&root].clone()
    }

    pub fn bit(&mut self, g: &mut Aig, root: ExprRef) -> Lit {
        let b = self.bits(g, root);
        g.or_all(b)
    }

    fn node(&self, g: &mut Aig, e: ExprRef) -> Bits {
        let c = |x: ExprRef| &self.cache[&x];
        match *self.arena.node(e) {
            Node::Const { value, width } => const_bits(value, width),
            Node::Input { index, .. } => self.inputs[index as usize].clone(),
            Node::State { index, .. } => self.states[index as usize].clone(),
            Node::Unary { op, arg, .. } => {
                let a = c(arg);
                match op {
                    UnOp::Not => neg_bits(a),
                    UnOp::RedAnd => vec![g.and_all(a.iter().copied())],
                    UnOp::RedOr => vec![g.or_all(a.iter().copied())],
                    UnOp::RedXor => vec![a.iter().fold(Lit::FALSE, |acc, &l| g.xor(acc, l))],
                }
            }
            Node::Binary { op, lhs, rhs, width } => {
                let (a, b) = (c(lhs), c(rhs));
                match op {
                    BinOp::And => a.iter().zip(b).map(|(&x, &y)| g.and(x, y)).collect(),
                    BinOp::Or => a.iter().zip(b).map(|(&x, &y)| g.or(x, y)).collect(),
                    BinOp::Xor => a.iter().zip(b).map(|(&x, &y)| g.xor(x, y)).collect(),
                    BinOp::Add => add_bits(g, a, b, Lit::FALSE).0,
                    BinOp::Sub => add_bits(g, a, &neg_bits(b), Lit::TRUE).0,
                    BinOp::Mul => mul_bits(g, a, b),
                    BinOp::Udiv => divrem_bits(g, a, b).0,
                    BinOp::Urem => divrem_bits(g, a, b).1,
                    BinOp::Shl => shift_bits(g, a, b, true),
                    BinOp::Lshr => shift_bits(g, a, b, false),
                    BinOp::Eq => vec![eq_bits(g, a, b)],
                    BinOp::Ult => vec![ult_bits(g, a, b)],
                }
                .into_iter()
                .take(width as usize)
                .collect()
            }
            Node::Mux { cond, then_, else_, .. } => {
                let s = g.or_all(c(cond).iter().copied());
                c(then_).iter().zip(c(else_)).map(|(&t, &f)| g.mux(s, t, f)).collect()
            }
            Node::Concat { hi, lo, .. } => c(lo).iter().chain(c(hi)).copied().collect(),
            Node::Slice { arg, lo, width } => c(arg)[lo as usize..(lo + width) as usize].to_vec(),
            Node::Zext { arg, width } => {
                let mut b = c(arg).clone();
                b.resize(width as usize, Lit::FALSE);
                b
            }
        }
    }
}
