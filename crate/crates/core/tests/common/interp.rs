// SPDX-License-Identifier: Apache-2.0

//! Direct cycle-based interpreter over the AST of a single flat module.

use std::collections::BTreeMap;

use hwcwe_core::sv::ast::*;

fn mask(w: u32) -> u64 {
    if w >= 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

#[derive(Debug, Clone)]
struct Var {
    width: u32,
    lsb: i64,
    msb: i64,
    /// Unpacked range `(lo, hi)` for arrays.
    array: Option<(i64, i64)>,
}

pub struct Interp<'a> {
    module: &'a ModuleDecl,
    vars: BTreeMap<String, Var>,
    params: BTreeMap<String, (u64, u32)>,
    /// Current values; arrays store elements under `name[i]`.
    pub values: BTreeMap<String, u64>,
    clock: Option<String>,
}

impl<'a> Interp<'a> {
    pub fn new(module: &'a ModuleDecl) -> Self {
        let mut it = Interp {
            module,
            vars: BTreeMap::new(),
            params: BTreeMap::new(),
            values: BTreeMap::new(),
            clock: None,
        };
        for p in &module.params {
            it.add_param(p);
        }
        for p in &module.ports {
            let (msb, lsb) = it.range(p.range.as_ref());
            it.vars.insert(p.name.clone(), Var { width: (msb - lsb).unsigned_abs() as u32 + 1, msb, lsb, array: None });
        }
        for item in &module.items {
            match item {
                Item::Param(p) => it.add_param(p),
                Item::Net(n) => {
                    let (msb, lsb) = match (&n.range, n.kind.implicit_width()) {
                        (None, Some(w)) => (w as i64 - 1, 0),
                        (r, _) => it.range(r.as_ref()),
                    };
                    for v in &n.vars {
                        let array = v.unpacked.first().map(|r| {
                            let (a, b) = it.range(Some(r));
                            (a.min(b), a.max(b))
                        });
                        it.vars.insert(
                            v.name.clone(),
                            Var { width: (msb - lsb).unsigned_abs() as u32 + 1, msb, lsb, array },
                        );
                    }
                }
                Item::Always { sensitivity: Sensitivity::Edges(edges), .. } => {
                    if let Some((Edge::Posedge, c)) = edges.first() {
                        it.clock = Some(c.clone());
                    }
                }
                _ => {}
            }
        }
        for (name, v) in it.vars.clone() {
            match v.array {
                Some((lo, hi)) => {
                    for i in lo..=hi {
                        it.values.insert(format!("{name}[{i}]"), 0);
                    }
                }
                None => {
                    it.values.insert(name, 0);
                }
            }
        }
        it
    }

    fn add_param(&mut self, p: &ParamDecl) {
        let w = match &p.range {
            Some(r) => {
                let (m, l) = self.range(Some(r));
                (m - l).unsigned_abs() as u32 + 1
            }
            None => self.self_width(&p.value).max(1),
        };
        let v = self.eval(&p.value, w);
        self.params.insert(p.name.clone(), (v, w));
    }

    fn range(&self, r: Option<&Range>) -> (i64, i64) {
        match r {
            None => (0, 0),
            Some(r) => (self.konst(&r.msb) as i64, self.konst(&r.lsb) as i64),
        }
    }

    fn konst(&self, e: &Expr) -> u64 {
        let w = self.self_width(e);
        self.eval(e, w)
    }

    pub fn width_of(&self, name: &str) -> u32 {
        self.vars[name].width
    }

    fn lit_width(lit: &Literal) -> u32 {
        match lit {
            Literal::Number { size: Some(n), .. } => *n,
            Literal::Number { value, .. } => (64 - value.leading_zeros()).max(32),
            Literal::Fill(_) => 1,
            Literal::Str(s) => (s.len() as u32 * 8).max(8),
        }
    }

    fn self_width(&self, e: &Expr) -> u32 {
        use BinaryOp::*;
        match e {
            Expr::Ident { name, .. } => match self.params.get(name) {
                Some((_, w)) => *w,
                None => self.vars[name].width,
            },
            Expr::Literal { lit, .. } => Self::lit_width(lit),
            Expr::Unary { op, arg, .. } => match op {
                UnaryOp::Plus | UnaryOp::Neg | UnaryOp::BitNot => self.self_width(arg),
                _ => 1,
            },
            Expr::Binary { op, lhs, rhs, .. } => match op {
                Shl | Shr | AShl | AShr | Pow => self.self_width(lhs),
                Lt | Le | Gt | Ge | Eq | Ne | CaseEq | CaseNe | LogAnd | LogOr => 1,
                _ => self.self_width(lhs).max(self.self_width(rhs)),
            },
            Expr::Ternary { then_expr, else_expr, .. } => {
                self.self_width(then_expr).max(self.self_width(else_expr))
            }
            Expr::Concat { parts, .. } => parts.iter().map(|p| self.self_width(p)).sum(),
            Expr::Replicate { count, parts, .. } => {
                self.konst(count) as u32 * parts.iter().map(|p| self.self_width(p)).sum::<u32>()
            }
            Expr::Index { base, .. } => match &**base {
                Expr::Ident { name, .. } if self.vars.get(name).is_some_and(|v| v.array.is_some()) => {
                    self.vars[name].width
                }
                _ => 1,
            },
            Expr::Range { msb, lsb, .. } => (self.konst(msb) as i64 - self.konst(lsb) as i64).unsigned_abs() as u32 + 1,
            Expr::IndexedRange { width, .. } => self.konst(width) as u32,
            Expr::SysCall { name, args, .. } => match name.as_str() {
                "$unsigned" => self.self_width(&args[0]),
                _ => 32,
            },
            Expr::Hier { .. } => panic!("hierarchical reference in interpreter"),
        }
    }

    /// Reads bit offset range `[lo, lo+w)` of a packed value indexed by declared bit `idx`.
    fn bit_offset(v: &Var, idx: i64) -> Option<u32> {
        let off = if v.msb >= v.lsb { idx - v.lsb } else { v.lsb - idx };
        (off >= 0 && off < v.width as i64).then_some(off as u32)
    }

    /// Value of `e` evaluated in a context of width `w`; result masked to `w`.
    pub fn eval(&self, e: &Expr, w: u32) -> u64 {
        use BinaryOp::*;
        let w = w.max(self.self_width(e));
        let m = mask(w);
        let v = match e {
            Expr::Ident { name, .. } => match self.params.get(name) {
                Some((v, _)) => *v,
                None => self.values[name],
            },
            Expr::Literal { lit, .. } => match lit {
                Literal::Number { value, .. } => *value,
                Literal::Fill(true) => m,
                Literal::Fill(false) => 0,
                Literal::Str(s) => s.bytes().fold(0u64, |a, b| (a << 8) | b as u64),
            },
            Expr::Unary { op, arg, .. } => match op {
                UnaryOp::Plus => self.eval(arg, w),
                UnaryOp::Neg => self.eval(arg, w).wrapping_neg(),
                UnaryOp::BitNot => !self.eval(arg, w),
                UnaryOp::LogNot => (self.eval_self(arg) == 0) as u64,
                UnaryOp::RedAnd | UnaryOp::RedNand => {
                    let aw = self.self_width(arg);
                    let r = (self.eval(arg, aw) == mask(aw)) as u64;
                    if *op == UnaryOp::RedNand { r ^ 1 } else { r }
                }
                UnaryOp::RedOr | UnaryOp::RedNor => {
                    let r = (self.eval_self(arg) != 0) as u64;
                    if *op == UnaryOp::RedNor { r ^ 1 } else { r }
                }
                UnaryOp::RedXor | UnaryOp::RedXnor => {
                    let r = (self.eval_self(arg).count_ones() & 1) as u64;
                    if *op == UnaryOp::RedXnor { r ^ 1 } else { r }
                }
            },
            Expr::Binary { op, lhs, rhs, .. } => {
                let cmp_w = || self.self_width(lhs).max(self.self_width(rhs));
                match op {
                    Add => self.eval(lhs, w).wrapping_add(self.eval(rhs, w)),
                    Sub => self.eval(lhs, w).wrapping_sub(self.eval(rhs, w)),
                    Mul => self.eval(lhs, w).wrapping_mul(self.eval(rhs, w)),
                    Div => {
                        let (a, b) = (self.eval(lhs, w), self.eval(rhs, w));
                        if b == 0 { m } else { a / b }
                    }
                    Mod => {
                        let (a, b) = (self.eval(lhs, w), self.eval(rhs, w));
                        if b == 0 { a } else { a % b }
                    }
                    BitAnd => self.eval(lhs, w) & self.eval(rhs, w),
                    BitOr => self.eval(lhs, w) | self.eval(rhs, w),
                    BitXor => self.eval(lhs, w) ^ self.eval(rhs, w),
                    BitXnor => !(self.eval(lhs, w) ^ self.eval(rhs, w)),
                    Shl | AShl => {
                        let s = self.eval_self(rhs);
                        if s >= 64 { 0 } else { self.eval(lhs, w) << s }
                    }
                    Shr | AShr => {
                        let s = self.eval_self(rhs);
                        if s >= 64 { 0 } else { self.eval(lhs, w) >> s }
                    }
                    Pow => {
                        let (a, b) = (self.eval(lhs, w), self.eval_self(rhs));
                        a.wrapping_pow(b as u32)
                    }
                    Lt | Le | Gt | Ge | Eq | Ne | CaseEq | CaseNe => {
                        let cw = cmp_w();
                        let (a, b) = (self.eval(lhs, cw), self.eval(rhs, cw));
                        (match op {
                            Lt => a < b,
                            Le => a <= b,
                            Gt => a > b,
                            Ge => a >= b,
                            Eq | CaseEq => a == b,
                            _ => a != b,
                        }) as u64
                    }
                    LogAnd => (self.eval_self(lhs) != 0 && self.eval_self(rhs) != 0) as u64,
                    LogOr => (self.eval_self(lhs) != 0 || self.eval_self(rhs) != 0) as u64,
                }
            }
            Expr::Ternary { cond, then_expr, else_expr, .. } => {
                if self.eval_self(cond) != 0 {
                    self.eval(then_expr, w)
                } else {
                    self.eval(else_expr, w)
                }
            }
            Expr::Concat { parts, .. } => {
                let mut acc = 0u64;
                for p in parts {
                    let pw = self.self_width(p);
                    acc = (acc << pw) | self.eval(p, pw);
                }
                acc
            }
            Expr::Replicate { count, parts, .. } => {
                let n = self.konst(count);
                let one = self.eval(&Expr::Concat { parts: parts.clone(), loc: Default::default() }, 0);
                let pw: u32 = parts.iter().map(|p| self.self_width(p)).sum();
                (0..n).fold(0u64, |acc, _| (acc << pw) | one)
            }
            Expr::Index { base, index, .. } => {
                let Expr::Ident { name, .. } = &**base else { panic!("nested select") };
                let i = self.eval_self(index) as i64;
                let v = &self.vars[name];
                match v.array {
                    Some((lo, hi)) => {
                        if i < lo || i > hi {
                            0
                        } else {
                            self.values[&format!("{name}[{i}]")]
                        }
                    }
                    None => match Self::bit_offset(v, i) {
                        Some(off) => (self.values[name] >> off) & 1,
                        None => 0,
                    },
                }
            }
            Expr::Range { base, msb, lsb, .. } => {
                let Expr::Ident { name, .. } = &**base else { panic!("nested select") };
                let v = &self.vars[name];
                let (a, b) = (self.konst(msb) as i64, self.konst(lsb) as i64);
                let lo = Self::bit_offset(v, if v.msb >= v.lsb { b } else { a }).unwrap();
                let width = (a - b).unsigned_abs() as u32 + 1;
                (self.values[name] >> lo) & mask(width)
            }
            Expr::IndexedRange { base, start, width, up, .. } => {
                let Expr::Ident { name, .. } = &**base else { panic!("nested select") };
                let v = &self.vars[name];
                let wd = self.konst(width) as i64;
                let s = self.eval_self(start) as i64;
                let low = if *up { s } else { s - wd + 1 };
                let mut acc = 0u64;
                for k in (0..wd).rev() {
                    let bit = Self::bit_offset(v, low + k).map_or(0, |o| (self.values[name] >> o) & 1);
                    acc = (acc << 1) | bit;
                }
                acc
            }
            Expr::SysCall { name, args, .. } => match name.as_str() {
                "$unsigned" => self.eval_self(&args[0]),
                "$clog2" => {
                    let x = self.eval_self(&args[0]);
                    if x <= 1 { 0 } else { 64 - (x - 1).leading_zeros() as u64 }
                }
                "$bits" => self.self_width(&args[0]) as u64,
                other => panic!("unsupported call {other}"),
            },
            Expr::Hier { .. } => unreachable!(),
        };
        v & m
    }

    fn eval_self(&self, e: &Expr) -> u64 {
        self.eval(e, self.self_width(e))
    }

    fn lvalue_width(&self, lhs: &Expr) -> u32 {
        match lhs {
            Expr::Concat { parts, .. } => parts.iter().map(|p| self.lvalue_width(p)).sum(),
            _ => self.self_width(lhs),
        }
    }

    /// Writes `value` into `lhs`, reading the old value from `cur`.
    fn assign(&self, lhs: &Expr, value: u64, cur: &BTreeMap<String, u64>, out: &mut BTreeMap<String, u64>) {
        match lhs {
            Expr::Ident { name, .. } => {
                out.insert(name.clone(), value & mask(self.vars[name].width));
            }
            Expr::Concat { parts, .. } => {
                let mut off = self.lvalue_width(lhs);
                for p in parts {
                    let w = self.lvalue_width(p);
                    off -= w;
                    self.assign(p, (value >> off) & mask(w), cur, out);
                }
            }
            Expr::Index { base, index, .. } => {
                let Expr::Ident { name, .. } = &**base else { panic!("nested lvalue") };
                let v = &self.vars[name];
                let i = self.eval_self(index) as i64;
                match v.array {
                    Some((lo, hi)) => {
                        if i >= lo && i <= hi {
                            out.insert(format!("{name}[{i}]"), value & mask(v.width));
                        }
                    }
                    None => {
                        if let Some(off) = Self::bit_offset(v, i) {
                            let old = *out.get(name).unwrap_or(&cur[name]);
                            out.insert(name.clone(), (old & !(1 << off)) | ((value & 1) << off));
                        }
                    }
                }
            }
            Expr::Range { base, msb, lsb, .. } => {
                let Expr::Ident { name, .. } = &**base else { panic!("nested lvalue") };
                let v = &self.vars[name];
                let (a, b) = (self.konst(msb) as i64, self.konst(lsb) as i64);
                let lo = Self::bit_offset(v, if v.msb >= v.lsb { b } else { a }).unwrap();
                let w = (a - b).unsigned_abs() as u32 + 1;
                let old = *out.get(name).unwrap_or(&cur[name]);
                let mk = mask(w) << lo;
                out.insert(name.clone(), (old & !mk) | ((value << lo) & mk));
            }
            other => panic!("unsupported lvalue {other:?}"),
        }
    }

    fn case_matches(&self, kind: CaseKind, subject: &Expr, label: &Expr) -> bool {
        let w = self.self_width(subject).max(self.self_width(label));
        let s = self.eval(subject, w);
        let l = self.eval(label, w);
        let dc = match (kind, label) {
            (CaseKind::Casez | CaseKind::Casex, Expr::Literal { lit: Literal::Number { xz_mask, .. }, .. }) => *xz_mask,
            _ => 0,
        };
        (s & !dc) == (l & !dc)
    }

    /// Runs a statement. Blocking writes go to `self.values`; nonblocking ones to `nba`.
    fn exec(&mut self, s: &Stmt, nba: &mut BTreeMap<String, u64>) {
        match s {
            Stmt::Block { stmts, .. } => stmts.iter().for_each(|s| self.exec(s, nba)),
            Stmt::If { cond, then_branch, else_branch, .. } => {
                if self.eval_self(cond) != 0 {
                    self.exec(then_branch, nba);
                } else if let Some(e) = else_branch {
                    self.exec(e, nba);
                }
            }
            Stmt::Case { kind, subject, items, default, .. } => {
                for it in items {
                    if it.labels.iter().any(|l| self.case_matches(*kind, subject, l)) {
                        self.exec(&it.body, nba);
                        return;
                    }
                }
                if let Some(d) = default {
                    self.exec(d, nba);
                }
            }
            Stmt::Blocking { lhs, rhs, .. } => {
                let w = self.lvalue_width(lhs);
                let v = self.eval(rhs, w);
                let cur = self.values.clone();
                let mut out = BTreeMap::new();
                self.assign(lhs, v, &cur, &mut out);
                self.values.extend(out);
            }
            Stmt::NonBlocking { lhs, rhs, .. } => {
                let w = self.lvalue_width(lhs);
                let v = self.eval(rhs, w);
                let cur = self.values.clone();
                let mut merged = cur.clone();
                merged.extend(nba.iter().map(|(k, v)| (k.clone(), *v)));
                let mut out = BTreeMap::new();
                self.assign(lhs, v, &merged, &mut out);
                nba.extend(out);
            }
            Stmt::For { var, init, cond, step, body, .. } => {
                let w = 32;
                self.params.insert(var.clone(), (self.eval(init, w), w));
                let mut guard = 0;
                while self.eval_self(cond) != 0 {
                    self.exec(body, nba);
                    let nv = self.eval(step, w);
                    self.params.insert(var.clone(), (nv, w));
                    guard += 1;
                    assert!(guard < 10_000);
                }
                self.params.remove(var);
            }
            Stmt::Null { .. } => {}
        }
    }

    /// Settles continuous assignments and combinational processes.
    pub fn settle(&mut self) {
        for _ in 0..64 {
            let before = self.values.clone();
            for item in &self.module.items {
                match item {
                    Item::Assign { lhs, rhs, .. } => {
                        let w = self.lvalue_width(lhs);
                        let v = self.eval(rhs, w);
                        let cur = self.values.clone();
                        let mut out = BTreeMap::new();
                        self.assign(lhs, v, &cur, &mut out);
                        self.values.extend(out);
                    }
                    Item::Net(n) => {
                        for v in &n.vars {
                            if let (Some(init), NetKind::Wire) = (&v.init, n.kind) {
                                let w = self.vars[&v.name].width;
                                let val = self.eval(init, w);
                                self.values.insert(v.name.clone(), val);
                            }
                        }
                    }
                    Item::Always { sensitivity: Sensitivity::None | Sensitivity::Star | Sensitivity::Signals(_), body, .. } => {
                        let mut nba = BTreeMap::new();
                        self.exec(body, &mut nba);
                        self.values.extend(nba);
                    }
                    _ => {}
                }
            }
            if self.values == before {
                return;
            }
        }
        panic!("combinational logic did not settle");
    }

    /// One clock edge: settle, sample outputs, run clocked processes, commit.
    pub fn step(&mut self, inputs: &BTreeMap<String, u64>) -> BTreeMap<String, u64> {
        for (k, v) in inputs {
            self.values.insert(k.clone(), *v);
        }
        self.settle();
        let outputs: BTreeMap<String, u64> = self
            .module
            .ports
            .iter()
            .filter(|p| p.direction == Direction::Output)
            .map(|p| (p.name.clone(), self.values[&p.name]))
            .collect();
        let mut nba = BTreeMap::new();
        for item in &self.module.items {
            if let Item::Always { sensitivity: Sensitivity::Edges(_), body, .. } = item {
                self.exec(body, &mut nba);
            }
        }
        self.values.extend(nba);
        outputs
    }

    pub fn clock(&self) -> Option<&str> {
        self.clock.as_deref()
    }
}
