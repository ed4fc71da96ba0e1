// SPDX-License-Identifier: Apache-2.0

//! SVA-subset assertions compiled to bounded-history safety obligations.
//!
//! Accepted syntax (the `assert property` wrapper and clocking are optional):
//!
//! ```text
//! [label:] assert property (@(posedge clk) disable iff (expr) antecedent |-> consequent);
//! ```
//!
//! `|=>` is the non-overlapped form. Boolean operands may use `$past(e, n)`
//! with `1 <= n <= 8`, `$rose`, `$fell`, `$stable`, `$changed`, `$onehot`
//! and `$onehot0`. Hierarchical names such as `u_fifo.count` or
//! `periph_fifo.count` (module name of a unique instance) address internal
//! signals.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::diag::{Diagnostic, Loc};
use crate::sv::ast::{Edge, Expr};
use crate::sv::parser::Parser;
use crate::sv::printer;
use crate::sv::token::{tokenize, Token, TokenKind};
use crate::trace::Trace;
use crate::ts::lower::{self, LowerCtx, Shape};
use crate::ts::{Evaluator, ExprArena, ExprRef, TransitionSystem};

/// Deepest supported `$past` lookback.
pub const MAX_PAST_DEPTH: u32 = 8;

type PResult<T> = Result<T, Diagnostic>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Implication {
    /// `|->`
    Overlapped,
    /// `|=>`
    NonOverlapped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyAst {
    pub label: Option<String>,
    pub clock: Option<(Edge, String)>,
    pub disable: Option<Expr>,
    pub antecedent: Option<(Expr, Implication)>,
    pub consequent: Expr,
    /// Number of past cycles the property looks at.
    pub depth: u32,
}

impl PropertyAst {
    /// Renders back to assertion syntax.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(l) = &self.label {
            s.push_str(l);
            s.push_str(": ");
        }
        s.push_str("assert property (");
        if let Some((e, c)) = &self.clock {
            let kw = if *e == Edge::Posedge { "posedge" } else { "negedge" };
            s.push_str(&format!("@({kw} {c}) "));
        }
        if let Some(d) = &self.disable {
            s.push_str(&format!("disable iff ({}) ", printer::expr(d)));
        }
        if let Some((a, imp)) = &self.antecedent {
            let op = if *imp == Implication::Overlapped { "|->" } else { "|=>" };
            s.push_str(&format!("({}) {op} ", printer::expr(a)));
        }
        s.push_str(&format!("({}));", printer::expr(&self.consequent)));
        s
    }

    /// Design signals the consequent talks about.
    pub fn consequent_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.consequent.walk(&mut |e| {
            if let Expr::Ident { name, .. } = e {
                if !names.contains(name) {
                    names.push(name.clone());
                }
            }
        });
        names
    }
}

fn is_punct(t: Option<&Token>, p: &str) -> bool {
    t.is_some_and(|t| t.kind == TokenKind::Punctuation && t.text == p)
}

/// Index of the token closing the bracket opened at `open`.
fn matching(toks: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in toks.iter().enumerate().skip(open) {
        if t.kind == TokenKind::Punctuation {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                _ => {}
            }
        }
    }
    None
}

/// Parses an expression that may be wrapped in redundant parentheses around a
/// property operator.
fn strip_parens(toks: &[Token]) -> &[Token] {
    let mut t = toks;
    while t.len() >= 2 && is_punct(t.first(), "(") && matching(t, 0) == Some(t.len() - 1) {
        t = &t[1..t.len() - 1];
    }
    t
}

fn property_op(t: &Token) -> Option<Implication> {
    match (t.kind, t.text.as_str()) {
        (TokenKind::Operator, "|->") => Some(Implication::Overlapped),
        (TokenKind::Operator, "|=>") => Some(Implication::NonOverlapped),
        _ => None,
    }
}

fn parse_bool(toks: &[Token], what: &str) -> PResult<Expr> {
    let toks = strip_parens(toks);
    if toks.is_empty() {
        return Err(Diagnostic::error(Loc::default(), format!("missing {what}")));
    }
    let mut p = Parser::new(toks);
    let e = p.expr()?;
    if p.pos < toks.len() {
        let t = &toks[p.pos];
        if t.text.starts_with("##") {
            return Err(Diagnostic::unsupported(t.loc(), format!("sequence operator `{}` is not supported", t.text)));
        }
        return Err(Diagnostic::error(t.loc(), format!("unexpected `{}` in {what}", t.text)));
    }
    Ok(e)
}

/// Splits the body of an assertion into its parts.
fn parse_body(toks: &[Token]) -> PResult<PropertyAst> {
    let mut toks = strip_parens(toks);
    let mut clock = None;
    if toks.first().is_some_and(|t| t.text == "@") {
        let close = matching(toks, 1).filter(|_| is_punct(toks.get(1), "("));
        let Some(close) = close else {
            return Err(Diagnostic::error(toks[0].loc(), "malformed clocking event"));
        };
        let ev = &toks[2..close];
        let edge = match ev.first().map(|t| t.text.as_str()) {
            Some("posedge") => Edge::Posedge,
            Some("negedge") => Edge::Negedge,
            _ => return Err(Diagnostic::unsupported(toks[0].loc(), "only edge clocking events are supported")),
        };
        match ev {
            [_, name] if name.kind == TokenKind::Identifier => clock = Some((edge, name.text.clone())),
            _ => return Err(Diagnostic::error(toks[0].loc(), "malformed clocking event")),
        }
        toks = &toks[close + 1..];
    }
    let mut disable = None;
    if toks.first().is_some_and(|t| t.text == "disable") {
        if !toks.get(1).is_some_and(|t| t.text == "iff") || !is_punct(toks.get(2), "(") {
            return Err(Diagnostic::error(toks[0].loc(), "expected `disable iff (...)`"));
        }
        let Some(close) = matching(toks, 2) else {
            return Err(Diagnostic::error(toks[2].loc(), "unbalanced parentheses"));
        };
        disable = Some(parse_bool(&toks[3..close], "disable condition")?);
        toks = &toks[close + 1..];
    }
    let toks = strip_parens(toks);
    // The implication is the lowest-precedence operator: split at the first
    // one outside any brackets.
    let mut depth = 0i32;
    let mut split = None;
    for (i, t) in toks.iter().enumerate() {
        if t.kind == TokenKind::Punctuation {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                _ => {}
            }
        } else if depth == 0 {
            if let Some(imp) = property_op(t) {
                if split.is_some() {
                    return Err(Diagnostic::unsupported(t.loc(), "chained implications are not supported"));
                }
                split = Some((i, imp));
            }
        }
    }
    let (antecedent, consequent) = match split {
        Some((i, imp)) => {
            (Some((parse_bool(&toks[..i], "antecedent")?, imp)), parse_bool(&toks[i + 1..], "consequent")?)
        }
        None => (None, parse_bool(toks, "property")?),
    };
    Ok(PropertyAst { label: None, clock, disable, antecedent, consequent, depth: 0 })
}

/// Name resolution context over a transition system.
struct Names<'a> {
    ts: &'a TransitionSystem,
}

impl Names<'_> {
    fn exists(&self, name: &str) -> bool {
        self.ts.signal(name).is_some() || self.ts.arrays.contains_key(name)
    }

    /// Maps a dotted path to a flattened signal name.
    fn hier(&self, path: &[String], loc: Loc) -> PResult<String> {
        let mut p: &[String] = path;
        if p.len() > 1 && p[0] == self.ts.top {
            p = &p[1..];
        }
        let direct = p.join(".");
        if self.exists(&direct) {
            return Ok(direct);
        }
        // Leading module name: resolve through the unique instance of that module.
        for split in (1..p.len()).rev() {
            let head = p[..split].join(".");
            let inst: Vec<&String> =
                self.ts.instances.iter().filter(|(_, m)| *m == head).map(|(i, _)| i).collect();
            if inst.len() == 1 {
                let name = format!("{}.{}", inst[0], p[split..].join("."));
                if self.exists(&name) {
                    return Ok(name);
                }
            } else if inst.len() > 1 {
                return Err(Diagnostic::error(loc, format!("module `{head}` is instantiated more than once")));
            }
        }
        Err(Diagnostic::error(loc, format!("unknown signal `{}`", path.join("."))))
    }

    /// Rewrites hierarchical references to flattened identifiers and checks names.
    fn resolve(&self, e: &mut Expr) -> PResult<()> {
        match e {
            Expr::Hier { path, loc } => {
                let name = self.hier(path, *loc)?;
                *e = Expr::Ident { name, loc: *loc };
                Ok(())
            }
            Expr::Ident { name, loc } => {
                if self.exists(name) {
                    Ok(())
                } else {
                    Err(Diagnostic::error(*loc, format!("unknown signal `{name}`")))
                }
            }
            Expr::Literal { .. } => Ok(()),
            Expr::Unary { arg, .. } => self.resolve(arg),
            Expr::Binary { lhs, rhs, .. } => {
                self.resolve(lhs)?;
                self.resolve(rhs)
            }
            Expr::Ternary { cond, then_expr, else_expr, .. } => {
                self.resolve(cond)?;
                self.resolve(then_expr)?;
                self.resolve(else_expr)
            }
            Expr::Concat { parts, .. } => parts.iter_mut().try_for_each(|p| self.resolve(p)),
            Expr::Replicate { count, parts, .. } => {
                self.resolve(count)?;
                parts.iter_mut().try_for_each(|p| self.resolve(p))
            }
            Expr::Index { base, index, .. } => {
                self.resolve(base)?;
                self.resolve(index)
            }
            Expr::Range { base, msb, lsb, .. } => {
                self.resolve(base)?;
                self.resolve(msb)?;
                self.resolve(lsb)
            }
            Expr::IndexedRange { base, start, width, .. } => {
                self.resolve(base)?;
                self.resolve(start)?;
                self.resolve(width)
            }
            Expr::SysCall { name, args, loc } => {
                let arity = match name.as_str() {
                    "$past" => 1..=2,
                    "$rose" | "$fell" | "$stable" | "$changed" | "$onehot" | "$onehot0" | "$unsigned"
                    | "$clog2" | "$bits" | "$countones" => 1..=1,
                    _ => {
                        return Err(Diagnostic::unsupported(*loc, format!("system function `{name}` is not supported")))
                    }
                };
                if !arity.contains(&args.len()) {
                    return Err(Diagnostic::error(*loc, format!("wrong number of arguments to `{name}`")));
                }
                if name == "$past" {
                    if let Some(n) = args.get(1) {
                        let v = literal_value(n)
                            .ok_or_else(|| Diagnostic::error(n.loc(), "$past depth must be a constant"))?;
                        if v == 0 || v > MAX_PAST_DEPTH as u64 {
                            return Err(Diagnostic::error(
                                n.loc(),
                                format!("$past depth {v} is outside 1..={MAX_PAST_DEPTH}"),
                            ));
                        }
                    }
                }
                args.iter_mut().take(1).try_for_each(|a| self.resolve(a))
            }
        }
    }
}

fn literal_value(e: &Expr) -> Option<u64> {
    match e {
        Expr::Literal { lit: crate::sv::ast::Literal::Number { value, xz_mask: 0, .. }, .. } => Some(*value),
        _ => None,
    }
}

/// Lookback of an expression in cycles.
fn lookback(e: &Expr) -> u32 {
    match e {
        Expr::SysCall { name, args, .. } => {
            let inner = args.first().map_or(0, lookback);
            match name.as_str() {
                "$past" => inner + args.get(1).and_then(literal_value).unwrap_or(1) as u32,
                "$rose" | "$fell" | "$stable" | "$changed" => inner + 1,
                _ => inner,
            }
        }
        _ => {
            let mut d = 0;
            let mut first = true;
            e.walk(&mut |x| {
                if first {
                    first = false;
                    return;
                }
                if let Expr::SysCall { .. } = x {
                    d = d.max(lookback(x));
                }
            });
            d
        }
    }
}

/// Parses an assertion and resolves its names against `ts`.
pub fn parse_property(text: &str, ts: &TransitionSystem) -> Result<PropertyAst, Diagnostic> {
    let (toks, diags) = tokenize(text);
    if let Some(d) = diags.into_iter().next() {
        return Err(d);
    }
    let mut body: &[Token] = &toks;
    let mut label = None;
    if body.len() > 2 && body[0].kind == TokenKind::Identifier && is_punct(body.get(1), ":") {
        label = Some(body[0].text.clone());
        body = &body[2..];
    }
    if body.last().is_some_and(|t| t.text == ";") {
        body = &body[..body.len() - 1];
    }
    if body.first().is_some_and(|t| t.text == "assert") {
        if !body.get(1).is_some_and(|t| t.text == "property") || !is_punct(body.get(2), "(") {
            return Err(Diagnostic::error(body[0].loc(), "expected `assert property (`"));
        }
        if matching(body, 2) != Some(body.len() - 1) {
            return Err(Diagnostic::error(body[2].loc(), "unbalanced parentheses in assertion"));
        }
        body = &body[3..body.len() - 1];
    } else if body.first().is_some_and(|t| t.kind == TokenKind::Keyword && t.text != "disable") {
        return Err(Diagnostic::unsupported(
            body[0].loc(),
            format!("`{}` directives are not supported", body[0].text),
        ));
    }
    let mut p = parse_body(body)?;
    p.label = label;
    if let Some((edge, clk)) = &p.clock {
        if *edge != Edge::Posedge {
            return Err(Diagnostic::unsupported(Loc::default(), "properties must be clocked on a rising edge"));
        }
        if ts.clock.as_deref().is_some_and(|c| c != clk) {
            return Err(Diagnostic::error(Loc::default(), format!("`{clk}` is not the design clock")));
        }
    }
    let names = Names { ts };
    if let Some(d) = &mut p.disable {
        names.resolve(d)?;
        if lookback(d) > 0 {
            return Err(Diagnostic::unsupported(d.loc(), "sampled-value functions in disable conditions"));
        }
    }
    if let Some((a, _)) = &mut p.antecedent {
        names.resolve(a)?;
    }
    names.resolve(&mut p.consequent)?;
    let dc = lookback(&p.consequent);
    p.depth = match &p.antecedent {
        None => dc,
        Some((a, Implication::Overlapped)) => dc.max(lookback(a)),
        Some((a, Implication::NonOverlapped)) => dc.max(lookback(a) + 1),
    };
    // Type-check by lowering against a scratch copy.
    let mut scratch = ts.clone();
    compile_into(&p, &mut scratch)?;
    Ok(p)
}

/// One assertion per stanza; stanzas are separated by blank lines and `#`
/// starts a comment line.
pub fn split_stanzas(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with('#') {
            continue;
        }
        if t.is_empty() {
            if !cur.trim().is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            cur.clear();
            continue;
        }
        cur.push_str(line);
        cur.push('\n');
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out
}

/// A property compiled to `bad` over an augmented transition system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyObligation {
    pub ts: TransitionSystem,
    /// True exactly when the assertion fails at the current cycle.
    pub bad: ExprRef,
    /// Number of leading states that belong to the design.
    pub design_states: usize,
    /// History registers, one per distinct sampled term and depth.
    pub history: Vec<usize>,
    /// Window registers tracking cycles since start and disable activity.
    pub window: Vec<usize>,
    pub depth: u32,
    pub property: PropertyAst,
}

struct PropCtx<'a> {
    ts: &'a mut TransitionSystem,
    hist: &'a mut HashMap<(ExprRef, u32), usize>,
    history: &'a mut Vec<usize>,
}

impl PropCtx<'_> {
    /// Register holding `e` from `k` cycles ago.
    fn past(&mut self, e: ExprRef, k: u32) -> ExprRef {
        if k == 0 {
            return e;
        }
        if let Some(&s) = self.hist.get(&(e, k)) {
            return self.ts.states[s].expr;
        }
        let src = self.past(e, k - 1);
        let w = self.ts.arena.width(e);
        let s = self.ts.add_state(format!("$past{}@{k}", self.history.len()), w, Some(0));
        self.ts.states[s].next = src;
        self.hist.insert((e, k), s);
        self.history.push(s);
        self.ts.states[s].expr
    }
}

impl LowerCtx for PropCtx<'_> {
    fn arena(&mut self) -> &mut ExprArena {
        &mut self.ts.arena
    }

    fn shape(&mut self, name: &str, loc: Loc) -> PResult<Shape> {
        let range = self.ts.ranges.get(name).copied();
        if let Some(a) = self.ts.arrays.get(name) {
            let (msb, lsb) = range.unwrap_or((a.elem_width as i64 - 1, 0));
            return Ok(Shape::Array { elem_width: a.elem_width, msb, lsb, lo: a.lo, hi: a.hi });
        }
        match self.ts.signal(name) {
            Some((_, w)) => {
                let (msb, lsb) = range.filter(|(m, l)| m.abs_diff(*l) + 1 == w as u64).unwrap_or((w as i64 - 1, 0));
                Ok(Shape::Vector { width: w, msb, lsb })
            }
            None => Err(Diagnostic::error(loc, format!("unknown signal `{name}`"))),
        }
    }

    fn read(&mut self, key: &str, loc: Loc) -> PResult<ExprRef> {
        self.ts.signal(key).map(|(e, _)| e).ok_or_else(|| Diagnostic::error(loc, format!("unknown signal `{key}`")))
    }

    fn syscall_width(&mut self, name: &str, args: &[Expr], loc: Loc) -> PResult<Option<u32>> {
        Ok(match name {
            "$past" => Some(lower::self_width(self, &args[0])?),
            "$rose" | "$fell" | "$stable" | "$changed" | "$onehot" | "$onehot0" => Some(1),
            "$countones" => Some(32),
            _ => {
                let _ = loc;
                None
            }
        })
    }

    fn syscall(&mut self, name: &str, args: &[Expr], loc: Loc) -> PResult<Option<ExprRef>> {
        let arg = lower::lower_self(self, &args[0])?;
        let a = &mut self.ts.arena;
        let w = a.width(arg);
        Ok(Some(match name {
            "$past" => {
                let n = args.get(1).and_then(literal_value).unwrap_or(1) as u32;
                self.past(arg, n)
            }
            "$rose" | "$fell" => {
                let bit = a.slice(arg, 0, 1);
                let prev = self.past(bit, 1);
                let a = &mut self.ts.arena;
                if name == "$rose" {
                    let np = a.not(prev);
                    a.and(bit, np)
                } else {
                    let nb = a.not(bit);
                    a.and(nb, prev)
                }
            }
            "$stable" | "$changed" => {
                let prev = self.past(arg, 1);
                let a = &mut self.ts.arena;
                let same = a.eq(arg, prev);
                if name == "$stable" {
                    same
                } else {
                    a.not(same)
                }
            }
            "$onehot" | "$onehot0" => {
                let one = a.konst(1, w);
                let dec = a.sub(arg, one);
                let both = a.and(arg, dec);
                let z = a.zero(w);
                let at_most_one = a.eq(both, z);
                if name == "$onehot0" {
                    at_most_one
                } else {
                    let nz = a.red_or(arg);
                    a.and(at_most_one, nz)
                }
            }
            "$countones" => {
                let mut acc = a.zero(32);
                for i in 0..w {
                    let b = a.slice(arg, i, 1);
                    let b = a.zext(b, 32);
                    acc = a.add(acc, b);
                }
                acc
            }
            _ => return Err(Diagnostic::unsupported(loc, format!("system function `{name}` is not supported"))),
        }))
    }
}

/// Builds history and window registers and returns `(bad, history, window)`.
fn compile_into(p: &PropertyAst, ts: &mut TransitionSystem) -> PResult<(ExprRef, Vec<usize>, Vec<usize>)> {
    let mut hist = HashMap::new();
    let mut history = Vec::new();
    let mut cx = PropCtx { ts, hist: &mut hist, history: &mut history };
    let good_now = match &p.disable {
        Some(d) => {
            let b = lower::lower_bool(&mut cx, d)?;
            cx.ts.arena.not(b)
        }
        None => cx.ts.arena.tru(),
    };
    let ante = match &p.antecedent {
        None => cx.ts.arena.tru(),
        Some((a, imp)) => {
            let b = lower::lower_bool(&mut cx, a)?;
            match imp {
                Implication::Overlapped => b,
                Implication::NonOverlapped => cx.past(b, 1),
            }
        }
    };
    let cons = lower::lower_bool(&mut cx, &p.consequent)?;
    let ts = cx.ts;
    let mut window = Vec::new();
    let mut enabled = good_now;
    let mut prev = good_now;
    for k in 1..=p.depth {
        let s = ts.add_state(format!("$window@{k}"), 1, Some(0));
        ts.states[s].next = prev;
        prev = ts.states[s].expr;
        enabled = ts.arena.and(enabled, prev);
        window.push(s);
    }
    let a = &mut ts.arena;
    let ncons = a.not(cons);
    let viol = a.and(ante, ncons);
    let bad = a.and(enabled, viol);
    Ok((bad, history, window))
}

/// Augments `ts` with history registers and a `bad` signal for `p`.
pub fn compile_obligation(p: &PropertyAst, ts: &TransitionSystem) -> Result<SafetyObligation, Diagnostic> {
    let mut aug = ts.clone();
    let (bad, history, window) = compile_into(p, &mut aug)?;
    Ok(SafetyObligation {
        ts: aug,
        bad,
        design_states: ts.states.len(),
        history,
        window,
        depth: p.depth,
        property: p.clone(),
    })
}

impl SafetyObligation {
    /// Full initial state: design values from `design_init`, augmentation at its init.
    pub fn initial_state(&self, design_init: &[u64]) -> Vec<u64> {
        let mut s: Vec<u64> = design_init.iter().copied().take(self.design_states).collect();
        s.resize(self.design_states, 0);
        s.extend(self.ts.states[self.design_states..].iter().map(|st| st.init.unwrap_or(0)));
        s
    }
}

/// First cycle at which the obligation is violated along `trace`.
pub fn evaluate_on_trace(obl: &SafetyObligation, trace: &Trace) -> Option<usize> {
    if trace.is_empty() {
        return None;
    }
    let ts = &obl.ts;
    let mut roots: Vec<ExprRef> = ts.states.iter().map(|s| s.next).collect();
    roots.push(obl.bad);
    let mut ev = Evaluator::new(&ts.arena, &roots);
    let mut state = obl.initial_state(trace.initial_state());
    for (t, inp) in trace.input_values.iter().enumerate() {
        ev.run(&ts.arena, inp, &state);
        if ev.get(obl.bad) != 0 {
            return Some(t);
        }
        state = ts.states.iter().map(|s| ev.get(s.next)).collect();
    }
    None
}
