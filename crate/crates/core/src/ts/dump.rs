// SPDX-License-Identifier: Apache-2.0

//! Line-oriented text dump of a transition system.
//!
//! ```text
//! input <name> <width>
//! state <name> <width> init=<value|free> reset=<value|none>
//! let %<n> <sexpr>
//! next <name> <sexpr>
//! define <name> <width> <sexpr>
//! output <name> <width> <sexpr>
//! ```
//!
//! Expressions are S-expressions: `(const <width> <hex>)`, `(input <name>)`,
//! `(state <name>)`, `(<op> <width> <args>...)`, `(slice <lo> <width> <arg>)`,
//! `(zext <width> <arg>)`, `(mux <width> <c> <t> <e>)`,
//! `(concat <width> <hi> <lo>)`. Non-leaf nodes used more than once are bound
//! by a preceding `let` line and referenced as `%<n>`.

use std::collections::HashMap;
use std::fmt::Write;

use crate::ts::{ExprRef, Node, TransitionSystem};

struct Printer<'a> {
    ts: &'a TransitionSystem,
    shared: HashMap<ExprRef, usize>,
}

impl Printer<'_> {
    fn leaf(&self, e: ExprRef, top: bool, out: &mut String) {
        if !top {
            if let Some(n) = self.shared.get(&e) {
                let _ = write!(out, "%{n}");
                return;
            }
        }
        match *self.ts.arena.node(e) {
            Node::Const { value, width } => {
                let _ = write!(out, "(const {width} {value:#x})");
            }
            Node::Input { index, .. } => {
                let _ = write!(out, "(input {})", self.ts.inputs[index as usize].name);
            }
            Node::State { index, .. } => {
                let _ = write!(out, "(state {})", self.ts.states[index as usize].name);
            }
            Node::Unary { op, arg, width } => {
                let _ = write!(out, "({} {width} ", op.name());
                self.leaf(arg, false, out);
                out.push(')');
            }
            Node::Binary { op, lhs, rhs, width } => {
                let _ = write!(out, "({} {width} ", op.name());
                self.leaf(lhs, false, out);
                out.push(' ');
                self.leaf(rhs, false, out);
                out.push(')');
            }
            Node::Mux { cond, then_, else_, width } => {
                let _ = write!(out, "(mux {width} ");
                self.leaf(cond, false, out);
                out.push(' ');
                self.leaf(then_, false, out);
                out.push(' ');
                self.leaf(else_, false, out);
                out.push(')');
            }
            Node::Concat { hi, lo, width } => {
                let _ = write!(out, "(concat {width} ");
                self.leaf(hi, false, out);
                out.push(' ');
                self.leaf(lo, false, out);
                out.push(')');
            }
            Node::Slice { arg, lo, width } => {
                let _ = write!(out, "(slice {lo} {width} ");
                self.leaf(arg, false, out);
                out.push(')');
            }
            Node::Zext { arg, width } => {
                let _ = write!(out, "(zext {width} ");
                self.leaf(arg, false, out);
                out.push(')');
            }
        }
    }
}

/// Renders `ts` in the documented text format.
pub fn dump(ts: &TransitionSystem) -> String {
    let roots: Vec<ExprRef> = ts
        .states
        .iter()
        .map(|s| s.next)
        .chain(ts.defines.iter().map(|d| d.expr))
        .chain(ts.outputs.iter().map(|d| d.expr))
        .collect();
    let cone = ts.arena.cone(&roots);
    let mut uses: HashMap<ExprRef, usize> = HashMap::new();
    for &e in &cone {
        for c in ts.arena.node(e).children() {
            *uses.entry(c).or_default() += 1;
        }
    }
    let mut shared = HashMap::new();
    let mut order = Vec::new();
    for &e in &cone {
        let leafy = matches!(ts.arena.node(e), Node::Const { .. } | Node::Input { .. } | Node::State { .. });
        if !leafy && uses.get(&e).copied().unwrap_or(0) > 1 {
            shared.insert(e, shared.len());
            order.push(e);
        }
    }
    let p = Printer { ts, shared };
    let mut out = String::new();
    let _ = writeln!(out, "top {}", ts.top);
    for i in &ts.inputs {
        let _ = writeln!(out, "input {} {}", i.name, i.width);
    }
    for s in &ts.states {
        let init = s.init.map_or("free".to_string(), |v| format!("{v:#x}"));
        let reset = s.reset_value.map_or("none".to_string(), |v| format!("{v:#x}"));
        let _ = writeln!(out, "state {} {} init={init} reset={reset}", s.name, s.width);
    }
    for e in order {
        let _ = write!(out, "let %{} ", p.shared[&e]);
        p.leaf(e, true, &mut out);
        out.push('\n');
    }
    for s in &ts.states {
        let _ = write!(out, "next {} ", s.name);
        p.leaf(s.next, false, &mut out);
        out.push('\n');
    }
    for (kw, list) in [("define", &ts.defines), ("output", &ts.outputs)] {
        for d in list {
            let _ = write!(out, "{kw} {} {} ", d.name, d.width);
            p.leaf(d.expr, false, &mut out);
            out.push('\n');
        }
    }
    out
}
