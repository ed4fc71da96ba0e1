// SPDX-License-Identifier: Apache-2.0

//! Random single-module designs for differential testing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct DesignGen {
    rng: ChaCha8Rng,
    leaves: Vec<(String, u32)>,
    regs: Vec<(String, u32)>,
    mem: Option<u32>,
    sized_only: bool,
    widths: Vec<u32>,
}

impl DesignGen {
    pub fn new(seed: u64) -> Self {
        DesignGen { rng: ChaCha8Rng::seed_from_u64(seed), leaves: Vec::new(), regs: Vec::new(), mem: None, sized_only: false, widths: vec![1, 2, 3, 4, 5, 8] }
    }

    /// Narrow signals only, small enough for exhaustive exploration.
    pub fn small(seed: u64) -> Self {
        DesignGen { widths: vec![1, 2], ..Self::new(seed) }
    }

    fn width(&mut self) -> u32 {
        self.widths[self.rng.random_range(0..self.widths.len())]
    }

    fn literal(&mut self, w: u32) -> String {
        let v = self.rng.random_range(0..(1u64 << w.min(16)));
        let pick = if self.sized_only { self.rng.random_range(0..3) } else { self.rng.random_range(0..6) };
        match pick {
            0 => format!("{w}'d{v}"),
            1 => format!("{w}'h{v:x}"),
            2 => format!("{w}'b{v:b}"),
            3 => format!("{v}"),
            4 => format!("'h{v:x}"),
            _ => if self.rng.random_bool(0.5) { "'0".into() } else { "'1".into() },
        }
    }

    fn leaf(&mut self) -> String {
        if self.rng.random_range(0..5) == 0 {
            let w = self.width();
            return self.literal(w);
        }
        if let Some(_) = self.mem {
            if self.rng.random_range(0..6) == 0 {
                let i = self.index_expr();
                return format!("mem[{i}]");
            }
        }
        let i = self.rng.random_range(0..self.leaves.len());
        let (n, w) = self.leaves[i].clone();
        match self.rng.random_range(0..8) {
            0 if w > 1 => format!("{n}[{}]", self.rng.random_range(0..w)),
            1 if w > 2 => {
                let lo = self.rng.random_range(0..w - 1);
                let hi = self.rng.random_range(lo..w);
                format!("{n}[{hi}:{lo}]")
            }
            2 if w > 2 => {
                let (sel, _) = self.leaves[self.rng.random_range(0..self.leaves.len())].clone();
                format!("{n}[{sel}]")
            }
            3 if w > 3 => format!("{n}[{} +: 2]", self.rng.random_range(0..w - 1)),
            _ => n,
        }
    }

    fn index_expr(&mut self) -> String {
        let (n, w) = self.leaves[self.rng.random_range(0..self.leaves.len())].clone();
        if w >= 2 {
            format!("{n}[1:0]")
        } else if self.rng.random_bool(0.5) {
            n
        } else {
            format!("{}", self.rng.random_range(0..4))
        }
    }

    pub fn expr(&mut self, depth: u32) -> String {
        if depth == 0 || self.rng.random_range(0..4) == 0 {
            return self.leaf();
        }
        let d = depth - 1;
        let k = self.rng.random_range(0..14);
        match k {
            0 => {
                let op = ["~", "!", "&", "|", "^", "-", "~^"][self.rng.random_range(0..7)];
                format!("{op}({})", self.expr(d))
            }
            1..=6 => {
                let ops = [
                    "+", "-", "&", "|", "^", "==", "!=", "<", "<=", ">", ">=", "&&", "||", "*", "<<", ">>",
                    "/", "%", "~^",
                ];
                let op = ops[self.rng.random_range(0..ops.len())];
                format!("({} {op} {})", self.expr(d), self.expr(d))
            }
            7 | 8 => format!("({} ? {} : {})", self.expr(d), self.expr(d), self.expr(d)),
            9 | 10 => {
                self.sized_only = true;
                let s = if k == 9 {
                    format!("{{{}, {}}}", self.leaf(), self.leaf())
                } else {
                    format!("{{{}{{{}}}}}", self.rng.random_range(1..3), self.leaf())
                };
                self.sized_only = false;
                s
            }
            11 => format!("$unsigned({})", self.expr(d)),
            _ => self.leaf(),
        }
    }

    fn target(&mut self) -> (String, bool) {
        if self.mem.is_some() && self.rng.random_range(0..5) == 0 {
            let i = self.index_expr();
            return (format!("mem[{i}]"), true);
        }
        let (n, w) = self.regs[self.rng.random_range(0..self.regs.len())].clone();
        match self.rng.random_range(0..6) {
            0 if w > 1 => (format!("{n}[{}]", self.rng.random_range(0..w)), false),
            1 if w > 2 => {
                let lo = self.rng.random_range(0..w - 1);
                let hi = self.rng.random_range(lo..w);
                (format!("{n}[{hi}:{lo}]"), false)
            }
            2 if self.regs.len() > 1 => {
                let (m, _) = self.regs[self.rng.random_range(0..self.regs.len())].clone();
                if m == n {
                    (n, false)
                } else {
                    (format!("{{{n}, {m}}}"), false)
                }
            }
            _ => (n, false),
        }
    }

    fn stmt(&mut self, depth: u32, out: &mut String, indent: usize) {
        let pad = " ".repeat(indent);
        let k = if depth == 0 { 0 } else { self.rng.random_range(0..6) };
        match k {
            0..=2 => {
                let (t, _) = self.target();
                let e = self.expr(2);
                out.push_str(&format!("{pad}{t} <= {e};\n"));
            }
            3 | 4 => {
                let c = self.expr(2);
                out.push_str(&format!("{pad}if ({c}) begin\n"));
                self.stmts(depth - 1, out, indent + 2);
                if self.rng.random_bool(0.6) {
                    out.push_str(&format!("{pad}end else begin\n"));
                    self.stmts(depth - 1, out, indent + 2);
                }
                out.push_str(&format!("{pad}end\n"));
            }
            _ => {
                let (n, w) = self.leaves[self.rng.random_range(0..self.leaves.len())].clone();
                let z = self.rng.random_bool(0.3) && w >= 2;
                out.push_str(&format!("{pad}{} ({n})\n", if z { "casez" } else { "case" }));
                for _ in 0..self.rng.random_range(1..4) {
                    let label = if z {
                        let bits: String = (0..w)
                            .map(|_| ['0', '1', '?'][self.rng.random_range(0..3)])
                            .collect();
                        format!("{w}'b{bits}")
                    } else {
                        format!("{w}'d{}", self.rng.random_range(0..(1u64 << w)))
                    };
                    out.push_str(&format!("{pad}  {label}: begin\n"));
                    self.stmts(depth - 1, out, indent + 4);
                    out.push_str(&format!("{pad}  end\n"));
                }
                if self.rng.random_bool(0.5) {
                    out.push_str(&format!("{pad}  default: begin\n"));
                    self.stmts(depth - 1, out, indent + 4);
                    out.push_str(&format!("{pad}  end\n"));
                }
                out.push_str(&format!("{pad}endcase\n"));
            }
        }
    }

    fn stmts(&mut self, depth: u32, out: &mut String, indent: usize) {
        for _ in 0..self.rng.random_range(1..3) {
            self.stmt(depth, out, indent);
        }
    }

    /// A random clocked design with ports `clk`, `rst`, `a`, `b`, outputs `y`, `z`.
    pub fn design(&mut self) -> String {
        let (wa, wb, wy, wz) = (self.width(), self.width(), self.width(), self.width());
        let mut s = format!(
            "module rnd(\n  input logic clk,\n  input logic rst,\n  input logic [{}:0] a,\n  input logic [{}:0] b,\n  output logic [{}:0] y,\n  output logic [{}:0] z\n);\n",
            wa - 1,
            wb - 1,
            wy - 1,
            wz - 1
        );
        self.leaves = vec![("a".into(), wa), ("b".into(), wb)];
        self.regs.clear();
        for i in 0..self.rng.random_range(1..4) {
            let w = self.width();
            s.push_str(&format!("  logic [{}:0] r{i};\n", w - 1));
            self.regs.push((format!("r{i}"), w));
        }
        self.leaves.extend(self.regs.clone());
        self.mem = None;
        if self.rng.random_bool(0.4) {
            let w = self.width();
            s.push_str(&format!("  logic [{}:0] mem [0:3];\n", w - 1));
            self.mem = Some(w);
        }
        let wt = self.width();
        s.push_str(&format!("  logic [{}:0] t;\n", wt - 1));
        if self.rng.random_bool(0.5) {
            let e = self.expr(3);
            s.push_str(&format!("  assign t = {e};\n"));
        } else {
            let e0 = self.expr(2);
            let c = self.expr(2);
            let e1 = self.expr(2);
            s.push_str(&format!(
                "  always_comb begin\n    t = {e0};\n    if ({c}) t = {e1};\n  end\n"
            ));
        }
        self.leaves.push(("t".into(), wt));
        s.push_str("  always_ff @(posedge clk) begin\n    if (rst) begin\n");
        for (n, w) in self.regs.clone() {
            let v = self.literal(w);
            s.push_str(&format!("      {n} <= {v};\n"));
        }
        s.push_str("    end else begin\n");
        let mut body = String::new();
        self.stmts(3, &mut body, 6);
        if self.mem.is_some() && self.rng.random_bool(0.3) {
            body.push_str("      for (int i = 0; i < 4; i++) mem[i] <= mem[i] + 1;\n");
        }
        s.push_str(&body);
        s.push_str("    end\n  end\n");
        let ey = self.expr(3);
        let ez = self.expr(3);
        s.push_str(&format!("  assign y = {ey};\n  assign z = {ez};\nendmodule\n"));
        s
    }
}
