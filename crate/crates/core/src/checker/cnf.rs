// SPDX-License-Identifier: Apache-2.0

//! Tseitin encoding of AIG cones and DIMACS import/export.

use std::fmt::Write;

use super::aig::{Aig, AigNode, Lit};
use super::sat::{SatResult, Solver};

/// Clauses over DIMACS-style signed variables (1-based).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<i32>>,
    /// Literals assumed true for the query, exported as unit clauses.
    pub assumptions: Vec<i32>,
}

/// DIMACS literal for an AIG literal. AIG variable `v` becomes DIMACS `v + 1`.
pub fn dimacs_lit(l: Lit) -> i32 {
    let v = l.var() as i32 + 1;
    if l.is_negated() {
        -v
    } else {
        v
    }
}

pub fn from_dimacs_lit(d: i32) -> Lit {
    Lit::new(d.unsigned_abs() - 1, d < 0)
}

/// Incremental Tseitin emitter feeding a solver; each AND node is encoded once.
#[derive(Debug, Clone, Default)]
pub struct Tseitin {
    emitted: Vec<bool>,
}

impl Tseitin {
    /// Adds the defining clauses for every AND in the cone of `roots`.
    pub fn encode(&mut self, g: &Aig, roots: &[Lit], sink: &mut dyn FnMut(&[Lit])) {
        if self.emitted.is_empty() {
            self.emitted.push(true);
            sink(&[!Lit::new(0, false)]);
        }
        self.emitted.resize(g.num_vars() as usize, false);
        let mut stack: Vec<u32> = roots.iter().map(|l| l.var()).collect();
        while let Some(v) = stack.pop() {
            if self.emitted[v as usize] {
                continue;
            }
            self.emitted[v as usize] = true;
            if let AigNode::And(a, b) = g.node(v) {
                let x = Lit::new(v, false);
                sink(&[!x, a]);
                sink(&[!x, b]);
                sink(&[x, !a, !b]);
                stack.push(a.var());
                stack.push(b.var());
            }
        }
    }

    pub fn encode_into(&mut self, g: &Aig, roots: &[Lit], solver: &mut Solver) {
        solver.reserve_vars(g.num_vars());
        self.encode(g, roots, &mut |c| {
            solver.add_clause(c);
        });
    }
}

/// Formula asserting every root of `g` true.
pub fn to_cnf(g: &Aig, roots: &[Lit]) -> CnfFormula {
    let mut clauses = Vec::new();
    Tseitin::default().encode(g, roots, &mut |c| clauses.push(c.iter().map(|&l| dimacs_lit(l)).collect()));
    for &r in roots {
        clauses.push(vec![dimacs_lit(r)]);
    }
    CnfFormula { num_vars: g.num_vars(), clauses, assumptions: Vec::new() }
}

impl CnfFormula {
    /// DIMACS text; assumptions appear as trailing unit clauses.
    pub fn to_dimacs(&self) -> String {
        let mut s = String::new();
        let n = self.clauses.len() + self.assumptions.len();
        let _ = writeln!(s, "p cnf {} {}", self.num_vars, n);
        for c in &self.clauses {
            for l in c {
                let _ = write!(s, "{l} ");
            }
            s.push_str("0\n");
        }
        for a in &self.assumptions {
            let _ = writeln!(s, "{a} 0");
        }
        s
    }

    pub fn from_dimacs(text: &str) -> Result<CnfFormula, String> {
        let mut f = CnfFormula::default();
        let mut declared = None;
        let mut cur = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('p') {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                match parts.as_slice() {
                    ["cnf", v, c] => {
                        f.num_vars = v.parse().map_err(|_| format!("line {}: bad header", no + 1))?;
                        declared = Some(c.parse::<usize>().map_err(|_| format!("line {}: bad header", no + 1))?);
                    }
                    _ => return Err(format!("line {}: bad header", no + 1)),
                }
                continue;
            }
            for tok in line.split_whitespace() {
                let l: i32 = tok.parse().map_err(|_| format!("line {}: bad literal `{tok}`", no + 1))?;
                if l == 0 {
                    f.clauses.push(std::mem::take(&mut cur));
                } else {
                    if l.unsigned_abs() > f.num_vars {
                        f.num_vars = l.unsigned_abs();
                    }
                    cur.push(l);
                }
            }
        }
        if !cur.is_empty() {
            f.clauses.push(cur);
        }
        if declared.is_none() {
            return Err("missing `p cnf` header".into());
        }
        Ok(f)
    }

    /// Solves with the embedded solver; returns the model over DIMACS variables
    /// (`model[v - 1]`) when satisfiable.
    pub fn solve(&self, conflict_budget: Option<u64>) -> (SatResult, Option<Vec<bool>>) {
        let mut s = Solver::new(0);
        s.reserve_vars(self.num_vars);
        s.conflict_budget = conflict_budget;
        for c in &self.clauses {
            let lits: Vec<Lit> = c.iter().map(|&d| from_dimacs_lit(d)).collect();
            if !s.add_clause(&lits) {
                return (SatResult::Unsat, None);
            }
        }
        let assumptions: Vec<Lit> = self.assumptions.iter().map(|&d| from_dimacs_lit(d)).collect();
        let r = s.solve(&assumptions);
        let model = (r == SatResult::Sat).then(|| (0..self.num_vars).map(|v| s.model_value(v)).collect());
        (r, model)
    }

    pub fn satisfied_by(&self, model: &[bool]) -> bool {
        let val = |d: i32| model[d.unsigned_abs() as usize - 1] ^ (d < 0);
        self.clauses.iter().all(|c| c.iter().any(|&d| val(d))) && self.assumptions.iter().all(|&d| val(d))
    }
}
