// SPDX-License-Identifier: Apache-2.0

//! Concrete single-cycle simulation of a transition system.

use serde::{Deserialize, Serialize};

use crate::diag::{Diagnostic, Loc};
use crate::ts::{mask, Evaluator, ExprRef, TransitionSystem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    /// Next-state valuation, indexed like `ts.states`.
    pub next: Vec<u64>,
    /// Output valuation before the state update, indexed like `ts.outputs`.
    pub outputs: Vec<u64>,
}

fn check(kind: &str, names: &[(&str, u32)], vals: &[u64]) -> Result<(), Diagnostic> {
    if names.len() != vals.len() {
        return Err(Diagnostic::error(
            Loc::default(),
            format!("expected {} {kind} values, got {}", names.len(), vals.len()),
        ));
    }
    for ((name, w), v) in names.iter().zip(vals) {
        if v & !mask(*w) != 0 {
            return Err(Diagnostic::error(
                Loc::default(),
                format!("value {v:#x} does not fit {kind} `{name}` of width {w}"),
            ));
        }
    }
    Ok(())
}

/// Precomputed simulator for repeated stepping.
#[derive(Debug, Clone)]
pub struct Simulator {
    eval: Evaluator,
    next: Vec<ExprRef>,
    outputs: Vec<ExprRef>,
}

impl Simulator {
    pub fn new(ts: &TransitionSystem) -> Self {
        let next: Vec<ExprRef> = ts.states.iter().map(|s| s.next).collect();
        let outputs: Vec<ExprRef> = ts.outputs.iter().map(|d| d.expr).collect();
        let roots: Vec<ExprRef> = next.iter().chain(&outputs).copied().collect();
        Simulator { eval: Evaluator::new(&ts.arena, &roots), next, outputs }
    }

    /// Steps without width checks; values are masked.
    pub fn step(&mut self, ts: &TransitionSystem, state: &[u64], inputs: &[u64]) -> StepResult {
        self.eval.run(&ts.arena, inputs, state);
        StepResult {
            next: self.next.iter().map(|&e| self.eval.get(e)).collect(),
            outputs: self.outputs.iter().map(|&e| self.eval.get(e)).collect(),
        }
    }

    /// Value of an arbitrary expression under the last valuation, if it was in the cone.
    pub fn evaluator(&self) -> &Evaluator {
        &self.eval
    }
}

/// One clock cycle: outputs from the current state and inputs, plus the next state.
pub fn simulate_step(ts: &TransitionSystem, state: &[u64], inputs: &[u64]) -> Result<StepResult, Diagnostic> {
    let sn: Vec<(&str, u32)> = ts.states.iter().map(|s| (s.name.as_str(), s.width)).collect();
    let inn: Vec<(&str, u32)> = ts.inputs.iter().map(|i| (i.name.as_str(), i.width)).collect();
    check("state", &sn, state)?;
    check("input", &inn, inputs)?;
    Ok(Simulator::new(ts).step(ts, state, inputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ts::elaborate_source;

    #[test]
    fn counter_wraps() {
        let ts = elaborate_source(
            "module c(input logic clk, input logic rst, output logic [1:0] q);\n\
             always_ff @(posedge clk) if (rst) q <= 0; else q <= q + 1;\nendmodule\n",
            None,
        )
        .unwrap();
        let r = simulate_step(&ts, &[3], &[0]).unwrap();
        assert_eq!(r.next, vec![0]);
        assert_eq!(r.outputs, vec![3]);
        let r = simulate_step(&ts, &[1], &[1]).unwrap();
        assert_eq!(r.next, vec![0]);
    }

    #[test]
    fn width_mismatch_rejected() {
        let ts = elaborate_source(
            "module c(input logic clk, input logic [1:0] a, output logic [1:0] q);\n\
             always_ff @(posedge clk) q <= a;\nendmodule\n",
            None,
        )
        .unwrap();
        assert!(simulate_step(&ts, &[0], &[4]).is_err());
        assert!(simulate_step(&ts, &[0, 0], &[1]).is_err());
        assert!(simulate_step(&ts, &[0], &[3]).is_ok());
    }
}
