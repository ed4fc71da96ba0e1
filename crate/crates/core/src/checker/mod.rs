// SPDX-License-Identifier: Apache-2.0

//! Model checking of safety obligations: bounded model checking for
//! counterexamples and k-induction for unbounded proofs.

pub mod aig;
pub mod cnf;
pub mod oracle;
pub mod sat;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostic;
use crate::property::{evaluate_on_trace, SafetyObligation};
use crate::trace::Trace;
use crate::ts::{Evaluator, ExprRef, Node};

use aig::{Aig, Bits, Blaster, Lit};
use cnf::{CnfFormula, Tseitin};
use sat::{SatResult, Solver};

pub use oracle::{explicit_state_oracle, OracleResult, DEFAULT_INPUT_BIT_CAP, DEFAULT_STATE_BIT_CAP};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub max_depth: u32,
    pub max_k: u32,
    pub simple_path: bool,
    /// Conflicts allowed per SAT call.
    pub conflict_budget: Option<u64>,
    /// Wall-clock budget for one obligation.
    pub time_budget: Duration,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            max_depth: 64,
            max_k: 32,
            simple_path: true,
            conflict_budget: None,
            time_budget: Duration::from_secs(60),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Proven { k: u32 },
    Falsified { trace: Trace, depth: u32 },
    Unknown { max_k: u32, reason: String },
    CompileError { diagnostics: Vec<Diagnostic> },
}

impl Verdict {
    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::Proven { .. } => "proven",
            Verdict::Falsified { .. } => "falsified",
            Verdict::Unknown { .. } => "unknown",
            Verdict::CompileError { .. } => "compile_error",
        }
    }
}

/// Outcome of a bounded search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BmcResult {
    Falsified { trace: Trace, depth: u32 },
    NoCexUpTo(u32),
    /// Deepest fully checked depth, if any, and why the search stopped.
    Unknown { checked: Option<u32>, reason: String },
}

struct Frame {
    inputs: Vec<Bits>,
    states: Vec<Bits>,
    bad: Lit,
    next: Vec<Bits>,
}

/// Time-frame expansion of an obligation onto one AIG.
struct Unroller<'a> {
    obl: &'a SafetyObligation,
    g: Aig,
    frames: Vec<Frame>,
    free_init: bool,
}

impl<'a> Unroller<'a> {
    fn new(obl: &'a SafetyObligation, free_init: bool) -> Self {
        Unroller { obl, g: Aig::new(), frames: Vec::new(), free_init }
    }

    fn push_frame(&mut self) -> Lit {
        let ts = &self.obl.ts;
        let states: Vec<Bits> = match self.frames.last() {
            Some(f) => f.next.clone(),
            None => ts
                .states
                .iter()
                .map(|s| match s.init {
                    Some(v) if !self.free_init => aig::const_bits(v, s.width),
                    _ => self.g.inputs(s.width),
                })
                .collect(),
        };
        let inputs: Vec<Bits> = ts.inputs.iter().map(|i| self.g.inputs(i.width)).collect();
        let mut b = Blaster::new(&ts.arena, &inputs, &states);
        let bad = b.bit(&mut self.g, self.obl.bad);
        let next = ts.states.iter().map(|s| b.bits(&mut self.g, s.next)).collect();
        drop(b);
        self.frames.push(Frame { inputs, states, bad, next });
        bad
    }

    fn word(bits: &[Lit], s: &Solver) -> u64 {
        bits.iter().enumerate().fold(0, |acc, (i, &l)| acc | (s.lit_model_value(l) as u64) << i)
    }

    /// Reads the counterexample for frames `0..=depth` out of a model.
    fn trace(&self, s: &Solver, depth: u32) -> Trace {
        let init: Vec<u64> = self.frames[0].states.iter().map(|b| Self::word(b, s)).collect();
        let inputs: Vec<Vec<u64>> = self.frames[..=depth as usize]
            .iter()
            .map(|f| f.inputs.iter().map(|b| Self::word(b, s)).collect())
            .collect();
        design_trace(self.obl, &init, inputs)
    }

    /// Literal that is true when frames `i` and `j` differ in some state bit.
    fn differ(&mut self, i: usize, j: usize) -> Lit {
        let pairs: Vec<(Lit, Lit)> = self.frames[i]
            .states
            .iter()
            .flatten()
            .zip(self.frames[j].states.iter().flatten())
            .map(|(&a, &b)| (a, b))
            .collect();
        let diffs: Vec<Lit> = pairs.into_iter().map(|(a, b)| self.g.xor(a, b)).collect();
        self.g.or_all(diffs)
    }
}

/// Simulates the augmented system and keeps only the design's states.
pub fn design_trace(obl: &SafetyObligation, init: &[u64], inputs: Vec<Vec<u64>>) -> Trace {
    let full = obl.initial_state(init);
    let mut t = Trace::from_run(&obl.ts, &full, inputs);
    let n = obl.design_states;
    t.states.truncate(n);
    for v in &mut t.state_values {
        v.truncate(n);
    }
    t
}

struct Budget {
    start: Instant,
    limit: Duration,
}

impl Budget {
    fn exhausted(&self) -> bool {
        self.start.elapsed() > self.limit
    }
}

/// Incremental BMC state shared by [`bmc`] and [`k_induction`].
struct Base<'a> {
    u: Unroller<'a>,
    s: Solver,
    enc: Tseitin,
}

impl<'a> Base<'a> {
    fn new(obl: &'a SafetyObligation, opts: &CheckOptions) -> Self {
        let mut s = Solver::new(opts.seed);
        s.conflict_budget = opts.conflict_budget;
        Base { u: Unroller::new(obl, false), s, enc: Tseitin::default() }
    }

    /// Checks depth `d == frames.len()`; on `Unsat` the frame is asserted good.
    fn check_next(&mut self) -> Result<Option<Trace>, String> {
        let d = self.u.frames.len() as u32;
        let bad = self.u.push_frame();
        self.enc.encode_into(&self.u.g, &[bad], &mut self.s);
        match self.s.solve(&[bad]) {
            SatResult::Sat => {
                let t = self.u.trace(&self.s, d);
                match evaluate_on_trace(self.u.obl, &t) {
                    Some(c) if c == d as usize => Ok(Some(t)),
                    other => Err(format!("counterexample at depth {d} failed replay ({other:?})")),
                }
            }
            SatResult::Unsat => {
                self.s.add_clause(&[!bad]);
                Ok(None)
            }
            SatResult::Unknown => Err(format!("solver budget exhausted at depth {d}")),
        }
    }
}

/// Searches for a counterexample of minimal depth up to `max_depth`.
pub fn bmc(obl: &SafetyObligation, max_depth: u32, opts: &CheckOptions) -> BmcResult {
    let budget = Budget { start: Instant::now(), limit: opts.time_budget };
    let mut base = Base::new(obl, opts);
    let mut checked = None;
    for d in 0..=max_depth {
        if budget.exhausted() {
            return BmcResult::Unknown { checked, reason: "time budget exhausted".into() };
        }
        match base.check_next() {
            Ok(Some(trace)) => return BmcResult::Falsified { trace, depth: d },
            Ok(None) => checked = Some(d),
            Err(reason) => return BmcResult::Unknown { checked, reason },
        }
    }
    BmcResult::NoCexUpTo(max_depth)
}

/// k-induction interleaved with BMC. The base case runs at each depth before
/// the inductive step, so falsified traces have minimal depth.
pub fn k_induction(obl: &SafetyObligation, opts: &CheckOptions) -> Verdict {
    let budget = Budget { start: Instant::now(), limit: opts.time_budget };
    let mut base = Base::new(obl, opts);
    let mut step = Unroller::new(obl, true);
    let mut ss = Solver::new(opts.seed);
    ss.conflict_budget = opts.conflict_budget;
    let mut senc = Tseitin::default();
    let mut completed: Option<u32> = None;
    let unknown = |completed: Option<u32>, reason: String| Verdict::Unknown { max_k: completed.unwrap_or(0), reason };
    for k in 0..=opts.max_k.max(opts.max_depth) {
        if budget.exhausted() {
            return unknown(completed, "time budget exhausted".into());
        }
        match base.check_next() {
            Ok(Some(trace)) => return Verdict::Falsified { trace, depth: k },
            Ok(None) => {}
            Err(reason) => return unknown(completed, reason),
        }
        if k > opts.max_k {
            // Past the induction bound only the base case keeps running.
            continue;
        }
        // Step: frames 0..k-1 good, frame k bad, from an arbitrary state.
        if k > 0 {
            let prev = step.frames[k as usize - 1].bad;
            ss.add_clause(&[!prev]);
        }
        let bad = step.push_frame();
        let mut roots = vec![bad];
        let mut distinct = Vec::new();
        if opts.simple_path {
            for i in 0..k as usize {
                let d = step.differ(i, k as usize);
                roots.push(d);
                distinct.push(d);
            }
        }
        senc.encode_into(&step.g, &roots, &mut ss);
        for d in distinct {
            ss.add_clause(&[d]);
        }
        match ss.solve(&[bad]) {
            SatResult::Unsat => return Verdict::Proven { k: k.max(1) },
            SatResult::Sat => completed = Some(k),
            SatResult::Unknown => return unknown(completed, format!("solver budget exhausted in step {k}")),
        }
    }
    if opts.max_depth > opts.max_k {
        return unknown(completed, format!("no proof up to k={}; no counterexample up to depth {}", opts.max_k, opts.max_depth));
    }
    unknown(completed, format!("no proof up to k={}", opts.max_k))
}

/// Checks an obligation with the default strategy.
pub fn check(obl: &SafetyObligation, opts: &CheckOptions) -> Verdict {
    k_induction(obl, opts)
}

/// The BMC formula for a violation at exactly `depth`, with earlier frames good.
pub fn bmc_formula(obl: &SafetyObligation, depth: u32) -> CnfFormula {
    let mut u = Unroller::new(obl, false);
    let bads: Vec<Lit> = (0..=depth).map(|_| u.push_frame()).collect();
    let mut roots: Vec<Lit> = bads[..depth as usize].iter().map(|&b| !b).collect();
    roots.push(bads[depth as usize]);
    cnf::to_cnf(&u.g, &roots)
}

/// An assignment that produced the offending value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootCause {
    pub state: String,
    pub line: u32,
    pub text: String,
    pub cycle: usize,
}

/// Explains a violation at `cycle` by locating the assignments that set the
/// design state read by the failing consequent.
pub fn explain(obl: &SafetyObligation, trace: &Trace, cycle: usize) -> Vec<RootCause> {
    let ts = &obl.ts;
    if cycle == 0 || cycle >= trace.len() {
        return Vec::new();
    }
    let mut roots: Vec<ExprRef> = Vec::new();
    for name in obl.property.consequent_names() {
        if let Some((e, _)) = ts.signal(&name) {
            roots.push(e);
        }
    }
    let mut targets: Vec<usize> = ts
        .arena
        .cone(&roots)
        .into_iter()
        .filter_map(|e| match *ts.arena.node(e) {
            Node::State { index, .. } if (index as usize) < obl.design_states => Some(index as usize),
            _ => None,
        })
        .collect();
    targets.sort_unstable();
    targets.dedup();
    let full = Trace::from_run(&obl.ts, &obl.initial_state(trace.initial_state()), trace.input_values.clone());
    let prev_states = &full.state_values[cycle - 1];
    let prev_inputs = &full.input_values[cycle - 1];
    let drv_roots: Vec<ExprRef> = ts.drivers.iter().flat_map(|d| [d.guard, d.value]).collect();
    let mut ev = Evaluator::new(&ts.arena, &drv_roots);
    ev.run(&ts.arena, prev_inputs, prev_states);
    let mut out = Vec::new();
    for &s in &targets {
        let now = full.state_values[cycle][s];
        let last = ts
            .drivers
            .iter()
            .filter(|d| d.state == s && ev.get(d.guard) != 0)
            .filter(|d| ev.get(d.value) == now)
            .next_back();
        if let Some(d) = last {
            out.push(RootCause { state: ts.states[s].name.clone(), line: d.line, text: d.text.clone(), cycle: cycle - 1 });
        }
    }
    out.sort_by_key(|r| r.line);
    out
}
