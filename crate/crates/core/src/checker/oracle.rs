// SPDX-License-Identifier: Apache-2.0

//! Breadth-first explicit-state reachability for small systems.

use crate::property::SafetyObligation;
use crate::ts::{mask, Evaluator, ExprRef};

pub const DEFAULT_STATE_BIT_CAP: u32 = 22;
pub const DEFAULT_INPUT_BIT_CAP: u32 = 16;
/// Upper bound on state-input pairs evaluated per layer sweep.
const WORK_CAP: u64 = 1 << 34;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleResult {
    NoViolation,
    /// Minimal number of steps from an initial state to a violating cycle.
    Violation(usize),
    /// The system exceeds the caps; no answer is given.
    NotApplicable(String),
}

fn unpack(key: u64, widths: &[u32], out: &mut [u64]) {
    let mut off = 0;
    for (o, &w) in out.iter_mut().zip(widths) {
        *o = (key >> off) & mask(w);
        off += w;
    }
}

fn pack(vals: &[u64], widths: &[u32]) -> u64 {
    let mut key = 0;
    let mut off = 0;
    for (&v, &w) in vals.iter().zip(widths) {
        key |= (v & mask(w)) << off;
        off += w;
    }
    key
}

/// Exact minimal violation depth over all initial states and input sequences.
pub fn explicit_state_oracle(obl: &SafetyObligation, state_bit_cap: u32, input_bit_cap: u32) -> OracleResult {
    let ts = &obl.ts;
    let sbits = ts.state_bits();
    let ibits = ts.input_bits();
    if sbits > state_bit_cap {
        return OracleResult::NotApplicable(format!("{sbits} state bits exceed the cap of {state_bit_cap}"));
    }
    if ibits > input_bit_cap {
        return OracleResult::NotApplicable(format!("{ibits} input bits exceed the cap of {input_bit_cap}"));
    }
    if (1u64 << sbits).saturating_mul(1u64 << ibits) > WORK_CAP {
        return OracleResult::NotApplicable("state space too large".into());
    }
    let swidths: Vec<u32> = ts.states.iter().map(|s| s.width).collect();
    let iwidths: Vec<u32> = ts.inputs.iter().map(|i| i.width).collect();
    let mut roots: Vec<ExprRef> = ts.states.iter().map(|s| s.next).collect();
    roots.push(obl.bad);
    let mut ev = Evaluator::new(&ts.arena, &roots);
    let mut visited = vec![false; 1usize << sbits];
    // Initial states: constrained states fixed, free ones enumerated.
    let fixed: u64 = pack(&ts.states.iter().map(|s| s.init.unwrap_or(0)).collect::<Vec<_>>(), &swidths);
    let free_mask: u64 = {
        let m: Vec<u64> = ts.states.iter().map(|s| if s.init.is_some() { 0 } else { mask(s.width) }).collect();
        pack(&m, &swidths)
    };
    let mut frontier = Vec::new();
    // Enumerate submasks of free_mask.
    let mut sub = free_mask;
    loop {
        let key = fixed | sub;
        if !visited[key as usize] {
            visited[key as usize] = true;
            frontier.push(key);
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & free_mask;
    }
    let mut state = vec![0u64; swidths.len()];
    let mut input = vec![0u64; iwidths.len()];
    let mut next = vec![0u64; swidths.len()];
    let mut depth = 0;
    while !frontier.is_empty() {
        let mut new_frontier = Vec::new();
        for &key in &frontier {
            unpack(key, &swidths, &mut state);
            for ikey in 0..1u64 << ibits {
                unpack(ikey, &iwidths, &mut input);
                ev.run(&ts.arena, &input, &state);
                if ev.get(obl.bad) != 0 {
                    return OracleResult::Violation(depth);
                }
                for (n, s) in next.iter_mut().zip(&ts.states) {
                    *n = ev.get(s.next);
                }
                let nk = pack(&next, &swidths);
                if !visited[nk as usize] {
                    visited[nk as usize] = true;
                    new_frontier.push(nk);
                }
            }
        }
        frontier = new_frontier;
        depth += 1;
    }
    OracleResult::NoViolation
}
