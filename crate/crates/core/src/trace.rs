// SPDX-License-Identifier: Apache-2.0

//! Cycle-indexed execution traces with JSON and VCD export.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::ts::sim::Simulator;
use crate::ts::TransitionSystem;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signal {
    pub name: String,
    pub width: u32,
}

/// Initial state plus per-cycle inputs, with derived states and outputs.
///
/// Cycle `t` pairs the state at `t` with the inputs applied at `t`; the state
/// at `t + 1` is the result of that step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub top: String,
    pub clock: Option<String>,
    pub inputs: Vec<Signal>,
    pub states: Vec<Signal>,
    pub outputs: Vec<Signal>,
    pub input_values: Vec<Vec<u64>>,
    pub state_values: Vec<Vec<u64>>,
    pub output_values: Vec<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct JsonCycle {
    cycle: usize,
    inputs: BTreeMap<String, u64>,
    states: BTreeMap<String, u64>,
    outputs: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct JsonTrace {
    top: String,
    clock: Option<String>,
    widths: BTreeMap<String, u32>,
    cycles: Vec<JsonCycle>,
}

impl Trace {
    /// Simulates `ts` from `init` under `inputs`, keeping only the first
    /// `ts.states.len()` entries of `init` that belong to the system.
    pub fn from_run(ts: &TransitionSystem, init: &[u64], inputs: Vec<Vec<u64>>) -> Trace {
        let mut sim = Simulator::new(ts);
        let mut state = init.to_vec();
        let mut state_values = Vec::with_capacity(inputs.len());
        let mut output_values = Vec::with_capacity(inputs.len());
        for inp in &inputs {
            let r = sim.step(ts, &state, inp);
            state_values.push(state);
            output_values.push(r.outputs);
            state = r.next;
        }
        let sig = |n: &str, w: u32| Signal { name: n.to_string(), width: w };
        Trace {
            top: ts.top.clone(),
            clock: ts.clock.clone(),
            inputs: ts.inputs.iter().map(|i| sig(&i.name, i.width)).collect(),
            states: ts.states.iter().map(|s| sig(&s.name, s.width)).collect(),
            outputs: ts.outputs.iter().map(|o| sig(&o.name, o.width)).collect(),
            input_values: inputs,
            state_values,
            output_values,
        }
    }

    /// Number of cycles.
    pub fn len(&self) -> usize {
        self.input_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_values.is_empty()
    }

    pub fn initial_state(&self) -> &[u64] {
        self.state_values.first().map_or(&[], |v| v.as_slice())
    }

    /// Value of a named input, state or output at `cycle`.
    pub fn value(&self, name: &str, cycle: usize) -> Option<u64> {
        let find = |sigs: &[Signal], vals: &[Vec<u64>]| {
            sigs.iter().position(|s| s.name == name).and_then(|i| vals.get(cycle).map(|v| v[i]))
        };
        find(&self.inputs, &self.input_values)
            .or_else(|| find(&self.states, &self.state_values))
            .or_else(|| find(&self.outputs, &self.output_values))
    }

    pub fn to_json(&self) -> String {
        let map = |sigs: &[Signal], vals: &[u64]| -> BTreeMap<String, u64> {
            sigs.iter().zip(vals).map(|(s, v)| (s.name.clone(), *v)).collect()
        };
        let widths = self
            .inputs
            .iter()
            .chain(&self.states)
            .chain(&self.outputs)
            .map(|s| (s.name.clone(), s.width))
            .collect();
        let doc = JsonTrace {
            top: self.top.clone(),
            clock: self.clock.clone(),
            widths,
            cycles: (0..self.len())
                .map(|t| JsonCycle {
                    cycle: t,
                    inputs: map(&self.inputs, &self.input_values[t]),
                    states: map(&self.states, &self.state_values[t]),
                    outputs: map(&self.outputs, &self.output_values[t]),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("trace serializes")
    }

    /// Reads inputs and the initial state of a JSON trace back against `ts`.
    /// Missing inputs default to zero; missing states take their init value or zero.
    pub fn from_json(ts: &TransitionSystem, text: &str) -> Result<Trace, serde_json::Error> {
        let doc: JsonTrace = serde_json::from_str(text)?;
        let init: Vec<u64> = match doc.cycles.first() {
            Some(c) => ts
                .states
                .iter()
                .map(|s| c.states.get(&s.name).copied().or(s.init).unwrap_or(0))
                .collect(),
            None => ts.states.iter().map(|s| s.init.unwrap_or(0)).collect(),
        };
        let inputs = doc
            .cycles
            .iter()
            .map(|c| ts.inputs.iter().map(|i| c.inputs.get(&i.name).copied().unwrap_or(0)).collect())
            .collect();
        Ok(Trace::from_run(ts, &init, inputs))
    }

    /// Value change dump with a 10-unit clock period; the rising edge is at `10t + 5`.
    pub fn to_vcd(&self) -> String {
        let mut out = String::new();
        out.push_str("$date\n  generated\n$end\n$version\n  hwcwe ");
        out.push_str(crate::TOOLKIT_VERSION);
        out.push_str("\n$end\n$timescale 1ns $end\n");
        let _ = writeln!(out, "$scope module {} $end", self.top);
        let mut ids: Vec<(String, u32)> = Vec::new();
        let mut id = |out: &mut String, name: &str, width: u32| {
            let code = vcd_id(ids.len());
            let _ = writeln!(out, "$var wire {width} {code} {} $end", vcd_name(name));
            ids.push((code, width));
        };
        if let Some(c) = &self.clock {
            id(&mut out, c, 1);
        }
        for s in self.inputs.iter().chain(&self.states).chain(&self.outputs) {
            id(&mut out, &s.name, s.width);
        }
        out.push_str("$upscope $end\n$enddefinitions $end\n");
        let has_clk = self.clock.is_some();
        let mut last: Vec<Option<u64>> = vec![None; ids.len()];
        for t in 0..self.len() {
            let _ = writeln!(out, "#{}", t * 10);
            let mut vals: Vec<u64> = Vec::with_capacity(ids.len());
            if has_clk {
                vals.push(0);
            }
            vals.extend(&self.input_values[t]);
            vals.extend(&self.state_values[t]);
            vals.extend(&self.output_values[t]);
            for (k, v) in vals.iter().enumerate() {
                if last[k] != Some(*v) {
                    write_value(&mut out, &ids[k].0, ids[k].1, *v);
                    last[k] = Some(*v);
                }
            }
            if has_clk {
                let _ = writeln!(out, "#{}", t * 10 + 5);
                write_value(&mut out, &ids[0].0, 1, 1);
                last[0] = Some(1);
            }
        }
        let _ = writeln!(out, "#{}", self.len() * 10);
        out
    }
}

fn write_value(out: &mut String, code: &str, width: u32, v: u64) {
    if width == 1 {
        let _ = writeln!(out, "{}{code}", v & 1);
    } else {
        let _ = writeln!(out, "b{:b} {code}", v);
    }
}

fn vcd_id(mut n: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (n % 94) as u8) as char);
        n /= 94;
        if n == 0 {
            return s;
        }
        n -= 1;
    }
}

fn vcd_name(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' }).collect()
}
