// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{fixture, gen::DesignGen};
use hwcwe_core::checker::aig::{lit_value, Aig, Blaster, Lit};
use hwcwe_core::checker::cnf::{to_cnf, CnfFormula};
use hwcwe_core::checker::sat::{SatResult, Solver};
use hwcwe_core::checker::{
    bmc, bmc_formula, check, explain, explicit_state_oracle, BmcResult, CheckOptions, OracleResult, Verdict,
    DEFAULT_INPUT_BIT_CAP, DEFAULT_STATE_BIT_CAP,
};
use hwcwe_core::property::{compile_obligation, evaluate_on_trace, parse_property, SafetyObligation};
use hwcwe_core::ts::mask;
use hwcwe_core::{elaborate_source, simulate_step, TransitionSystem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RESERVED_READ: &str =
    "assert property (@(posedge clk_in) disable iff (!rst_n_in) (!rw_in && addr_in == 'h1) |=> (data_out == '0));";

fn obligation(src: &str, prop: &str) -> SafetyObligation {
    let ts = elaborate_source(src, None).unwrap();
    compile_obligation(&parse_property(prop, &ts).unwrap(), &ts).unwrap()
}

fn random_3cnf(rng: &mut ChaCha8Rng, vars: u32, clauses: usize) -> Vec<[i32; 3]> {
    (0..clauses)
        .map(|_| {
            let mut c = [0; 3];
            for l in &mut c {
                let v = rng.random_range(1..=vars) as i32;
                *l = if rng.random_bool(0.5) { v } else { -v };
            }
            c
        })
        .collect()
}

fn brute_force(vars: u32, clauses: &[[i32; 3]]) -> bool {
    // Clause as (positive mask, negative mask) over bit v-1.
    let masks: Vec<(u32, u32)> = clauses
        .iter()
        .map(|c| {
            c.iter().fold((0, 0), |(p, n), &l| {
                let b = 1u32 << (l.unsigned_abs() - 1);
                if l > 0 {
                    (p | b, n)
                } else {
                    (p, n | b)
                }
            })
        })
        .collect();
    (0..1u32 << vars).any(|a| masks.iter().all(|&(p, n)| a & p != 0 || !a & n != 0))
}

#[test]
fn sat_agrees_with_enumeration_on_random_3cnf() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut sat, mut unsat) = (0, 0);
    for trial in 0..200 {
        let clauses = random_3cnf(&mut rng, 20, 80 + trial % 30);
        let f = CnfFormula { num_vars: 20, clauses: clauses.iter().map(|c| c.to_vec()).collect(), assumptions: vec![] };
        let (r, model) = f.solve(None);
        let expect = brute_force(20, &clauses);
        assert_eq!(r == SatResult::Sat, expect, "trial {trial}");
        if let Some(m) = model {
            assert!(f.satisfied_by(&m));
            sat += 1;
        } else {
            unsat += 1;
        }
    }
    assert!(sat > 20 && unsat > 20, "{sat} sat / {unsat} unsat");
}

#[test]
fn dimacs_cross_check_with_varisat() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let clauses = random_3cnf(&mut rng, 30, 128);
        let f = CnfFormula { num_vars: 30, clauses: clauses.iter().map(|c| c.to_vec()).collect(), assumptions: vec![] };
        let text = f.to_dimacs();
        let parsed = varisat::dimacs::DimacsParser::parse(text.as_bytes()).unwrap();
        let mut other = varisat::Solver::new();
        other.add_formula(&parsed);
        let theirs = other.solve().unwrap();
        let back = CnfFormula::from_dimacs(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(f.solve(None).0 == SatResult::Sat, theirs);
    }
    // A BMC query exported and re-solved externally.
    let o = obligation(&fixture("register_interface_leak.sv"), RESERVED_READ);
    for (d, expect) in [(1, false), (2, true)] {
        let text = bmc_formula(&o, d).to_dimacs();
        let parsed = varisat::dimacs::DimacsParser::parse(text.as_bytes()).unwrap();
        let mut other = varisat::Solver::new();
        other.add_formula(&parsed);
        assert_eq!(other.solve().unwrap(), expect, "depth {d}");
    }
}

/// Random AIG over four inputs with `n` AND nodes; returns the last node.
fn random_circuit(rng: &mut ChaCha8Rng, n: usize) -> (Aig, Lit) {
    let mut g = Aig::new();
    let mut pool: Vec<Lit> = g.inputs(4);
    for _ in 0..n {
        let pick = |rng: &mut ChaCha8Rng| {
            let l = pool[rng.random_range(0..pool.len())];
            if rng.random_bool(0.5) { !l } else { l }
        };
        let (a, b) = (pick(rng), pick(rng));
        let x = match rng.random_range(0..3) {
            0 => g.and(a, b),
            1 => g.or(a, b),
            _ => g.xor(a, b),
        };
        pool.push(x);
    }
    let root = *pool.last().unwrap();
    (g, root)
}

#[test]
fn tseitin_agrees_with_truth_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let (g, root) = random_circuit(&mut rng, 10);
        let expect = (0..16u32).any(|a| {
            let v = g.simulate(&|var| a >> (var - 1) & 1 == 1);
            lit_value(&v, root)
        });
        let f = to_cnf(&g, &[root]);
        let (r, model) = f.solve(None);
        assert_eq!(r == SatResult::Sat, expect);
        if let Some(m) = model {
            // The model's inputs must drive the circuit to true.
            let v = g.simulate(&|var| m[var as usize]);
            assert!(lit_value(&v, root));
        }
    }
}

#[test]
fn blasted_frame_matches_simulation() {
    let ts = elaborate_source(&fixture("register_interface_ok.sv"), None).unwrap();
    let mut g = Aig::new();
    let ins: Vec<Vec<Lit>> = ts.inputs.iter().map(|i| g.inputs(i.width)).collect();
    let sts: Vec<Vec<Lit>> = ts.states.iter().map(|s| g.inputs(s.width)).collect();
    let mut b = Blaster::new(&ts.arena, &ins, &sts);
    let nexts: Vec<Vec<Lit>> = ts.states.iter().map(|s| b.bits(&mut g, s.next)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let iv: Vec<u64> = ts.inputs.iter().map(|i| rng.random::<u64>() & mask(i.width)).collect();
        let sv: Vec<u64> = ts.states.iter().map(|s| rng.random::<u64>() & mask(s.width)).collect();
        let mut assign = vec![false; g.num_vars() as usize];
        for (bits, &v) in ins.iter().zip(&iv).chain(sts.iter().zip(&sv)) {
            for (k, l) in bits.iter().enumerate() {
                assign[l.var() as usize] = v >> k & 1 == 1;
            }
        }
        let vals = g.simulate(&|v| assign[v as usize]);
        let want = simulate_step(&ts, &sv, &iv).unwrap().next;
        let got: Vec<u64> = nexts
            .iter()
            .map(|bits| bits.iter().enumerate().fold(0, |acc, (k, &l)| acc | (lit_value(&vals, l) as u64) << k))
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn register_interface_adjudication() {
    let ok = obligation(&fixture("register_interface_ok.sv"), RESERVED_READ);
    let v = check(&ok, &CheckOptions::default());
    assert!(matches!(v, Verdict::Proven { k } if k <= 4), "{v:?}");
    assert_eq!(bmc(&ok, 20, &CheckOptions::default()), BmcResult::NoCexUpTo(20));

    let leak = obligation(&fixture("register_interface_leak.sv"), RESERVED_READ);
    let Verdict::Falsified { trace, depth } = check(&leak, &CheckOptions::default()) else { panic!() };
    assert_eq!(depth, 2);
    assert_eq!(evaluate_on_trace(&leak, &trace), Some(2));
    let BmcResult::Falsified { trace: t2, depth: d2 } = bmc(&leak, 20, &CheckOptions::default()) else { panic!() };
    assert_eq!((d2, &t2), (2, &trace));
    let causes = explain(&leak, &trace, 2);
    assert_eq!(causes.len(), 1, "{causes:?}");
    assert_eq!(causes[0].line, 21);
    assert_eq!(causes[0].text.trim(), "data_out <= registers[1]");
}

#[test]
fn reduced_register_interface_oracle() {
    let leak = obligation(&fixture("register_interface_leak_small.sv"), RESERVED_READ);
    assert_eq!(explicit_state_oracle(&leak, DEFAULT_STATE_BIT_CAP, DEFAULT_INPUT_BIT_CAP), OracleResult::Violation(2));
    let ok = obligation(&fixture("register_interface_ok_small.sv"), RESERVED_READ);
    assert_eq!(explicit_state_oracle(&ok, DEFAULT_STATE_BIT_CAP, DEFAULT_INPUT_BIT_CAP), OracleResult::NoViolation);
    let full = obligation(&fixture("register_interface_ok.sv"), RESERVED_READ);
    assert!(matches!(
        explicit_state_oracle(&full, DEFAULT_STATE_BIT_CAP, DEFAULT_INPUT_BIT_CAP),
        OracleResult::NotApplicable(_)
    ));
}

#[test]
fn trivially_false_after_reset() {
    let o = obligation(&fixture("register_interface_ok.sv"), "disable iff (!rst_n_in) 0");
    assert!(matches!(bmc(&o, 5, &CheckOptions::default()), BmcResult::Falsified { depth: 0, .. }));
    let o = obligation(&fixture("register_interface_ok.sv"), "disable iff (!rst_n_in) $past(rst_n_in) |-> 0");
    assert!(matches!(bmc(&o, 5, &CheckOptions::default()), BmcResult::Falsified { depth: 1, .. }));
}

#[test]
fn verdicts_are_deterministic() {
    let leak = obligation(&fixture("register_interface_leak.sv"), RESERVED_READ);
    let a = serde_json::to_string(&check(&leak, &CheckOptions::default())).unwrap();
    let b = serde_json::to_string(&check(&leak, &CheckOptions::default())).unwrap();
    assert_eq!(a, b);
}

fn random_property(rng: &mut ChaCha8Rng, ts: &TransitionSystem) -> String {
    let w = |n: &str| ts.signal(n).unwrap().1;
    let c = |rng: &mut ChaCha8Rng, n: &str| rng.random_range(0..=mask(w(n)));
    match rng.random_range(0..6) {
        0 => format!("y != {}", c(rng, "y")),
        1 => format!("disable iff (rst) z != {}", c(rng, "z")),
        2 => format!("disable iff (rst) a == {} |=> y != {}", c(rng, "a"), c(rng, "y")),
        3 => "y == $past(y) || z != $past(z)".to_string(),
        4 => format!("$rose(a[0]) |-> $past(y, 2) != {}", c(rng, "y")),
        _ => format!("disable iff (rst) !(y == {} && z == {})", c(rng, "y"), c(rng, "z")),
    }
}

#[test]
fn engines_agree_with_oracle_on_random_designs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut compared, mut proven, mut falsified) = (0, 0, 0);
    let mut seed = 0u64;
    let opts = CheckOptions { max_depth: 40, max_k: 24, ..CheckOptions::default() };
    while compared < 220 {
        seed += 1;
        let ts = elaborate_source(&DesignGen::small(seed).design(), None).unwrap();
        let p = parse_property(&random_property(&mut rng, &ts), &ts).unwrap();
        let o = compile_obligation(&p, &ts).unwrap();
        let oracle = explicit_state_oracle(&o, DEFAULT_STATE_BIT_CAP, DEFAULT_INPUT_BIT_CAP);
        if matches!(oracle, OracleResult::NotApplicable(_)) {
            continue;
        }
        compared += 1;
        let v = check(&o, &opts);
        match (&v, &oracle) {
            (Verdict::Falsified { depth, trace }, OracleResult::Violation(d)) => {
                assert_eq!(*depth as usize, *d, "seed {seed}");
                assert_eq!(evaluate_on_trace(&o, trace), Some(*d));
                falsified += 1;
            }
            (Verdict::Proven { .. }, OracleResult::NoViolation) => proven += 1,
            (Verdict::Unknown { .. }, OracleResult::NoViolation) => {}
            _ => panic!("seed {seed}: engine {v:?} vs oracle {oracle:?}\n{}", p.to_text()),
        }
        if let OracleResult::Violation(d) = oracle {
            match bmc(&o, d as u32, &opts) {
                BmcResult::Falsified { depth, .. } => assert_eq!(depth as usize, d),
                r => panic!("seed {seed}: bmc {r:?}"),
            }
            if d > 0 {
                assert_eq!(bmc(&o, d as u32 - 1, &opts), BmcResult::NoCexUpTo(d as u32 - 1));
            }
        }
    }
    assert!(proven > 20 && falsified > 20, "proven {proven}, falsified {falsified}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn solver_models_satisfy_clauses(seed in any::<u64>(), n in 10usize..90) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clauses = random_3cnf(&mut rng, 16, n);
        let mut s = Solver::new(seed);
        for c in &clauses {
            s.add_clause(&c.iter().map(|&d| Lit::new(d.unsigned_abs(), d < 0)).collect::<Vec<_>>());
        }
        let r = s.solve(&[]);
        prop_assert_eq!(r == SatResult::Sat, brute_force(16, &clauses));
        if r == SatResult::Sat {
            prop_assert!(s.model_satisfies_clauses());
        }
    }
}
