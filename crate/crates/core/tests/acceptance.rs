// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance checks. Run with `--nocapture` to see one line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::corpus::random_rows;
use common::fixture;
use common::gen::DesignGen;
use hwcwe_core::catalog::{Catalog, Difficulty};
use hwcwe_core::checker::aig::{lit_value, Aig, Lit};
use hwcwe_core::checker::cnf::{to_cnf, CnfFormula};
use hwcwe_core::checker::sat::SatResult;
use hwcwe_core::checker::{
    check, explicit_state_oracle, CheckOptions, OracleResult, Verdict, DEFAULT_INPUT_BIT_CAP, DEFAULT_STATE_BIT_CAP,
};
use hwcwe_core::metrics::{heatmap, keyword_frequency, pass_at_k, pass_rate, Label};
use hwcwe_core::pipeline::{self, GenerateConfig, DATASET, HEATMAP_JSON, KEYWORDS_CSV};
use hwcwe_core::property::{compile_obligation, parse_property};
use hwcwe_core::ts::mask;
use hwcwe_core::{elaborate_source, TransitionSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn register_interface_pair() -> Outcome {
    let spec = Catalog::builtin().get("cwe1209-basic").map_err(|e| e.to_string())?;
    let ok = pipeline::verify(&fixture("register_interface_ok.sv"), spec, None, &CheckOptions::default());
    ensure!(ok.label() == Label::Proven, "correct design gave {}", ok.label());
    ensure!(ok.runtime_ms < 5000, "correct design took {} ms", ok.runtime_ms);
    let leak = pipeline::verify(&fixture("register_interface_leak.sv"), spec, None, &CheckOptions::default());
    ensure!(leak.label() == Label::Falsified, "leaking design gave {}", leak.label());
    ensure!(leak.runtime_ms < 5000, "leaking design took {} ms", leak.runtime_ms);
    let text = leak.to_text();
    ensure!(text.contains("line 21: data_out <= registers[1]"), "report does not cite line 21:\n{text}");
    Ok(format!("proven in {} ms, falsified in {} ms citing line 21", ok.runtime_ms, leak.runtime_ms))
}

/// One of the structured patterns with an optional planted bug.
fn pattern(rng: &mut ChaCha8Rng, kind: u32) -> (String, String) {
    let w: u32 = rng.random_range(2..=3);
    let bug = rng.random_bool(0.5);
    let k = rng.random_range(0..=mask(w));
    match kind {
        1 => {
            let limit = rng.random_range(1..mask(w));
            let wrap = if bug { (limit + 1 + rng.random_range(0..2)).min(mask(w)) } else { limit };
            let src = format!(
                "module cnt(input logic clk, input logic rst, input logic en, output logic [{}:0] q);\n  always_ff @(posedge clk) begin\n    if (rst) q <= '0;\n    else if (en) begin\n      if (q == {w}'d{wrap}) q <= '0;\n      else q <= q + 1'b1;\n    end\n  end\nendmodule\n",
                w - 1
            );
            let prop = if rng.random_bool(0.5) {
                format!("disable iff (rst) q <= {limit}")
            } else {
                format!("disable iff (rst) en && q == {limit} |=> q == 0")
            };
            (src, prop)
        }
        2 => {
            let ro = rng.random_range(0..4);
            let guard = if bug { format!("we && wd != {w}'d{k}") } else { format!("we && wa != 2'd{ro}") };
            let src = format!(
                "module rf(input logic clk, input logic rst, input logic we, input logic [1:0] wa, input logic [1:0] ra, input logic [{m}:0] wd, output logic [{m}:0] rd);\n  logic [{m}:0] mem [0:3];\n  always_ff @(posedge clk) begin\n    if (rst) begin\n      mem[0] <= '0;\n      mem[1] <= '0;\n      mem[2] <= '0;\n      mem[3] <= '0;\n      rd <= '0;\n    end else begin\n      if ({guard}) mem[wa] <= wd;\n      rd <= mem[ra];\n    end\n  end\nendmodule\n",
                m = w - 1
            );
            let prop = if rng.random_bool(0.5) {
                format!("disable iff (rst) mem[{ro}] == 0")
            } else {
                format!("disable iff (rst) ra == {ro} |=> rd == mem[{ro}]")
            };
            (src, prop)
        }
        3 => {
            let set = if bug { "locked <= lock_in;" } else { "if (lock_in) locked <= 1'b1;" };
            let src = format!(
                "module lk(input logic clk, input logic rst, input logic lock_in, input logic we, input logic [{m}:0] d, output logic [{m}:0] q, output logic locked);\n  always_ff @(posedge clk) begin\n    if (rst) begin\n      q <= '0;\n      locked <= 1'b0;\n    end else begin\n      {set}\n      if (we && !locked) q <= d;\n    end\n  end\nendmodule\n",
                m = w - 1
            );
            (src, "disable iff (rst) locked |=> q == $past(q)".into())
        }
        _ => {
            let done = if bug { format!("done <= (d != {w}'d{k});") } else { "done <= 1'b1;".into() };
            let src = format!(
                "module wo(input logic clk, input logic rst, input logic we, input logic [{m}:0] d, output logic [{m}:0] q, output logic done);\n  always_ff @(posedge clk) begin\n    if (rst) begin\n      q <= '0;\n      done <= 1'b0;\n    end else if (we && !done) begin\n      q <= d;\n      {done}\n    end\n  end\nendmodule\n",
                m = w - 1
            );
            (src, "disable iff (rst) done |=> q == $past(q)".into())
        }
    }
}

fn random_property(rng: &mut ChaCha8Rng, ts: &TransitionSystem) -> String {
    let w = |n: &str| ts.signal(n).map(|s| s.1).unwrap_or(1);
    let c = |rng: &mut ChaCha8Rng, n: &str| rng.random_range(0..=mask(w(n)));
    match rng.random_range(0..5) {
        0 => format!("y != {}", c(rng, "y")),
        1 => format!("disable iff (rst) z != {}", c(rng, "z")),
        2 => format!("disable iff (rst) a == {} |=> y != {}", c(rng, "a"), c(rng, "y")),
        3 => "y == $past(y) || z != $past(z)".to_string(),
        _ => format!("disable iff (rst) !(y == {} && z == {})", c(rng, "y"), c(rng, "z")),
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = CheckOptions { max_depth: 40, max_k: 24, ..CheckOptions::default() };
    let (mut compared, mut proven, mut falsified, mut inconclusive) = (0, 0, 0, 0);
    let mut i = 0u64;
    while compared < 250 {
        i += 1;
        let kind = (i % 5) as u32;
        let (src, prop) = if kind == 0 {
            let src = DesignGen::small(i).design();
            let ts = elaborate_source(&src, None).map_err(|d| format!("design {i}: {d:?}"))?;
            let p = random_property(&mut rng, &ts);
            (src, p)
        } else {
            pattern(&mut rng, kind)
        };
        let text = format!("assert property (@(posedge clk) {prop});");
        let ts = elaborate_source(&src, None).map_err(|d| format!("design {i}: {d:?}\n{src}"))?;
        let p = parse_property(&text, &ts).map_err(|d| format!("property {i}: {d}"))?;
        let o = compile_obligation(&p, &ts).map_err(|d| format!("obligation {i}: {d}"))?;
        let oracle = explicit_state_oracle(&o, DEFAULT_STATE_BIT_CAP, DEFAULT_INPUT_BIT_CAP);
        if matches!(oracle, OracleResult::NotApplicable(_)) {
            continue;
        }
        compared += 1;
        match (check(&o, &opts), &oracle) {
            (Verdict::Falsified { depth, .. }, OracleResult::Violation(d)) if depth as usize == *d => falsified += 1,
            (Verdict::Proven { .. }, OracleResult::NoViolation) => proven += 1,
            (Verdict::Unknown { .. }, OracleResult::NoViolation) => inconclusive += 1,
            (v, _) => return Err(format!("case {i}: engine {} vs oracle {oracle:?}\n{src}{text}", v.kind())),
        }
    }
    ensure!(inconclusive == 0, "{inconclusive} inconclusive verdicts where the oracle found no violation");
    ensure!(start.elapsed() < Duration::from_secs(600), "took {:?}", start.elapsed());
    Ok(format!(
        "{compared} cases ({proven} proven, {falsified} falsified at oracle depth), 0 disagreements, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

fn catalog_soundness() -> Outcome {
    let mut correct = 0;
    let mut slowest = Duration::ZERO;
    for spec in Catalog::builtin().problems() {
        for (src, want) in [(spec.reference_source(), Label::Proven), (spec.vulnerable_source(), Label::Falsified)] {
            let r = pipeline::verify(src, spec, None, &CheckOptions::default());
            let took = Duration::from_millis(r.runtime_ms as u64);
            slowest = slowest.max(took);
            ensure!(r.label() == want, "{}: expected {want}, got {}", spec.id(), r.label());
            ensure!(took < Duration::from_secs(60), "{} took {took:?}", spec.id());
            correct += 1;
        }
    }
    ensure!(correct == 60, "{correct}/60");
    Ok(format!("60/60 correct, slowest {} ms", slowest.as_millis()))
}

fn random_3cnf(rng: &mut ChaCha8Rng, vars: u32, clauses: usize) -> Vec<Vec<i32>> {
    (0..clauses)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let v = rng.random_range(1..=vars) as i32;
                    if rng.random_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect()
}

fn enumerate(vars: u32, clauses: &[Vec<i32>]) -> bool {
    (0..1u32 << vars).any(|a| clauses.iter().all(|c| c.iter().any(|&l| (a >> (l.unsigned_abs() - 1) & 1 == 1) == (l > 0))))
}

fn random_circuit(rng: &mut ChaCha8Rng) -> (Aig, Lit) {
    let mut g = Aig::new();
    let mut pool = g.inputs(4);
    for _ in 0..10 {
        let mut pick = || {
            let l = pool[rng.random_range(0..pool.len())];
            if rng.random_bool(0.5) {
                !l
            } else {
                l
            }
        };
        let (a, b) = (pick(), pick());
        let x = match rng.random_range(0..3) {
            0 => g.and(a, b),
            1 => g.or(a, b),
            _ => g.xor(a, b),
        };
        pool.push(x);
    }
    let root = *pool.last().expect("non-empty");
    (g, root)
}

fn sat_core() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut sat = 0;
    for t in 0..500 {
        let clauses = random_3cnf(&mut rng, 20, 76 + t % 20);
        let f = CnfFormula { num_vars: 20, clauses: clauses.clone(), assumptions: vec![] };
        let (r, model) = f.solve(None);
        ensure!((r == SatResult::Sat) == enumerate(20, &clauses), "3-CNF instance {t} disagrees");
        if let Some(m) = model {
            ensure!(f.satisfied_by(&m), "model for instance {t} is wrong");
            sat += 1;
        }
    }
    for t in 0..500 {
        let (g, root) = random_circuit(&mut rng);
        let expect = (0..16u32).any(|a| lit_value(&g.simulate(&|v| a >> (v - 1) & 1 == 1), root));
        ensure!((to_cnf(&g, &[root]).solve(None).0 == SatResult::Sat) == expect, "circuit {t} disagrees");
    }
    for t in 0..50 {
        let clauses = random_3cnf(&mut rng, 30, 128);
        let f = CnfFormula { num_vars: 30, clauses, assumptions: vec![] };
        let text = f.to_dimacs();
        let parsed = varisat::dimacs::DimacsParser::parse(text.as_bytes()).map_err(|e| e.to_string())?;
        let mut other = varisat::Solver::new();
        other.add_formula(&parsed);
        let theirs = other.solve().map_err(|e| e.to_string())?;
        ensure!((f.solve(None).0 == SatResult::Sat) == theirs, "DIMACS sample {t} disagrees with varisat");
    }
    Ok(format!("500/500 3-CNF ({sat} sat), 500/500 circuits, 50/50 DIMACS cross-checks"))
}

fn run_pipeline(dir: &std::path::Path, seed: u64) -> Result<Vec<hwcwe_core::metrics::DatasetRow>, String> {
    let cfg = GenerateConfig {
        out: dir.to_path_buf(),
        seed,
        n: 20,
        workers: 4,
        stub: true,
        providers_file: None,
        cwe: None,
        difficulty: None,
    };
    pipeline::generate(&cfg).map_err(|e| e.to_string())?;
    let rows = pipeline::label(dir, &CheckOptions::default(), 4, false).map_err(|e| e.to_string())?;
    pipeline::metrics(dir).map_err(|e| e.to_string())?;
    Ok(rows)
}

fn desk_scale_pipeline() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rows = run_pipeline(dir.path(), 0)?;
    ensure!(rows.len() == 2400, "{} rows", rows.len());
    for p in ["stub-alpha", "stub-beta", "stub-gamma", "stub-delta"] {
        for d in Difficulty::ALL {
            let r = pass_at_k(&rows, p, d, true).map_err(|e| e.to_string())?;
            ensure!(r == 0.3, "{p}/{d}: pass@k {r}");
        }
    }
    let report = pipeline::build_report(&rows).map_err(|e| e.to_string())?;
    let share = report.vulnerable_or_broken_share;
    ensure!((0.5..=0.7).contains(&share), "vulnerable or broken share {share}");
    ensure!(start.elapsed() < Duration::from_secs(900), "took {:?}", start.elapsed());
    Ok(format!(
        "2400 rows, pass@k = 0.3 in all 12 cells, vulnerable or broken {:.0}%, {:.1} s",
        share * 100.0,
        start.elapsed().as_secs_f64()
    ))
}

fn metric_fixture() -> Outcome {
    let a = format!("{:.3}", pass_rate(2835, 10, 500));
    let b = format!("{:.3}", pass_rate(2935, 10, 500));
    ensure!(a == "0.567" && b == "0.587", "got {a} and {b}");
    Ok(format!("{a} and {b}"))
}

fn dominance() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let stub = run_pipeline(dir.path(), 3)?;
    let mut corpora = vec![stub];
    corpora.extend((0..50).map(|s| random_rows(1000 + s, 1 + (s as usize % 3), 1 + (s as u32 % 3))));
    let mut cells = 0;
    for (i, rows) in corpora.iter().enumerate() {
        ensure!(rows.iter().any(|r| r.verdict == Label::CompileError), "corpus {i} has no compile errors");
        let h = heatmap(rows).map_err(|e| e.to_string())?;
        for (inc, exc) in h.include_noncompilable.iter().flatten().zip(h.exclude_noncompilable.iter().flatten()) {
            ensure!(inc <= exc, "corpus {i}: {inc} > {exc}");
            cells += 1;
        }
        let t = hwcwe_core::metrics::pass_at_k_table(rows).map_err(|e| e.to_string())?;
        for c in &t.by_difficulty {
            ensure!(c.rate_include <= c.rate_exclude, "corpus {i}: {} {}", c.provider, c.scope);
        }
    }
    Ok(format!("stub corpus + 50 random corpora, {cells} heatmap cells dominated"))
}

fn keyword_metric() -> Outcome {
    let src = fixture("register_interface_ok.sv");
    let h = keyword_frequency(&[src.as_str()]);
    let got = [h.get("logic"), h.get("input"), h.get("begin"), h.get("always_ff")];
    ensure!(got == [7, 5, 7, 1], "logic/input/begin/always_ff = {got:?}");
    let noisy: String = src
        .lines()
        .enumerate()
        .map(|(i, l)| match i % 3 {
            0 => format!("  {l}  // begin logic input\n"),
            1 => format!("/* always_ff\n module */ {l}\n\n"),
            _ => format!("{}\n", l.replace(' ', " \t ")),
        })
        .collect();
    ensure!(keyword_frequency(&[noisy.as_str()]) == h, "histogram changed under comment/whitespace injection");
    Ok("logic=7 input=5 begin=7 always_ff=1, invariant under comments and whitespace".into())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(a.path(), 42)?;
    run_pipeline(b.path(), 42)?;
    for f in [DATASET, HEATMAP_JSON, KEYWORDS_CSV] {
        let x = std::fs::read(a.path().join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| e.to_string())?;
        ensure!(x == y, "{f} differs between runs");
    }
    Ok("dataset.csv, heatmap.json and keywords.csv byte-identical".into())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("register interface adjudication", register_interface_pair),
        ("oracle equivalence", oracle_equivalence),
        ("catalog soundness", catalog_soundness),
        ("SAT core", sat_core),
        ("desk-scale stub pipeline", desk_scale_pipeline),
        ("metric fixture", metric_fixture),
        ("non-compilable dominance", dominance),
        ("keyword metric", keyword_metric),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
