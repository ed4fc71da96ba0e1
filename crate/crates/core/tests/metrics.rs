// SPDX-License-Identifier: Apache-2.0

mod common;

use common::corpus::{random_rows, stub_generations};
use common::fixture;
use hwcwe_core::catalog::{Catalog, Difficulty, CWE_IDS};
use hwcwe_core::checker::CheckOptions;
use hwcwe_core::gen::{Generation, StubMix, StubProvider};
use hwcwe_core::metrics::*;
use proptest::prelude::*;

fn generation(problem: &str, raw: &str) -> Generation {
    Generation {
        problem_id: problem.into(),
        provider: "fixture".into(),
        regen_index: 0,
        temperature: 1.0,
        timestamp: None,
        raw: Some(raw.into()),
        extracted: hwcwe_core::gen::extract_code(raw),
        error: None,
        usage: None,
        attempts: 1,
    }
}

#[test]
fn register_interface_pair_is_labeled() {
    let spec = Catalog::builtin().get("cwe1209-basic").unwrap();
    let ok = label_design(&generation("cwe1209-basic", &fixture("register_interface_ok.sv")), spec, &CheckOptions::default(), 1);
    assert_eq!(ok.verdict, Label::Proven);
    assert!(ok.k_used.is_some() && ok.cex_depth.is_none());
    assert!(ok.runtime_ms.is_some());

    let leak =
        label_design(&generation("cwe1209-basic", &fixture("register_interface_leak.sv")), spec, &CheckOptions::default(), 1);
    assert_eq!(leak.verdict, Label::Falsified);
    // Same minimal depth the explicit-state oracle reports on the reduced copy.
    assert_eq!(leak.cex_depth, Some(2));
    assert_eq!(leak.lines_of_code, 29);
    assert_eq!(leak.property_id, "cwe1209-basic:reserved_read");
    assert_eq!(leak.seed, 1);
}

#[test]
fn prose_and_wrong_modules_are_compile_errors() {
    let spec = Catalog::builtin().get("cwe1209-basic").unwrap();
    let prose = generation("cwe1209-basic", "I am sorry, but I cannot help with that.");
    assert_eq!(label_design(&prose, spec, &CheckOptions::default(), 0).verdict, Label::CompileError);
    let wrong = generation("cwe1209-basic", "module other(input logic a); endmodule");
    assert_eq!(label_design(&wrong, spec, &CheckOptions::default(), 0).verdict, Label::CompileError);
    // Right module, but a port the property needs is missing.
    let thin = generation(
        "cwe1209-basic",
        "module register_interface(input logic clk_in, input logic rst_n_in, output logic [7:0] data_out);\n  assign data_out = 8'h0;\nendmodule",
    );
    let row = label_design(&thin, spec, &CheckOptions::default(), 0);
    assert_eq!(row.verdict, Label::CompileError);
    assert_eq!(row.cex_depth, None);
    assert_eq!(row.k_used, None);
}

#[test]
fn pass_rate_fixtures() {
    assert_eq!(format!("{:.3}", pass_rate(2835, 10, 500)), "0.567");
    assert_eq!(format!("{:.3}", pass_rate(2935, 10, 500)), "0.587");
    assert_eq!(pass_rate(0, 10, 500), 0.0);
    assert_eq!(pass_rate(3, 0, 0), 0.0);
}

#[test]
fn incomplete_scope_lists_missing_cells() {
    let mut rows = random_rows(3, 1, 2);
    rows.retain(|r| !(r.cwe_id == 1254 && r.difficulty == Difficulty::Basic && r.regen_index == 1));
    let e = pass_at_k(&rows, "p0", Difficulty::Basic, true).unwrap_err();
    let msg = e.to_string();
    assert!(msg.contains("p0 cwe1254-basic #1"), "{msg}");
    assert!(pass_at_k(&rows, "p0", Difficulty::Advanced, true).is_ok());
    assert!(pass_at_k_table(&rows).is_err());
    assert!(matches!(pass_at_k(&rows, "nobody", Difficulty::Basic, true), Err(MetricsError::Empty(_))));
}

#[test]
fn unknown_counts_against_the_rate() {
    let mut rows = random_rows(9, 1, 1);
    for r in rows.iter_mut() {
        r.verdict = Label::Proven;
        r.k_used = Some(1);
        r.cex_depth = None;
    }
    assert_eq!(pass_at_k(&rows, "p0", Difficulty::Basic, true).unwrap(), 1.0);
    rows[0].verdict = Label::Unknown;
    rows[0].k_used = None;
    let d = rows[0].difficulty;
    assert_eq!(pass_at_k(&rows, "p0", d, true).unwrap(), 0.9);
    assert_eq!(pass_at_k(&rows, "p0", d, false).unwrap(), 0.9);
    let t = pass_at_k_table(&rows).unwrap();
    assert_eq!(t.cell("p0", RateScope::Difficulty(d)).unwrap().counts.unknown, 1);
}

#[test]
fn planted_forty_percent_is_measured_exactly() {
    let mix = StubMix { reference: 40, vulnerable: 40, broken: 15, refusal: 5 };
    assert_eq!(mix.block(), 20);
    let p = StubProvider { id: "stub-forty".into(), seed: 5, mix };
    let gens: Vec<Generation> = stub_generations(&[p], 20)
        .into_iter()
        .filter(|g| g.problem_id.ends_with("-basic"))
        .collect();
    assert_eq!(gens.len(), 200);
    let rows = label_corpus(&gens, Catalog::builtin(), &LabelOptions { workers: 4, ..LabelOptions::default() }).unwrap();
    assert_eq!(pass_at_k(&rows, "stub-forty", Difficulty::Basic, true).unwrap(), 0.4);
    // 80 proven of 200 - 40 non-compilable.
    assert_eq!(pass_at_k(&rows, "stub-forty", Difficulty::Basic, false).unwrap(), 0.5);
}

#[test]
fn stub_corpus_csv_has_one_line_per_row() {
    let gens = stub_generations(&[StubProvider::new("stub-alpha", 11)], 20);
    assert_eq!(gens.len(), 600);
    let rows = label_corpus(&gens, Catalog::builtin(), &LabelOptions { seed: 11, workers: 4, ..LabelOptions::default() }).unwrap();
    let per: Vec<usize> = Label::ALL.iter().map(|l| rows.iter().filter(|r| r.verdict == *l).count()).collect();
    assert_eq!(per, vec![180, 300, 0, 120]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    export_csv(&rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 601);
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(import_csv(&path).unwrap(), rows);
    for r in rows.iter().filter(|r| r.verdict == Label::Falsified) {
        assert!(r.cex_depth.is_some());
    }

    let t = pass_at_k_table(&rows).unwrap();
    for d in Difficulty::ALL {
        assert_eq!(t.cell("stub-alpha", RateScope::Difficulty(d)).unwrap().rate_include, 0.3);
    }
    let h = heatmap(&rows).unwrap();
    assert_eq!(h.designs_per_cell, 60);
    assert!(h.include_noncompilable[0].iter().all(|&x| x == 0.3));
    assert!(h.exclude_noncompilable[0].iter().all(|&x| x == 18.0 / 48.0));
}

#[test]
fn import_rejects_foreign_headers_and_broken_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    std::fs::write(&path, "a,b\n1,2\n").unwrap();
    assert!(matches!(import_csv(&path), Err(MetricsError::Header(_))));

    let mut rows = random_rows(1, 1, 1);
    let i = rows.iter().position(|r| r.verdict == Label::Falsified).unwrap();
    rows[i].cex_depth = None;
    assert!(matches!(export_csv(&rows, &path), Err(MetricsError::Invalid { .. })));
    let mut dup = random_rows(1, 1, 1);
    dup.push(dup[0].clone());
    assert!(matches!(validate_rows(&dup), Err(MetricsError::Duplicate(_))));
}

#[test]
fn keyword_counts_on_register_interface() {
    let h = keyword_frequency(&[fixture("register_interface_ok.sv")]);
    assert_eq!(h.get("logic"), 7);
    assert_eq!(h.get("input"), 5);
    assert_eq!(h.get("output"), 1);
    assert_eq!(h.get("always_ff"), 1);
    assert_eq!(h.get("begin"), 7);
    assert_eq!(h.get("end"), 7);
    assert_eq!(h.skipped, 0);
    assert_eq!(h.counts.len(), 44);

    let empty = keyword_frequency::<&str>(&[]);
    assert_eq!(empty.total(), 0);
    assert_eq!(empty.counts.len(), 44);

    let odd = keyword_frequency(&["module m; \"begin end\" endmodule", "module x; ` endmodule"]);
    assert_eq!((odd.get("begin"), odd.get("module"), odd.skipped), (0, 1, 1));
}

#[test]
fn keyword_set_is_distinct_and_configurable() {
    let mut k = DEFAULT_KEYWORDS.to_vec();
    k.sort_unstable();
    k.dedup();
    assert_eq!(k.len(), 44);
    let h = keyword_frequency_with(&[fixture("register_interface_ok.sv")], &["if", "else", "registers"]);
    assert_eq!(h.counts, vec![("if".into(), 5), ("else".into(), 4), ("registers".into(), 0)]);
}

fn inject_noise(src: &str, seed: u64) -> String {
    let mut out = String::new();
    for (i, line) in src.lines().enumerate() {
        match (seed >> (i % 60)) & 3 {
            0 => out.push_str(&format!("  {line}   // begin logic input {i}\n")),
            1 => out.push_str(&format!("/* module\nend */\t{line}\n\n")),
            2 => out.push_str(&format!("{line}\n")),
            _ => out.push_str(&format!("{}\n", line.replace(' ', "  \t"))),
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn keywords_ignore_comments_and_whitespace(seed in any::<u64>()) {
        let src = fixture("register_interface_leak.sv");
        prop_assert_eq!(keyword_frequency(&[src.clone()]), keyword_frequency(&[inject_noise(&src, seed)]));
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), text in "[ -~\u{e9}\n\",]{0,24}", runtime in proptest::option::of(0u64..1_000_000)) {
        let mut rows = random_rows(seed, 1, 1);
        rows.truncate(7);
        rows[0].source_path = text.clone();
        rows[1].design_id = text;
        rows[2].runtime_ms = runtime;
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        prop_assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn including_noncompilable_never_raises_a_rate(seed in any::<u64>(), providers in 1usize..4, n in 1u32..4) {
        let rows = random_rows(seed, providers, n);
        let t = pass_at_k_table(&rows).unwrap();
        for c in t.by_difficulty.iter().chain(&t.by_cwe) {
            prop_assert!(c.rate_include <= c.rate_exclude);
            prop_assert!((0.0..=1.0).contains(&c.rate_include) && (0.0..=1.0).contains(&c.rate_exclude));
        }
        let h = heatmap(&rows).unwrap();
        for (a, b) in h.include_noncompilable.iter().flatten().zip(h.exclude_noncompilable.iter().flatten()) {
            prop_assert!(a <= b);
        }
        for d in Difficulty::ALL {
            for p in 0..providers {
                let p = format!("p{p}");
                let inc = pass_at_k(&rows, &p, d, true).unwrap();
                prop_assert_eq!(inc, t.cell(&p, RateScope::Difficulty(d)).unwrap().rate_include);
                let proven = rows.iter().filter(|r| r.provider == p && r.difficulty == d && r.verdict == Label::Proven).count();
                prop_assert_eq!(inc, pass_rate(proven as u64, CWE_IDS.len() as u64, n as u64));
            }
        }
    }

    #[test]
    fn one_more_proven_row_never_lowers_a_rate(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut rows = random_rows(seed, 1, 2);
        let i = pick.index(rows.len());
        let d = rows[i].difficulty;
        let before = (pass_at_k(&rows, "p0", d, true).unwrap(), pass_at_k(&rows, "p0", d, false).unwrap());
        rows[i].verdict = Label::Proven;
        rows[i].k_used = Some(1);
        rows[i].cex_depth = None;
        let after = (pass_at_k(&rows, "p0", d, true).unwrap(), pass_at_k(&rows, "p0", d, false).unwrap());
        prop_assert!(after.0 >= before.0 && after.1 >= before.1);
    }

    #[test]
    fn verdicts_partition_the_corpus(seed in any::<u64>(), providers in 1usize..3, n in 1u32..3) {
        let rows = random_rows(seed, providers, n);
        let t = pass_at_k_table(&rows).unwrap();
        for c in &t.by_difficulty {
            prop_assert_eq!(c.counts.total(), CWE_IDS.len() as u64 * n as u64);
        }
    }
}

#[test]
fn artifacts_carry_version_and_seed() {
    let rows = random_rows(4, 2, 2);
    let t = pass_at_k_table(&rows).unwrap();
    let h = heatmap(&rows).unwrap();
    let json: serde_json::Value = serde_json::from_str(&heatmap_json(&h, 77)).unwrap();
    assert_eq!(json["seed"], 77);
    assert_eq!(json["toolkit_version"], hwcwe_core::TOOLKIT_VERSION);
    assert_eq!(json["providers"].as_array().unwrap().len(), 2);
    assert_eq!(json["cwes"].as_array().unwrap().len(), 10);
    assert_eq!(json["include_noncompilable"].as_array().unwrap().len(), 2);
    let p = passatk_csv(&t, 77);
    assert_eq!(p.lines().count(), 1 + 2 * (3 + 10));
    assert!(p.lines().skip(1).all(|l| l.ends_with(&format!(",{},77", hwcwe_core::TOOLKIT_VERSION))));
    let hc = heatmap_csv(&t, 77);
    assert_eq!(hc.lines().count(), 1 + 20);
    let k = keywords_csv(&[("all".into(), keyword_frequency(&[fixture("register_interface_ok.sv")]))], 77);
    assert_eq!(k.lines().count(), 45);
    assert!(k.contains("all,logic,7,"));
}
