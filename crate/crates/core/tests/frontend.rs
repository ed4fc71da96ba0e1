// SPDX-License-Identifier: Apache-2.0

mod common;

use common::gen::DesignGen;
use hwcwe_core::diag::Severity;
use hwcwe_core::sv::ast::{AlwaysKind, Edge, Item, Sensitivity, Stmt};
use hwcwe_core::sv::token::{is_keyword, KEYWORDS};
use hwcwe_core::sv::{parse, parse_source, pretty_print, tokenize, TokenKind};
use proptest::prelude::*;

#[test]
fn assign_tokens() {
    let (toks, diags) = tokenize("assign y = a & b;");
    assert!(diags.is_empty());
    let got: Vec<(TokenKind, &str)> = toks.iter().map(|t| (t.kind, t.text.as_str())).collect();
    assert_eq!(
        got,
        [
            (TokenKind::Keyword, "assign"),
            (TokenKind::Identifier, "y"),
            (TokenKind::Operator, "="),
            (TokenKind::Identifier, "a"),
            (TokenKind::Operator, "&"),
            (TokenKind::Identifier, "b"),
            (TokenKind::Punctuation, ";"),
        ]
    );
}

#[test]
fn register_interface_has_seven_logic_keywords() {
    let (toks, diags) = tokenize(&common::fixture("register_interface_ok.sv"));
    assert!(diags.is_empty());
    let n = toks.iter().filter(|t| t.kind == TokenKind::Keyword && t.text == "logic").count();
    assert_eq!(n, 7);
}

#[test]
fn literal_forms_are_single_tokens() {
    let (toks, diags) = tokenize("8'b0 'h1");
    assert!(diags.is_empty());
    assert_eq!(toks.len(), 2);
    assert_eq!(toks[0].kind, TokenKind::SizedLiteral);
    assert_eq!(toks[1].kind, TokenKind::UnsizedLiteral);
}

#[test]
fn register_interface_structure() {
    let unit = parse_source(&common::fixture("register_interface_ok.sv")).unwrap();
    assert_eq!(unit.modules.len(), 1);
    let m = &unit.modules[0];
    assert_eq!(m.name, "register_interface");
    assert_eq!(m.ports.len(), 6);
    let arrays: Vec<_> = m
        .items
        .iter()
        .filter_map(|i| match i {
            Item::Net(n) => Some(n),
            _ => None,
        })
        .flat_map(|n| n.vars.iter().filter(|v| !v.unpacked.is_empty()).map(move |v| (n, v)))
        .collect();
    assert_eq!(arrays.len(), 1);
    assert_eq!(arrays[0].1.name, "registers");
    assert_eq!(hwcwe_core::sv::printer::expr(&arrays[0].0.range.as_ref().unwrap().msb), "7");
    let u = &arrays[0].1.unpacked[0];
    assert_eq!(
        (hwcwe_core::sv::printer::expr(&u.msb), hwcwe_core::sv::printer::expr(&u.lsb)),
        ("0".to_string(), "1".to_string())
    );
    let blocks: Vec<_> = m
        .items
        .iter()
        .filter_map(|i| match i {
            Item::Always { kind, sensitivity, body, .. } => Some((kind, sensitivity, body)),
            _ => None,
        })
        .collect();
    assert_eq!(blocks.len(), 1);
    assert_eq!(*blocks[0].0, AlwaysKind::AlwaysFf);
    assert_eq!(
        *blocks[0].1,
        Sensitivity::Edges(vec![(Edge::Posedge, "clk_in".into()), (Edge::Negedge, "rst_n_in".into())])
    );
    let mut nb = 0;
    blocks[0].2.walk(&mut |s| {
        if matches!(s, Stmt::NonBlocking { .. }) {
            nb += 1;
        }
        assert!(!matches!(s, Stmt::Blocking { .. }));
    });
    assert_eq!(nb, 6);
}

#[test]
fn stray_quote_literal_is_an_error() {
    let src = common::fixture("register_interface_typo.sv");
    let diags = parse_source(&src).unwrap_err();
    let e = diags.iter().find(|d| d.severity == Severity::Error).unwrap();
    assert_eq!(e.loc.line, 23);
    let line = src.lines().nth(22).unwrap();
    assert!(line[e.loc.col as usize - 1..].starts_with('\''));
}

#[test]
fn empty_module() {
    let unit = parse_source("module m; endmodule").unwrap();
    assert_eq!(unit.modules.len(), 1);
    assert!(unit.modules[0].items.is_empty());
    let text = pretty_print(&unit);
    assert_eq!(text.split_whitespace().collect::<Vec<_>>(), ["module", "m;", "endmodule"]);
}

#[test]
fn two_module_soc() {
    let unit = parse_source(&common::fixture("soc_fifo.sv")).unwrap();
    assert_eq!(unit.modules.len(), 2);
    let soc = unit.module("soc").unwrap();
    let insts: Vec<_> = soc
        .items
        .iter()
        .filter_map(|i| match i {
            Item::Instance(x) => Some(x),
            _ => None,
        })
        .collect();
    assert_eq!(insts.len(), 1);
    assert_eq!(insts[0].module, "periph_fifo");
    assert_eq!(insts[0].connections.len(), 6);
    assert!(insts[0].connections.iter().any(|c| c.port == "security_level_in"));
}

#[test]
fn unsupported_blocks_are_reported() {
    for src in [
        "class c; endclass",
        "interface i; endinterface",
        "module m; generate endgenerate endmodule",
        "program p; endprogram",
        "module m(input logic a); initial begin end endmodule",
        "module m(input logic a, output logic y); function logic f(input logic x); return x; endfunction assign y = a; endmodule",
    ] {
        let diags = parse_source(src).unwrap_err();
        assert!(diags.iter().any(|d| d.severity == Severity::Unsupported), "{src}: {diags:?}");
        assert!(!diags.iter().any(|d| d.severity == Severity::Error), "{src}: {diags:?}");
    }
}

#[test]
fn fixtures_round_trip() {
    for f in ["register_interface_ok.sv", "register_interface_leak.sv", "soc_fifo.sv"] {
        let unit = parse_source(&common::fixture(f)).unwrap();
        let again = parse_source(&pretty_print(&unit)).unwrap();
        assert_eq!(unit, again, "{f}");
    }
}

#[test]
fn keyword_table_is_closed() {
    let src = common::fixture("soc_fifo.sv");
    let (toks, _) = tokenize(&src);
    for t in &toks {
        if t.kind == TokenKind::Keyword {
            assert!(KEYWORDS.contains(&t.text.as_str()));
        } else if t.kind == TokenKind::Identifier {
            assert!(!is_keyword(&t.text));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generated_designs_round_trip(seed in any::<u64>()) {
        let src = DesignGen::new(seed).design();
        let unit = parse_source(&src).unwrap();
        let printed = pretty_print(&unit);
        let again = parse_source(&printed).map_err(|d| TestCaseError::fail(format!("{d:?}\n{printed}")))?;
        prop_assert_eq!(&unit, &again);
        prop_assert_eq!(pretty_print(&again), printed);
    }

    #[test]
    fn tokenizer_is_total(s in "\\PC{0,200}") {
        let (toks, diags) = tokenize(&s);
        let lines: Vec<&str> = s.split('\n').collect();
        for t in &toks {
            let line = lines[t.line as usize - 1];
            let rest: String = line.chars().skip(t.col as usize - 1).collect();
            prop_assert!(rest.starts_with(&t.text), "{:?} at {}:{}", t.text, t.line, t.col);
        }
        for d in &diags {
            prop_assert!((d.loc.line as usize) <= lines.len());
        }
    }

    #[test]
    fn parser_never_panics(s in "(module|endmodule|input|logic|always_ff|begin|end|if|else|assign|[a-z]|[0-9]|'h|[;,()\\[\\]:=<&|+@ ]){0,60}") {
        let (toks, _) = tokenize(&s);
        let _ = parse(&toks);
    }

    #[test]
    fn comments_and_whitespace_do_not_change_tokens(seed in any::<u64>(), pad in 1usize..4) {
        let src = DesignGen::new(seed).design();
        let noisy: String = src
            .lines()
            .map(|l| format!("{}{l} // note\n/* x */", " ".repeat(pad)))
            .collect();
        let a: Vec<String> = tokenize(&src).0.into_iter().map(|t| t.text).collect();
        let b: Vec<String> = tokenize(&noisy).0.into_iter().map(|t| t.text).collect();
        prop_assert_eq!(a, b);
    }
}
