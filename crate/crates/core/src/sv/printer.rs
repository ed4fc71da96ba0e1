// SPDX-License-Identifier: Apache-2.0

//! Canonical pretty-printer. `parse(print(ast)) == ast` for any tree the parser produces.

use std::fmt::Write;

use crate::sv::ast::*;

const INDENT: &str = "    ";

pub fn pretty_print(unit: &SourceUnit) -> String {
    let mut out = String::new();
    for (i, m) in unit.modules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_module(&mut out, m);
    }
    out
}

fn print_module(out: &mut String, m: &ModuleDecl) {
    write!(out, "module {}", m.name).unwrap();
    if !m.params.is_empty() {
        out.push_str(" #(\n");
        for (i, p) in m.params.iter().enumerate() {
            out.push_str(INDENT);
            print_param(out, p);
            out.push_str(if i + 1 < m.params.len() { ",\n" } else { "\n" });
        }
        out.push(')');
    }
    if !m.ports.is_empty() {
        out.push_str(" (\n");
        for (i, p) in m.ports.iter().enumerate() {
            out.push_str(INDENT);
            out.push_str(p.direction.as_str());
            if let Some(k) = p.kind.keyword() {
                write!(out, " {k}").unwrap();
            }
            if p.signed {
                out.push_str(" signed");
            }
            if let Some(r) = &p.range {
                write!(out, " {}", range(r)).unwrap();
            }
            write!(out, " {}", p.name).unwrap();
            out.push_str(if i + 1 < m.ports.len() { ",\n" } else { "\n" });
        }
        out.push(')');
    }
    out.push_str(";\n");
    for item in &m.items {
        print_item(out, item);
    }
    out.push_str("endmodule\n");
}

fn print_param(out: &mut String, p: &ParamDecl) {
    out.push_str(if p.local { "localparam" } else { "parameter" });
    if let Some(r) = &p.range {
        write!(out, " {}", range(r)).unwrap();
    }
    write!(out, " {} = {}", p.name, expr(&p.value)).unwrap();
}

fn range(r: &Range) -> String {
    format!("[{}:{}]", expr(&r.msb), expr(&r.lsb))
}

fn print_item(out: &mut String, item: &Item) {
    match item {
        Item::Param(p) => {
            out.push_str(INDENT);
            print_param(out, p);
            out.push_str(";\n");
        }
        Item::Net(n) => {
            out.push_str(INDENT);
            out.push_str(n.kind.keyword().unwrap_or("logic"));
            if n.signed {
                out.push_str(" signed");
            }
            if let Some(r) = &n.range {
                write!(out, " {}", range(r)).unwrap();
            }
            for (i, v) in n.vars.iter().enumerate() {
                out.push_str(if i == 0 { " " } else { ", " });
                out.push_str(&v.name);
                for u in &v.unpacked {
                    write!(out, " {}", range(u)).unwrap();
                }
                if let Some(init) = &v.init {
                    write!(out, " = {}", expr(init)).unwrap();
                }
            }
            out.push_str(";\n");
        }
        Item::Assign { lhs, rhs, .. } => {
            writeln!(out, "{INDENT}assign {} = {};", expr(lhs), expr(rhs)).unwrap();
        }
        Item::Always { kind, sensitivity, body, .. } => {
            write!(out, "{INDENT}{}", kind.keyword()).unwrap();
            match sensitivity {
                Sensitivity::None => {}
                Sensitivity::Star => out.push_str(" @(*)"),
                Sensitivity::Signals(s) => write!(out, " @({})", s.join(" or ")).unwrap(),
                Sensitivity::Edges(e) => {
                    let parts: Vec<String> = e
                        .iter()
                        .map(|(edge, s)| {
                            let kw = match edge {
                                Edge::Posedge => "posedge",
                                Edge::Negedge => "negedge",
                            };
                            format!("{kw} {s}")
                        })
                        .collect();
                    write!(out, " @({})", parts.join(" or ")).unwrap();
                }
            }
            out.push(' ');
            print_stmt(out, body, 1);
        }
        Item::Instance(inst) => {
            write!(out, "{INDENT}{}", inst.module).unwrap();
            if !inst.params.is_empty() {
                let ps: Vec<String> =
                    inst.params.iter().map(|(n, v)| format!(".{n}({})", expr(v))).collect();
                write!(out, " #({})", ps.join(", ")).unwrap();
            }
            write!(out, " {} (", inst.name).unwrap();
            for (i, c) in inst.connections.iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                let e = c.expr.as_ref().map(expr).unwrap_or_default();
                write!(out, "{INDENT}{INDENT}.{}({e})", c.port).unwrap();
            }
            if !inst.connections.is_empty() {
                write!(out, "\n{INDENT}").unwrap();
            }
            out.push_str(");\n");
        }
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str(INDENT);
    }
}

/// Prints `s` starting at the current column; nested lines use `level`.
fn print_stmt(out: &mut String, s: &Stmt, level: usize) {
    match s {
        Stmt::Block { stmts, .. } => {
            out.push_str("begin\n");
            for st in stmts {
                indent(out, level + 1);
                print_stmt(out, st, level + 1);
            }
            indent(out, level);
            out.push_str("end\n");
        }
        Stmt::If { cond, then_branch, else_branch, .. } => {
            write!(out, "if ({}) ", expr(cond)).unwrap();
            // An else would otherwise bind to a nested else-less if.
            let wrap = else_branch.is_some() && dangling(then_branch);
            if wrap {
                out.push_str("begin\n");
                indent(out, level + 1);
                print_stmt(out, then_branch, level + 1);
                indent(out, level);
                out.push_str("end\n");
            } else {
                print_stmt(out, then_branch, level);
            }
            if let Some(e) = else_branch {
                indent(out, level);
                out.push_str("else ");
                print_stmt(out, e, level);
            }
        }
        Stmt::Case { kind, subject, items, default, .. } => {
            writeln!(out, "{} ({})", kind.keyword(), expr(subject)).unwrap();
            for item in items {
                indent(out, level + 1);
                let labels: Vec<String> = item.labels.iter().map(expr).collect();
                write!(out, "{}: ", labels.join(", ")).unwrap();
                print_stmt(out, &item.body, level + 1);
            }
            if let Some(d) = default {
                indent(out, level + 1);
                out.push_str("default: ");
                print_stmt(out, d, level + 1);
            }
            indent(out, level);
            out.push_str("endcase\n");
        }
        Stmt::Blocking { lhs, rhs, .. } => writeln!(out, "{} = {};", expr(lhs), expr(rhs)).unwrap(),
        Stmt::NonBlocking { lhs, rhs, .. } => {
            writeln!(out, "{} <= {};", expr(lhs), expr(rhs)).unwrap()
        }
        Stmt::For { var, init, cond, step, body, .. } => {
            write!(out, "for (int {var} = {}; {}; {var} = {}) ", expr(init), expr(cond), expr(step))
                .unwrap();
            print_stmt(out, body, level);
        }
        Stmt::Null { .. } => out.push_str(";\n"),
    }
}

fn dangling(s: &Stmt) -> bool {
    match s {
        Stmt::If { else_branch: None, .. } => true,
        Stmt::If { else_branch: Some(e), .. } => dangling(e),
        Stmt::For { body, .. } => dangling(body),
        _ => false,
    }
}

/// Renders an expression with the minimum parentheses needed to reparse it.
pub fn expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Ternary { .. } => 1,
        Expr::Binary { op, .. } => op.precedence(),
        _ => u8::MAX,
    }
}

fn write_paren(out: &mut String, e: &Expr, paren: bool) {
    if paren {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Ident { name, .. } => out.push_str(name),
        Expr::Hier { path, .. } => out.push_str(&path.join(".")),
        Expr::Literal { lit, .. } => out.push_str(&literal(lit)),
        Expr::Unary { op, arg, .. } => {
            out.push_str(op.symbol());
            let paren = matches!(**arg, Expr::Unary { .. }) || prec(arg) != u8::MAX;
            write_paren(out, arg, paren);
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let p = op.precedence();
            let right_assoc = *op == BinaryOp::Pow;
            let lp = if right_assoc { prec(lhs) <= p } else { prec(lhs) < p };
            let rp = if right_assoc { prec(rhs) < p } else { prec(rhs) <= p };
            write_paren(out, lhs, lp);
            write!(out, " {} ", op.symbol()).unwrap();
            write_paren(out, rhs, rp);
        }
        Expr::Ternary { cond, then_expr, else_expr, .. } => {
            write_paren(out, cond, prec(cond) == 1);
            out.push_str(" ? ");
            write_expr(out, then_expr);
            out.push_str(" : ");
            write_expr(out, else_expr);
        }
        Expr::Concat { parts, .. } => {
            out.push('{');
            write_list(out, parts);
            out.push('}');
        }
        Expr::Replicate { count, parts, .. } => {
            out.push('{');
            write_expr(out, count);
            out.push('{');
            write_list(out, parts);
            out.push_str("}}");
        }
        Expr::Index { base, index, .. } => {
            write_base(out, base);
            out.push('[');
            write_expr(out, index);
            out.push(']');
        }
        Expr::Range { base, msb, lsb, .. } => {
            write_base(out, base);
            out.push('[');
            write_expr(out, msb);
            out.push(':');
            write_expr(out, lsb);
            out.push(']');
        }
        Expr::IndexedRange { base, start, width, up, .. } => {
            write_base(out, base);
            out.push('[');
            write_expr(out, start);
            out.push_str(if *up { " +: " } else { " -: " });
            write_expr(out, width);
            out.push(']');
        }
        Expr::SysCall { name, args, .. } => {
            out.push_str(name);
            if !args.is_empty() {
                out.push('(');
                write_list(out, args);
                out.push(')');
            }
        }
    }
}

fn write_base(out: &mut String, base: &Expr) {
    let plain = matches!(
        base,
        Expr::Ident { .. }
            | Expr::Hier { .. }
            | Expr::Index { .. }
            | Expr::Range { .. }
            | Expr::IndexedRange { .. }
            | Expr::Concat { .. }
            | Expr::Replicate { .. }
    );
    write_paren(out, base, !plain);
}

fn write_list(out: &mut String, parts: &[Expr]) {
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, p);
    }
}

pub fn literal(lit: &Literal) -> String {
    match lit {
        Literal::Fill(b) => if *b { "'1" } else { "'0" }.to_string(),
        Literal::Str(s) => format!("\"{s}\""),
        Literal::Number { size, signed, base, value, xz_mask } => {
            let Some(base) = base else {
                return value.to_string();
            };
            let mut s = String::new();
            if let Some(n) = size {
                write!(s, "{n}").unwrap();
            } else if *xz_mask == u64::MAX && *value == 0 {
                return "'x".to_string();
            }
            s.push('\'');
            if *signed {
                s.push('s');
            }
            s.push(base.letter());
            s.push_str(&digits(*base, *size, *value, *xz_mask));
            s
        }
    }
}

fn digits(base: Base, size: Option<u32>, value: u64, xz: u64) -> String {
    if base == Base::Decimal {
        return if xz != 0 { "x".to_string() } else { value.to_string() };
    }
    let bits = match base {
        Base::Binary => 1,
        Base::Octal => 3,
        _ => 4,
    };
    let used = 64 - (value | xz).leading_zeros();
    let width = size.unwrap_or(used.max(1));
    let count = width.div_ceil(bits);
    let dmask = (1u64 << bits) - 1;
    let mut s = String::new();
    for i in (0..count).rev() {
        let sh = i * bits;
        let m = xz.checked_shr(sh).unwrap_or(0) & dmask;
        if m != 0 {
            s.push('?');
        } else {
            let d = value.checked_shr(sh).unwrap_or(0) & dmask;
            s.push(char::from_digit(d as u32, 16).unwrap());
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sv::parser::parse_source;

    fn round_trip(src: &str) {
        let a = parse_source(src).unwrap();
        let printed = pretty_print(&a);
        let b = parse_source(&printed).unwrap_or_else(|d| panic!("{printed}\n{d:?}"));
        assert_eq!(a, b, "{printed}");
        assert_eq!(printed, pretty_print(&b));
    }

    #[test]
    fn expressions_keep_structure() {
        round_trip(
            "module m(input logic [7:0] a, b, output logic [7:0] y);
               assign y = (a + b) * 2 - -a ^ ~&b[3:0] | {2{a[1 +: 2]}} & (a > b ? a : b);
             endmodule",
        );
    }

    #[test]
    fn statements_keep_structure() {
        round_trip(
            "module m #(parameter W = 4) (input logic clk_in, input logic [W-1:0] d, output logic [W-1:0] q);
               logic [W-1:0] mem [4];
               always_ff @(posedge clk_in) begin
                 if (d == 0) q <= 'h0; else if (d[0]) q <= d; else q <= '1;
                 casez (d) 4'b1??0: q <= 1; 4'b0001, 4'b0010: ; default: q <= 0; endcase
                 for (int i = 0; i < 4; i++) mem[i] <= d;
               end
             endmodule",
        );
    }

    #[test]
    fn dangling_else_is_disambiguated() {
        let s = Stmt::If {
            cond: Expr::ident("a"),
            then_branch: Box::new(Stmt::If {
                cond: Expr::ident("b"),
                then_branch: Box::new(Stmt::Null { loc: Default::default() }),
                else_branch: None,
                loc: Default::default(),
            }),
            else_branch: Some(Box::new(Stmt::Null { loc: Default::default() })),
            loc: Default::default(),
        };
        let mut out = String::new();
        print_stmt(&mut out, &s, 0);
        assert!(out.starts_with("if (a) begin"));
    }

    #[test]
    fn literal_forms() {
        let lit = |size, base, value, xz| Literal::Number { size, signed: false, base, value, xz_mask: xz };
        assert_eq!(literal(&lit(Some(8), Some(Base::Hex), 0xa5, 0)), "8'ha5");
        assert_eq!(literal(&lit(Some(4), Some(Base::Binary), 0b1000, 0b0101)), "4'b1?0?");
        assert_eq!(literal(&lit(None, None, 42, 0)), "42");
        assert_eq!(literal(&lit(None, Some(Base::Hex), 0, 0)), "'h0");
    }
}
