// SPDX-License-Identifier: Apache-2.0

//! Tokenizer for the SystemVerilog subset.

use serde::{Deserialize, Serialize};

use crate::diag::{Diagnostic, Loc};

/// Reserved words recognised as keywords. Sorted, so lookups can binary search.
pub const KEYWORDS: &[&str] = &[
    "accept_on", "alias", "always", "always_comb", "always_ff", "always_latch", "and", "assert",
    "assign", "assume", "automatic", "before", "begin", "bind", "bins", "binsof", "bit", "break",
    "buf", "bufif0", "bufif1", "byte", "case", "casex", "casez", "cell", "chandle", "checker",
    "class", "clocking", "cmos", "config", "const", "constraint", "context", "continue", "cover",
    "covergroup", "coverpoint", "cross", "deassign", "default", "defparam", "design", "disable",
    "dist", "do", "edge", "else", "end", "endcase", "endchecker", "endclass", "endclocking",
    "endconfig", "endfunction", "endgenerate", "endgroup", "endinterface", "endmodule",
    "endpackage", "endprimitive", "endprogram", "endproperty", "endsequence", "endspecify",
    "endtable", "endtask", "enum", "event", "eventually", "expect", "export", "extends", "extern",
    "final", "first_match", "for", "force", "foreach", "forever", "fork", "forkjoin", "function",
    "generate", "genvar", "global", "highz0", "highz1", "if", "iff", "ifnone", "ignore_bins",
    "illegal_bins", "implements", "implies", "import", "incdir", "include", "initial", "inout",
    "input", "inside", "instance", "int", "integer", "interconnect", "interface", "intersect",
    "join", "join_any", "join_none", "large", "let", "liblist", "library", "local", "localparam",
    "logic", "longint", "macromodule", "matches", "medium", "modport", "module", "nand", "negedge",
    "nettype", "new", "nexttime", "nmos", "nor", "noshowcancelled", "not", "notif0", "notif1",
    "null", "or", "output", "package", "packed", "parameter", "pmos", "posedge", "primitive",
    "priority", "program", "property", "protected", "pull0", "pull1", "pulldown", "pullup",
    "pulsestyle_ondetect", "pulsestyle_onevent", "pure", "rand", "randc", "randcase",
    "randsequence", "rcmos", "real", "realtime", "ref", "reg", "reject_on", "release", "repeat",
    "restrict", "return", "rnmos", "rpmos", "rtran", "rtranif0", "rtranif1", "s_always",
    "s_eventually", "s_nexttime", "s_until", "s_until_with", "scalared", "sequence", "shortint",
    "shortreal", "showcancelled", "signed", "small", "soft", "solve", "specify", "specparam",
    "static", "string", "strong", "strong0", "strong1", "struct", "super", "supply0", "supply1",
    "sync_accept_on", "sync_reject_on", "table", "tagged", "task", "this", "throughout", "time",
    "timeprecision", "timeunit", "tran", "tranif0", "tranif1", "tri", "tri0", "tri1", "triand",
    "trior", "trireg", "type", "typedef", "union", "unique", "unique0", "unsigned", "until",
    "until_with", "untyped", "use", "uwire", "var", "vectored", "virtual", "void", "wait",
    "wait_order", "wand", "weak", "weak0", "weak1", "while", "wildcard", "wire", "with", "within",
    "wor", "xnor", "xor",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    /// Plain, escaped-free identifiers and `$system` names.
    Identifier,
    /// A literal with an explicit size prefix, e.g. `8'b0`.
    SizedLiteral,
    /// Plain decimals, `'h1`, and the fill literals `'0`/`'1`.
    UnsizedLiteral,
    StringLiteral,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub col: u32,
}

impl Token {
    pub fn loc(&self) -> Loc {
        Loc::new(self.line, self.col)
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }

    pub fn is_op(&self, text: &str) -> bool {
        self.kind == TokenKind::Operator && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.kind == TokenKind::Punctuation && self.text == text
    }
}

/// Longest-first so that maximal munch works with a simple prefix scan.
const OPERATORS: &[&str] = &[
    "<<<=", ">>>=", "===", "!==", "<<<", ">>>", "|->", "|=>", "<<=", ">>=", "==", "!=", "<=", ">=",
    "&&", "||", "<<", ">>", "**", "->", "+:", "-:", "~&", "~|", "~^", "^~", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "::", "##", "+", "-", "*", "/", "%", "&", "|", "^", "~",
    "!", "<", ">", "=", "?",
];

const PUNCTUATION: &[char] = &['(', ')', '[', ']', '{', '}', ';', ',', '.', '@', '#', ':'];

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0, line: 1, col: 1, _src: src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek_at(i) == Some(c))
    }

    fn loc(&self) -> Loc {
        Loc::new(self.line, self.col)
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

fn is_base_digit(c: char) -> bool {
    c.is_ascii_hexdigit() || matches!(c, '_' | 'x' | 'X' | 'z' | 'Z' | '?')
}

/// Tokenizes `source`. Never fails: problems are reported as diagnostics and
/// scanning resumes after the offending character.
pub fn tokenize(source: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut cur = Cursor::new(source);
    let mut tokens = Vec::new();
    let mut diags = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let start = cur.loc();
        let push = |tokens: &mut Vec<Token>, kind, text: String| {
            tokens.push(Token { kind, text, line: start.line, col: start.col });
        };

        if cur.starts_with("//") {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if cur.starts_with("/*") {
            cur.bump();
            cur.bump();
            let mut closed = false;
            while cur.peek().is_some() {
                if cur.starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    closed = true;
                    break;
                }
                cur.bump();
            }
            if !closed {
                diags.push(Diagnostic::error(start, "unterminated block comment `/*`"));
            }
            continue;
        }
        if c == '"' {
            cur.bump();
            let mut text = String::from('"');
            let mut closed = false;
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
                text.push(c);
                if c == '\\' {
                    if let Some(n) = cur.bump() {
                        text.push(n);
                    }
                    continue;
                }
                if c == '"' {
                    closed = true;
                    break;
                }
            }
            if closed {
                push(&mut tokens, TokenKind::StringLiteral, text);
            } else {
                diags.push(Diagnostic::error(start, "unterminated string literal `\"`"));
            }
            continue;
        }
        if is_ident_start(c) || (c == '$' && cur.peek_at(1).is_some_and(is_ident_start)) {
            let mut text = String::new();
            text.push(cur.bump().unwrap());
            while let Some(c) = cur.peek().filter(|&c| is_ident_char(c)) {
                text.push(c);
                cur.bump();
            }
            let kind = if is_keyword(&text) { TokenKind::Keyword } else { TokenKind::Identifier };
            push(&mut tokens, kind, text);
            continue;
        }
        if c.is_ascii_digit() {
            let mut text = String::new();
            while let Some(c) = cur.peek().filter(|c| c.is_ascii_digit() || *c == '_') {
                text.push(c);
                cur.bump();
            }
            if cur.peek() == Some('\'') && based_literal_follows(&cur, 1) {
                cur.bump();
                text.push('\'');
                scan_based_tail(&mut cur, &mut text);
                push(&mut tokens, TokenKind::SizedLiteral, text);
            } else {
                push(&mut tokens, TokenKind::UnsizedLiteral, text);
            }
            continue;
        }
        if c == '\'' {
            if matches!(cur.peek_at(1), Some('0' | '1' | 'x' | 'X' | 'z' | 'Z'))
                && !cur.peek_at(2).is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
            {
                let mut text = String::new();
                text.push(cur.bump().unwrap());
                text.push(cur.bump().unwrap());
                push(&mut tokens, TokenKind::UnsizedLiteral, text);
                continue;
            }
            if based_literal_follows(&cur, 1) {
                cur.bump();
                let mut text = String::from('\'');
                scan_based_tail(&mut cur, &mut text);
                push(&mut tokens, TokenKind::UnsizedLiteral, text);
                continue;
            }
            cur.bump();
            diags.push(Diagnostic::error(start, "stray `'` is not a valid literal"));
            continue;
        }
        if let Some(op) = OPERATORS.iter().find(|op| cur.starts_with(op)) {
            for _ in 0..op.chars().count() {
                cur.bump();
            }
            push(&mut tokens, TokenKind::Operator, (*op).to_string());
            continue;
        }
        if PUNCTUATION.contains(&c) {
            cur.bump();
            push(&mut tokens, TokenKind::Punctuation, c.to_string());
            continue;
        }
        cur.bump();
        diags.push(Diagnostic::error(start, format!("unexpected character `{c}`")));
    }
    (tokens, diags)
}

/// True when the text at `off` (just past a `'`) is `[sS]?[bBoOdDhH]` followed by a digit.
fn based_literal_follows(cur: &Cursor<'_>, off: usize) -> bool {
    let mut i = off;
    if matches!(cur.peek_at(i), Some('s' | 'S')) {
        i += 1;
    }
    if !matches!(cur.peek_at(i), Some('b' | 'B' | 'o' | 'O' | 'd' | 'D' | 'h' | 'H')) {
        return false;
    }
    i += 1;
    while cur.peek_at(i) == Some(' ') {
        i += 1;
    }
    cur.peek_at(i).is_some_and(is_base_digit)
}

fn scan_based_tail(cur: &mut Cursor<'_>, text: &mut String) {
    if matches!(cur.peek(), Some('s' | 'S')) {
        text.push(cur.bump().unwrap());
    }
    text.push(cur.bump().unwrap());
    while cur.peek() == Some(' ') {
        cur.bump();
    }
    while let Some(c) = cur.peek().filter(|&c| is_base_digit(c)) {
        text.push(c);
        cur.bump();
    }
}
