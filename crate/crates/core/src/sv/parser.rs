// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser producing a [`SourceUnit`].

use crate::diag::{Diagnostic, Loc};
use crate::sv::ast::*;
use crate::sv::token::{tokenize, Token, TokenKind};

type PResult<T> = Result<T, Diagnostic>;

/// Parses a token stream. Unsupported constructs are reported with
/// [`Severity::Unsupported`](crate::diag::Severity) and skipped so that all of
/// them are reported; the first syntax error stops parsing.
pub fn parse(tokens: &[Token]) -> Result<SourceUnit, Vec<Diagnostic>> {
    let mut p = Parser { toks: tokens, pos: 0, diags: Vec::new() };
    match p.source_unit() {
        Ok(unit) if p.diags.is_empty() => Ok(unit),
        Ok(_) => Err(p.diags),
        Err(d) => {
            p.diags.push(d);
            Err(p.diags)
        }
    }
}

/// Tokenizes and parses `source` in one step.
pub fn parse_source(source: &str) -> Result<SourceUnit, Vec<Diagnostic>> {
    let (tokens, diags) = tokenize(source);
    if !diags.is_empty() {
        return Err(diags);
    }
    parse(&tokens)
}

/// Parses a standalone expression; used by the property frontend.
pub fn parse_expression(tokens: &[Token]) -> Result<(Expr, usize), Diagnostic> {
    let mut p = Parser { toks: tokens, pos: 0, diags: Vec::new() };
    let e = p.expr()?;
    Ok((e, p.pos))
}

pub(crate) struct Parser<'t> {
    pub(crate) toks: &'t [Token],
    pub(crate) pos: usize,
    diags: Vec<Diagnostic>,
}

const UNSUPPORTED_BLOCKS: &[(&str, &str)] = &[
    ("class", "endclass"),
    ("interface", "endinterface"),
    ("program", "endprogram"),
    ("package", "endpackage"),
    ("function", "endfunction"),
    ("task", "endtask"),
    ("generate", "endgenerate"),
    ("property", "endproperty"),
    ("sequence", "endsequence"),
    ("clocking", "endclocking"),
    ("covergroup", "endgroup"),
    ("specify", "endspecify"),
    ("primitive", "endprimitive"),
    ("checker", "endchecker"),
    ("config", "endconfig"),
];

impl<'t> Parser<'t> {
    pub(crate) fn new(toks: &'t [Token]) -> Self {
        Parser { toks, pos: 0, diags: Vec::new() }
    }

    pub(crate) fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, off: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + off)
    }

    fn eof_loc(&self) -> Loc {
        self.toks.last().map(|t| Loc::new(t.line, t.col)).unwrap_or(Loc::new(1, 1))
    }

    pub(crate) fn loc(&self) -> Loc {
        self.peek().map(Token::loc).unwrap_or_else(|| self.eof_loc())
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn at_kw(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    pub(crate) fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    pub(crate) fn at_op(&self, op: &str) -> bool {
        self.peek().is_some_and(|t| t.is_op(op))
    }

    pub(crate) fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            Some(t) => format!("`{}`", t.text),
            None => "end of input".to_string(),
        }
    }

    pub(crate) fn expected(&self, what: &str) -> Diagnostic {
        Diagnostic::error(self.loc(), format!("expected {what}, found {}", self.describe()))
    }


    pub(crate) fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{p}`")))
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{op}`")))
        }
    }

    pub(crate) fn ident(&mut self) -> PResult<(String, Loc)> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier && !t.text.starts_with('$') => {
                self.pos += 1;
                Ok((t.text.clone(), t.loc()))
            }
            _ => Err(self.expected("identifier")),
        }
    }

    fn unsupported(&mut self, loc: Loc, what: impl Into<String>) {
        self.diags.push(Diagnostic::unsupported(loc, what));
    }

    /// Skips past the matching `end_kw`, honouring nesting of `start_kw`.
    fn skip_block(&mut self, start_kw: &str, end_kw: &str) -> PResult<()> {
        let loc = self.loc();
        let mut depth = 0usize;
        while let Some(t) = self.bump() {
            if t.is_keyword(start_kw) {
                depth += 1;
            } else if t.is_keyword(end_kw) {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    if self.eat_punct(":") {
                        self.ident()?;
                    }
                    return Ok(());
                }
            }
        }
        Err(Diagnostic::error(loc, format!("missing `{end_kw}`")))
    }

    /// Skips to just past the next `;` at brace/paren depth zero.
    fn skip_to_semi(&mut self) -> PResult<()> {
        let loc = self.loc();
        let mut depth = 0i32;
        while let Some(t) = self.bump() {
            if t.kind == TokenKind::Punctuation {
                match t.text.as_str() {
                    "(" | "{" | "[" => depth += 1,
                    ")" | "}" | "]" => depth -= 1,
                    ";" if depth <= 0 => return Ok(()),
                    _ => {}
                }
            }
        }
        Err(Diagnostic::error(loc, "missing `;`"))
    }

    /// Skips a statement (a `begin`/`end` block or up to `;`).
    fn skip_statement(&mut self) -> PResult<()> {
        if self.at_kw("begin") {
            self.skip_block("begin", "end")
        } else if self.at_kw("fork") {
            self.skip_block("fork", "join")
        } else {
            self.skip_to_semi()
        }
    }

    fn source_unit(&mut self) -> PResult<SourceUnit> {
        let mut unit = SourceUnit::default();
        while let Some(t) = self.peek() {
            if t.is_keyword("module") || t.is_keyword("macromodule") {
                unit.modules.push(self.module()?);
            } else if let Some((s, e)) =
                UNSUPPORTED_BLOCKS.iter().find(|(s, _)| t.is_keyword(s))
            {
                self.unsupported(t.loc(), format!("`{s}` declarations are not supported"));
                self.skip_block(s, e)?;
            } else if t.is_punct(";") {
                self.pos += 1;
            } else if t.is_keyword("import") || t.is_keyword("typedef") {
                self.unsupported(t.loc(), format!("`{}` is not supported", t.text));
                self.skip_to_semi()?;
            } else {
                return Err(self.expected("`module`"));
            }
        }
        Ok(unit)
    }

    fn module(&mut self) -> PResult<ModuleDecl> {
        let loc = self.loc();
        self.bump();
        let (name, _) = self.ident()?;
        let mut params = Vec::new();
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            if !self.at_punct(")") {
                loop {
                    params.push(self.param_assignment(false, true)?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        let mut ports = Vec::new();
        if self.eat_punct("(") {
            if !self.at_punct(")") {
                ports = self.ansi_ports()?;
            }
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        let mut items = Vec::new();
        loop {
            match self.peek() {
                None => return Err(Diagnostic::error(self.eof_loc(), "missing `endmodule`")),
                Some(t) if t.is_keyword("endmodule") => {
                    self.pos += 1;
                    if self.eat_punct(":") {
                        self.ident()?;
                    }
                    break;
                }
                Some(_) => self.item(&mut items)?,
            }
        }
        Ok(ModuleDecl { name, params, ports, items, loc })
    }

    /// One entry of a `#(...)` header or a `parameter a = 1, b = 2` list.
    fn param_assignment(&mut self, local: bool, header: bool) -> PResult<ParamDecl> {
        let mut local = local;
        if header {
            if self.eat_kw("localparam") {
                local = true;
            } else {
                self.eat_kw("parameter");
            }
        }
        self.param_type()?;
        let range = self.opt_range()?;
        let (name, loc) = self.ident()?;
        self.expect_op("=")?;
        let value = self.expr()?;
        Ok(ParamDecl { local, range, name, value, loc })
    }

    fn param_type(&mut self) -> PResult<()> {
        for kw in ["int", "integer", "logic", "bit", "reg"] {
            if self.eat_kw(kw) {
                break;
            }
        }
        if self.at_kw("signed") {
            let loc = self.loc();
            self.unsupported(loc, "signed types are not supported");
            self.pos += 1;
        }
        self.eat_kw("unsigned");
        Ok(())
    }

    fn opt_range(&mut self) -> PResult<Option<Range>> {
        if !self.at_punct("[") {
            return Ok(None);
        }
        self.pos += 1;
        let msb = self.expr()?;
        self.expect_punct(":")?;
        let lsb = self.expr()?;
        self.expect_punct("]")?;
        Ok(Some(Range { msb, lsb }))
    }

    fn net_kind(&mut self) -> NetKind {
        let kinds = [
            ("logic", NetKind::Logic),
            ("reg", NetKind::Reg),
            ("wire", NetKind::Wire),
            ("bit", NetKind::Bit),
            ("integer", NetKind::Integer),
            ("int", NetKind::Int),
        ];
        for (kw, k) in kinds {
            if self.eat_kw(kw) {
                if k == NetKind::Wire {
                    // `wire logic` is legal and means the same thing here.
                    self.eat_kw("logic");
                }
                return k;
            }
        }
        NetKind::Implicit
    }

    fn signedness(&mut self) -> bool {
        if self.at_kw("signed") {
            let loc = self.loc();
            self.unsupported(loc, "signed types are not supported");
            self.pos += 1;
            return true;
        }
        self.eat_kw("unsigned");
        false
    }

    fn ansi_ports(&mut self) -> PResult<Vec<Port>> {
        let mut ports: Vec<Port> = Vec::new();
        loop {
            let loc = self.loc();
            let direction = if self.eat_kw("input") {
                Some(Direction::Input)
            } else if self.eat_kw("output") {
                Some(Direction::Output)
            } else if self.eat_kw("inout") {
                Some(Direction::Inout)
            } else {
                None
            };
            let port = match direction {
                Some(direction) => {
                    let kind = self.net_kind();
                    let signed = self.signedness();
                    let range = self.opt_range()?;
                    let (name, nloc) = self.ident()?;
                    Port { direction, kind, signed, range, name, loc: nloc }
                }
                None => {
                    let Some(prev) = ports.last() else {
                        if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
                            self.unsupported(loc, "non-ANSI port lists are not supported");
                            while !self.at_punct(")") && self.peek().is_some() {
                                self.pos += 1;
                            }
                            return Ok(ports);
                        }
                        return Err(self.expected("port direction"));
                    };
                    let (name, nloc) = self.ident()?;
                    Port { name, loc: nloc, ..prev.clone() }
                }
            };
            if self.at_punct("[") {
                self.unsupported(self.loc(), "unpacked port arrays are not supported");
                self.opt_range()?;
            }
            ports.push(port);
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(ports)
    }

    fn item(&mut self, items: &mut Vec<Item>) -> PResult<()> {
        let t = self.peek().expect("caller checked");
        let loc = t.loc();
        if t.kind == TokenKind::Keyword {
            match t.text.as_str() {
                "parameter" | "localparam" => {
                    let local = t.text == "localparam";
                    self.pos += 1;
                    loop {
                        items.push(Item::Param(self.param_assignment(local, false)?));
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    return self.expect_punct(";");
                }
                "logic" | "reg" | "wire" | "bit" | "integer" | "int" => {
                    items.push(Item::Net(self.net_decl()?));
                    return Ok(());
                }
                "assign" => {
                    self.pos += 1;
                    loop {
                        let aloc = self.loc();
                        let lhs = self.lvalue()?;
                        self.expect_op("=")?;
                        let rhs = self.expr()?;
                        items.push(Item::Assign { lhs, rhs, loc: aloc });
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    return self.expect_punct(";");
                }
                "always" | "always_ff" | "always_comb" => {
                    items.push(self.always()?);
                    return Ok(());
                }
                "always_latch" => {
                    self.unsupported(loc, "`always_latch` is not supported");
                    self.pos += 1;
                    return self.skip_statement();
                }
                "initial" | "final" => {
                    self.unsupported(loc, format!("`{}` blocks are not supported", t.text));
                    self.pos += 1;
                    return self.skip_statement();
                }
                "genvar" | "typedef" | "import" | "assert" | "assume" | "cover" | "defparam"
                | "enum" | "struct" | "byte" | "shortint" | "longint" | "real" | "time"
                | "string" | "event" | "supply0" | "supply1" | "tri" | "var" | "automatic"
                | "static" => {
                    self.unsupported(loc, format!("`{}` is not supported", t.text));
                    return self.skip_to_semi();
                }
                "input" | "output" | "inout" => {
                    self.unsupported(loc, "non-ANSI port declarations are not supported");
                    return self.skip_to_semi();
                }
                _ => {}
            }
            if let Some((s, e)) = UNSUPPORTED_BLOCKS.iter().find(|(s, _)| t.is_keyword(s)) {
                self.unsupported(loc, format!("`{s}` is not supported"));
                return self.skip_block(s, e);
            }
            return Err(Diagnostic::error(loc, format!("unexpected keyword `{}` in module body", t.text)));
        }
        if t.is_punct(";") {
            self.pos += 1;
            return Ok(());
        }
        if t.kind == TokenKind::Identifier && !t.text.starts_with('$') {
            // `mod [#(...)] inst (...)`; a bare `type name;` is an unsupported user type.
            let next = self.peek_at(1);
            if next.is_some_and(|n| n.is_punct("#"))
                || (next.is_some_and(|n| n.kind == TokenKind::Identifier)
                    && self.peek_at(2).is_some_and(|n| n.is_punct("(")))
            {
                items.push(Item::Instance(self.instance()?));
                return Ok(());
            }
            if next.is_some_and(|n| n.kind == TokenKind::Identifier) {
                self.unsupported(loc, format!("user-defined type `{}` is not supported", t.text));
                return self.skip_to_semi();
            }
        }
        if t.kind == TokenKind::Identifier && t.text.starts_with('$') {
            self.unsupported(loc, format!("system task `{}` is not supported", t.text));
            return self.skip_to_semi();
        }
        Err(Diagnostic::error(loc, format!("unexpected `{}` in module body", t.text)))
    }

    fn net_decl(&mut self) -> PResult<NetDecl> {
        let loc = self.loc();
        let kind = self.net_kind();
        let signed = self.signedness();
        let range = self.opt_range()?;
        let mut vars = Vec::new();
        loop {
            let (name, vloc) = self.ident()?;
            let mut unpacked = Vec::new();
            while self.eat_punct("[") {
                let first = self.expr()?;
                if self.eat_punct(":") {
                    let lsb = self.expr()?;
                    unpacked.push(Range { msb: first, lsb });
                } else {
                    // `[N]` is shorthand for `[0:N-1]`.
                    let l = first.loc();
                    unpacked.push(Range {
                        msb: Expr::number(0),
                        lsb: Expr::Binary {
                            op: BinaryOp::Sub,
                            lhs: Box::new(first),
                            rhs: Box::new(Expr::number(1)),
                            loc: l,
                        },
                    });
                }
                self.expect_punct("]")?;
            }
            let init = if self.eat_op("=") { Some(self.expr()?) } else { None };
            vars.push(VarDecl { name, unpacked, init, loc: vloc });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(NetDecl { kind, signed, range, vars, loc })
    }

    fn always(&mut self) -> PResult<Item> {
        let loc = self.loc();
        let kw = self.bump().unwrap();
        let kind = match kw.text.as_str() {
            "always_ff" => AlwaysKind::AlwaysFf,
            "always_comb" => AlwaysKind::AlwaysComb,
            _ => AlwaysKind::Always,
        };
        let sensitivity = if kind == AlwaysKind::AlwaysComb {
            Sensitivity::None
        } else {
            self.expect_punct("@")?;
            self.event_control()?
        };
        let body = self.stmt()?;
        Ok(Item::Always { kind, sensitivity, body, loc })
    }

    fn event_control(&mut self) -> PResult<Sensitivity> {
        if self.eat_op("*") {
            return Ok(Sensitivity::Star);
        }
        self.expect_punct("(")?;
        if self.eat_op("*") {
            self.expect_punct(")")?;
            return Ok(Sensitivity::Star);
        }
        let mut edges = Vec::new();
        let mut signals = Vec::new();
        loop {
            let edge = if self.eat_kw("posedge") {
                Some(Edge::Posedge)
            } else if self.eat_kw("negedge") {
                Some(Edge::Negedge)
            } else {
                None
            };
            let (name, _) = self.ident()?;
            match edge {
                Some(e) => edges.push((e, name)),
                None => signals.push(name),
            }
            if !(self.eat_kw("or") || self.eat_punct(",")) {
                break;
            }
        }
        self.expect_punct(")")?;
        match (edges.is_empty(), signals.is_empty()) {
            (false, true) => Ok(Sensitivity::Edges(edges)),
            (true, false) => Ok(Sensitivity::Signals(signals)),
            _ => Err(Diagnostic::unsupported(self.loc(), "mixed edge and level sensitivity")),
        }
    }

    fn instance(&mut self) -> PResult<Instance> {
        let loc = self.loc();
        let (module, _) = self.ident()?;
        let mut params = Vec::new();
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            if !self.at_punct(")") {
                loop {
                    if !self.at_punct(".") {
                        let l = self.loc();
                        self.unsupported(l, "positional parameter overrides are not supported");
                        self.skip_to_semi()?;
                        return Ok(Instance { module, params, name: String::new(), connections: vec![], loc });
                    }
                    self.pos += 1;
                    let (pname, _) = self.ident()?;
                    self.expect_punct("(")?;
                    let v = self.expr()?;
                    self.expect_punct(")")?;
                    params.push((pname, v));
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        let (name, _) = self.ident()?;
        self.expect_punct("(")?;
        let mut connections = Vec::new();
        if !self.at_punct(")") {
            loop {
                let cloc = self.loc();
                if !self.eat_punct(".") {
                    self.unsupported(cloc, "positional port connections are not supported");
                    self.skip_to_semi()?;
                    return Ok(Instance { module, params, name, connections, loc });
                }
                if self.eat_op("*") {
                    self.unsupported(cloc, "`.*` wildcard connections are not supported");
                } else {
                    let (port, _) = self.ident()?;
                    let expr = if self.eat_punct("(") {
                        let e = if self.at_punct(")") { None } else { Some(self.expr()?) };
                        self.expect_punct(")")?;
                        e
                    } else {
                        Some(Expr::Ident { name: port.clone(), loc: cloc })
                    };
                    connections.push(Connection { port, expr, loc: cloc });
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct(";")?;
        Ok(Instance { module, params, name, connections, loc })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        let Some(t) = self.peek() else {
            return Err(self.expected("statement"));
        };
        if t.is_keyword("unique") || t.is_keyword("unique0") || t.is_keyword("priority") {
            self.pos += 1;
            if !(self.at_kw("if") || self.at_kw("case") || self.at_kw("casez") || self.at_kw("casex")) {
                return Err(self.expected("`if` or `case`"));
            }
            return self.stmt();
        }
        if t.kind == TokenKind::Keyword {
            match t.text.as_str() {
                "begin" => {
                    self.pos += 1;
                    if self.eat_punct(":") {
                        self.ident()?;
                    }
                    let mut stmts = Vec::new();
                    while !self.at_kw("end") {
                        if self.peek().is_none() {
                            return Err(Diagnostic::error(loc, "`begin` without matching `end`"));
                        }
                        if let Some(s) = self.stmt_or_skip()? {
                            stmts.push(s);
                        }
                    }
                    self.pos += 1;
                    if self.eat_punct(":") {
                        self.ident()?;
                    }
                    return Ok(Stmt::Block { stmts, loc });
                }
                "if" => {
                    self.pos += 1;
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let then_branch = Box::new(self.stmt()?);
                    let else_branch =
                        if self.eat_kw("else") { Some(Box::new(self.stmt()?)) } else { None };
                    return Ok(Stmt::If { cond, then_branch, else_branch, loc });
                }
                "case" | "casez" | "casex" => return self.case_stmt(),
                "for" => return self.for_stmt(),
                _ => {}
            }
        }
        if t.is_punct(";") {
            self.pos += 1;
            return Ok(Stmt::Null { loc });
        }
        self.assignment_stmt()
    }

    /// Parses a statement, or reports and skips an unsupported one.
    fn stmt_or_skip(&mut self) -> PResult<Option<Stmt>> {
        let t = self.peek().expect("caller checked");
        let loc = t.loc();
        let unsupported_kw = [
            "while", "repeat", "forever", "do", "foreach", "fork", "wait", "disable", "return",
            "break", "continue", "assert", "assume", "cover", "force", "release",
        ];
        if t.kind == TokenKind::Keyword && unsupported_kw.contains(&t.text.as_str()) {
            self.unsupported(loc, format!("`{}` statements are not supported", t.text));
            self.pos += 1;
            if t.text == "fork" {
                self.pos -= 1;
                self.skip_block("fork", "join")?;
            } else if t.text == "do" || t.text == "forever" || t.text == "repeat" || t.text == "while" {
                if self.at_punct("(") {
                    self.skip_parens()?;
                }
                self.skip_statement()?;
            } else {
                self.skip_to_semi()?;
            }
            return Ok(None);
        }
        if t.kind == TokenKind::Keyword
            && ["logic", "reg", "int", "integer", "bit", "automatic"].contains(&t.text.as_str())
        {
            self.unsupported(loc, "declarations inside procedural blocks are not supported");
            self.skip_to_semi()?;
            return Ok(None);
        }
        if t.kind == TokenKind::Identifier && t.text.starts_with('$') {
            self.unsupported(loc, format!("system task `{}` is not supported", t.text));
            self.skip_to_semi()?;
            return Ok(None);
        }
        if t.is_punct("#") {
            self.unsupported(loc, "delay controls are not supported");
            self.pos += 1;
            self.primary()?;
            return Ok(None);
        }
        self.stmt().map(Some)
    }

    fn skip_parens(&mut self) -> PResult<()> {
        let loc = self.loc();
        let mut depth = 0i32;
        while let Some(t) = self.bump() {
            if t.is_punct("(") {
                depth += 1;
            } else if t.is_punct(")") {
                depth -= 1;
                if depth == 0 {
                    return Ok(());
                }
            }
        }
        Err(Diagnostic::error(loc, "unbalanced parentheses"))
    }

    fn case_stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        let kw = self.bump().unwrap();
        let kind = match kw.text.as_str() {
            "casez" => CaseKind::Casez,
            "casex" => CaseKind::Casex,
            _ => CaseKind::Case,
        };
        self.expect_punct("(")?;
        let subject = self.expr()?;
        self.expect_punct(")")?;
        if self.at_kw("inside") {
            let l = self.loc();
            return Err(Diagnostic::unsupported(l, "`case ... inside` is not supported"));
        }
        let mut items = Vec::new();
        let mut default = None;
        loop {
            if self.eat_kw("endcase") {
                break;
            }
            if self.peek().is_none() {
                return Err(Diagnostic::error(loc, "`case` without matching `endcase`"));
            }
            if self.eat_kw("default") {
                self.eat_punct(":");
                let body = self.stmt()?;
                if default.is_some() {
                    return Err(Diagnostic::error(body.loc(), "duplicate `default` in case"));
                }
                default = Some(Box::new(body));
                continue;
            }
            let mut labels = vec![self.expr()?];
            while self.eat_punct(",") {
                labels.push(self.expr()?);
            }
            self.expect_punct(":")?;
            let body = self.stmt()?;
            items.push(CaseItem { labels, body });
        }
        Ok(Stmt::Case { kind, subject, items, default, loc })
    }

    fn for_stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        self.pos += 1;
        self.expect_punct("(")?;
        if !(self.eat_kw("int") || self.eat_kw("integer") || self.eat_kw("genvar")) {
            self.eat_kw("automatic");
        }
        let (var, _) = self.ident()?;
        self.expect_op("=")?;
        let init = self.expr()?;
        self.expect_punct(";")?;
        let cond = self.expr()?;
        self.expect_punct(";")?;
        let step = self.for_step(&var)?;
        self.expect_punct(")")?;
        let body = Box::new(self.stmt()?);
        Ok(Stmt::For { var, init, cond, step, body, loc })
    }

    /// Normalises `i++`, `++i`, `i += e` and `i = e` to the new value of `i`.
    fn for_step(&mut self, var: &str) -> PResult<Expr> {
        let loc = self.loc();
        let v = || Box::new(Expr::Ident { name: var.to_string(), loc });
        let one = || Box::new(Expr::number(1));
        if self.eat_op("++") || self.eat_op("--") {
            let dec = self.toks[self.pos - 1].text == "--";
            let (name, _) = self.ident()?;
            if name != var {
                return Err(Diagnostic::error(loc, "loop step must update the loop variable"));
            }
            let op = if dec { BinaryOp::Sub } else { BinaryOp::Add };
            return Ok(Expr::Binary { op, lhs: v(), rhs: one(), loc });
        }
        let (name, _) = self.ident()?;
        if name != var {
            return Err(Diagnostic::error(loc, "loop step must update the loop variable"));
        }
        if self.eat_op("++") {
            return Ok(Expr::Binary { op: BinaryOp::Add, lhs: v(), rhs: one(), loc });
        }
        if self.eat_op("--") {
            return Ok(Expr::Binary { op: BinaryOp::Sub, lhs: v(), rhs: one(), loc });
        }
        if self.eat_op("+=") {
            return Ok(Expr::Binary { op: BinaryOp::Add, lhs: v(), rhs: Box::new(self.expr()?), loc });
        }
        if self.eat_op("-=") {
            return Ok(Expr::Binary { op: BinaryOp::Sub, lhs: v(), rhs: Box::new(self.expr()?), loc });
        }
        self.expect_op("=")?;
        self.expr()
    }

    fn assignment_stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        let lhs = self.lvalue()?;
        let compound = [
            ("+=", BinaryOp::Add),
            ("-=", BinaryOp::Sub),
            ("*=", BinaryOp::Mul),
            ("&=", BinaryOp::BitAnd),
            ("|=", BinaryOp::BitOr),
            ("^=", BinaryOp::BitXor),
            ("<<=", BinaryOp::Shl),
            (">>=", BinaryOp::Shr),
        ];
        let stmt = if self.eat_op("=") {
            Stmt::Blocking { lhs, rhs: self.expr()?, loc }
        } else if self.eat_op("<=") {
            Stmt::NonBlocking { lhs, rhs: self.expr()?, loc }
        } else if self.eat_op("++") || self.eat_op("--") {
            let op = if self.toks[self.pos - 1].text == "++" { BinaryOp::Add } else { BinaryOp::Sub };
            let rhs = Expr::Binary { op, lhs: Box::new(lhs.clone()), rhs: Box::new(Expr::number(1)), loc };
            Stmt::Blocking { lhs, rhs, loc }
        } else if let Some((_, op)) = compound.iter().find(|(s, _)| self.at_op(s)) {
            self.pos += 1;
            let r = self.expr()?;
            let rhs = Expr::Binary { op: *op, lhs: Box::new(lhs.clone()), rhs: Box::new(r), loc };
            Stmt::Blocking { lhs, rhs, loc }
        } else {
            return Err(self.expected("`=` or `<=`"));
        };
        self.expect_punct(";")?;
        Ok(stmt)
    }

    fn lvalue(&mut self) -> PResult<Expr> {
        if self.at_punct("{") {
            return self.primary();
        }
        let (name, loc) = self.ident()?;
        let base = Expr::Ident { name, loc };
        self.selects(base)
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.at_op("?") {
            let loc = self.loc();
            self.pos += 1;
            let then_expr = self.expr()?;
            self.expect_punct(":")?;
            let else_expr = self.expr()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then_expr: Box::new(then_expr),
                else_expr: Box::new(else_expr),
                loc,
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let Some(t) = self.peek() else { break };
            if t.kind != TokenKind::Operator {
                break;
            }
            let Some(op) = BinaryOp::from_symbol(&t.text) else { break };
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let loc = t.loc();
            self.pos += 1;
            let next_min = if op == BinaryOp::Pow { prec } else { prec + 1 };
            let rhs = self.binary(next_min)?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), loc };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let ops = [
            ("+", UnaryOp::Plus),
            ("-", UnaryOp::Neg),
            ("!", UnaryOp::LogNot),
            ("~", UnaryOp::BitNot),
            ("&", UnaryOp::RedAnd),
            ("~&", UnaryOp::RedNand),
            ("|", UnaryOp::RedOr),
            ("~|", UnaryOp::RedNor),
            ("^", UnaryOp::RedXor),
            ("~^", UnaryOp::RedXnor),
            ("^~", UnaryOp::RedXnor),
        ];
        if let Some((_, op)) = ops.iter().find(|(s, _)| self.at_op(s)) {
            self.pos += 1;
            let arg = self.unary()?;
            return Ok(Expr::Unary { op: *op, arg: Box::new(arg), loc });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let Some(t) = self.peek() else {
            return Err(self.expected("expression"));
        };
        let base = match t.kind {
            TokenKind::SizedLiteral | TokenKind::UnsizedLiteral => {
                self.pos += 1;
                Expr::Literal { lit: decode_literal(t)?, loc }
            }
            TokenKind::StringLiteral => {
                self.pos += 1;
                let inner = t.text[1..t.text.len() - 1].to_string();
                Expr::Literal { lit: Literal::Str(inner), loc }
            }
            TokenKind::Identifier if t.text.starts_with('$') => {
                self.pos += 1;
                let mut args = Vec::new();
                if self.eat_punct("(") {
                    if !self.at_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                }
                Expr::SysCall { name: t.text.clone(), args, loc }
            }
            TokenKind::Identifier => {
                self.pos += 1;
                let mut path = vec![t.text.clone()];
                while self.at_punct(".")
                    && self.peek_at(1).is_some_and(|n| n.kind == TokenKind::Identifier)
                {
                    self.pos += 1;
                    path.push(self.bump().unwrap().text.clone());
                }
                if path.len() == 1 {
                    Expr::Ident { name: path.pop().unwrap(), loc }
                } else {
                    Expr::Hier { path, loc }
                }
            }
            TokenKind::Punctuation if t.text == "(" => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_punct(")")?;
                e
            }
            TokenKind::Punctuation if t.text == "{" => {
                self.pos += 1;
                let first = self.expr()?;
                if self.eat_punct("{") {
                    let mut parts = vec![self.expr()?];
                    while self.eat_punct(",") {
                        parts.push(self.expr()?);
                    }
                    self.expect_punct("}")?;
                    self.expect_punct("}")?;
                    Expr::Replicate { count: Box::new(first), parts, loc }
                } else {
                    let mut parts = vec![first];
                    while self.eat_punct(",") {
                        parts.push(self.expr()?);
                    }
                    self.expect_punct("}")?;
                    Expr::Concat { parts, loc }
                }
            }
            TokenKind::Keyword if t.text == "inside" => {
                return Err(Diagnostic::unsupported(loc, "`inside` is not supported"));
            }
            _ => return Err(self.expected("expression")),
        };
        self.selects(base)
    }

    fn selects(&mut self, mut base: Expr) -> PResult<Expr> {
        while self.at_punct("[") {
            let loc = self.loc();
            self.pos += 1;
            let first = self.expr()?;
            if self.eat_punct(":") {
                let lsb = self.expr()?;
                self.expect_punct("]")?;
                base = Expr::Range { base: Box::new(base), msb: Box::new(first), lsb: Box::new(lsb), loc };
            } else if self.at_op("+:") || self.at_op("-:") {
                let up = self.bump().unwrap().text == "+:";
                let width = self.expr()?;
                self.expect_punct("]")?;
                base = Expr::IndexedRange {
                    base: Box::new(base),
                    start: Box::new(first),
                    width: Box::new(width),
                    up,
                    loc,
                };
            } else {
                self.expect_punct("]")?;
                base = Expr::Index { base: Box::new(base), index: Box::new(first), loc };
            }
        }
        Ok(base)
    }
}

/// Decodes the text of a literal token.
pub fn decode_literal(t: &Token) -> PResult<Literal> {
    let loc = t.loc();
    let text = t.text.as_str();
    let bad = |msg: &str| Diagnostic::error(loc, format!("{msg} in literal `{text}`"));
    match text {
        "'0" => return Ok(Literal::Fill(false)),
        "'1" => return Ok(Literal::Fill(true)),
        "'x" | "'X" | "'z" | "'Z" => {
            return Ok(Literal::Number { size: None, signed: false, base: Some(Base::Binary), value: 0, xz_mask: u64::MAX })
        }
        _ => {}
    }
    let Some(q) = text.find('\'') else {
        let digits: String = text.chars().filter(|&c| c != '_').collect();
        let value = digits.parse::<u64>().map_err(|_| bad("value does not fit in 64 bits"))?;
        return Ok(Literal::Number { size: None, signed: false, base: None, value, xz_mask: 0 });
    };
    let size = if q == 0 {
        None
    } else {
        let s: String = text[..q].chars().filter(|&c| c != '_').collect();
        let n = s.parse::<u32>().map_err(|_| bad("invalid size"))?;
        if n == 0 {
            return Err(bad("zero size"));
        }
        if n > 64 {
            return Err(Diagnostic::unsupported(loc, format!("literal `{text}` is wider than 64 bits")));
        }
        Some(n)
    };
    let mut rest = text[q + 1..].chars().peekable();
    let mut signed = false;
    if matches!(rest.peek(), Some('s' | 'S')) {
        signed = true;
        rest.next();
    }
    let base = match rest.next().map(|c| c.to_ascii_lowercase()) {
        Some('b') => Base::Binary,
        Some('o') => Base::Octal,
        Some('d') => Base::Decimal,
        Some('h') => Base::Hex,
        _ => return Err(bad("invalid base")),
    };
    let digits: Vec<char> = rest.filter(|&c| c != '_').collect();
    if digits.is_empty() {
        return Err(bad("missing digits"));
    }
    let mut value: u64 = 0;
    let mut xz_mask: u64 = 0;
    if base == Base::Decimal {
        if digits.iter().all(|c| matches!(c, 'x' | 'X' | 'z' | 'Z' | '?')) {
            xz_mask = u64::MAX;
        } else {
            let s: String = digits.iter().collect();
            value = s.parse::<u64>().map_err(|_| bad("invalid decimal digits"))?;
        }
    } else {
        let bits_per = match base {
            Base::Binary => 1,
            Base::Octal => 3,
            _ => 4,
        };
        let digit_mask = (1u64 << bits_per) - 1;
        let total_bits = digits.len() as u32 * bits_per;
        if total_bits > 64 && size.is_none() {
            return Err(Diagnostic::unsupported(loc, format!("literal `{text}` is wider than 64 bits")));
        }
        for c in digits {
            value = value.checked_shl(bits_per).unwrap_or(0);
            xz_mask = xz_mask.checked_shl(bits_per).unwrap_or(0);
            match c {
                'x' | 'X' | 'z' | 'Z' | '?' => xz_mask |= digit_mask,
                _ => {
                    let d = c.to_digit(base.radix()).ok_or_else(|| bad("invalid digit"))? as u64;
                    value |= d;
                }
            }
        }
    }
    if let Some(n) = size {
        let m = crate::ts::mask(n);
        value &= m;
        xz_mask &= m;
    }
    Ok(Literal::Number { size, signed, base: Some(base), value, xz_mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diag::Severity;

    fn parse_ok(src: &str) -> SourceUnit {
        parse_source(src).unwrap_or_else(|d| panic!("{d:?}"))
    }

    #[test]
    fn empty_module() {
        let unit = parse_ok("module m; endmodule");
        assert_eq!(unit.modules.len(), 1);
        assert_eq!(unit.modules[0].name, "m");
        assert!(unit.modules[0].ports.is_empty() && unit.modules[0].items.is_empty());
    }

    #[test]
    fn ports_inherit_direction_and_type() {
        let unit = parse_ok("module m(input logic [3:0] a, b, output c); endmodule");
        let ports = &unit.modules[0].ports;
        assert_eq!(ports.len(), 3);
        assert_eq!(ports[1].direction, Direction::Input);
        assert!(ports[1].range.is_some());
        assert_eq!(ports[2].direction, Direction::Output);
    }

    #[test]
    fn nonblocking_and_blocking_are_distinct() {
        let unit = parse_ok(
            "module m(input logic clk, input logic d, output logic q);
               logic t;
               always_ff @(posedge clk) q <= d;
               always_comb t = d;
             endmodule",
        );
        let items = &unit.modules[0].items;
        assert!(matches!(&items[1], Item::Always { body: Stmt::NonBlocking { .. }, .. }));
        assert!(matches!(&items[2], Item::Always { body: Stmt::Blocking { .. }, .. }));
    }

    #[test]
    fn sensitivity_is_structural() {
        let unit = parse_ok(
            "module m(input logic clk_in, input logic rst_n_in);
               logic q;
               always_ff @(posedge clk_in or negedge rst_n_in) q <= 1'b0;
             endmodule",
        );
        let Item::Always { sensitivity, .. } = &unit.modules[0].items[1] else { panic!() };
        assert_eq!(
            sensitivity,
            &Sensitivity::Edges(vec![
                (Edge::Posedge, "clk_in".to_string()),
                (Edge::Negedge, "rst_n_in".to_string())
            ])
        );
    }

    #[test]
    fn precedence() {
        let (toks, _) = tokenize("a + b * c == d && e | f");
        let (e, n) = parse_expression(&toks).unwrap();
        assert_eq!(n, toks.len());
        let Expr::Binary { op: BinaryOp::LogAnd, lhs, rhs, .. } = e else { panic!() };
        assert!(matches!(*rhs, Expr::Binary { op: BinaryOp::BitOr, .. }));
        let Expr::Binary { op: BinaryOp::Eq, lhs: sum, .. } = *lhs else { panic!() };
        let Expr::Binary { op: BinaryOp::Add, rhs: prod, .. } = *sum else { panic!() };
        assert!(matches!(*prod, Expr::Binary { op: BinaryOp::Mul, .. }));
    }

    #[test]
    fn literal_values() {
        let lit = |s: &str| {
            let (t, _) = tokenize(s);
            decode_literal(&t[0]).unwrap()
        };
        assert_eq!(
            lit("8'hA5"),
            Literal::Number { size: Some(8), signed: false, base: Some(Base::Hex), value: 0xA5, xz_mask: 0 }
        );
        assert_eq!(
            lit("4'b1?0z"),
            Literal::Number { size: Some(4), signed: false, base: Some(Base::Binary), value: 0b1000, xz_mask: 0b0101 }
        );
        assert_eq!(lit("'1"), Literal::Fill(true));
        assert_eq!(
            lit("3'hF"),
            Literal::Number { size: Some(3), signed: false, base: Some(Base::Hex), value: 7, xz_mask: 0 }
        );
    }

    #[test]
    fn unsupported_constructs_are_not_crashes() {
        let err = parse_source(
            "class c; endclass
             module m(input logic a);
               initial begin $display(\"hi\"); end
               function automatic logic f(input logic x); return x; endfunction
             endmodule",
        )
        .unwrap_err();
        assert_eq!(err.len(), 3);
        assert!(err.iter().all(|d| d.severity == Severity::Unsupported));
    }

    #[test]
    fn syntax_error_reports_location() {
        let err = parse_source("module m;\n  assign = 1;\nendmodule").unwrap_err();
        assert_eq!(err[0].severity, Severity::Error);
        assert_eq!(err[0].loc.line, 2);
    }

    #[test]
    fn instances_with_named_connections() {
        let unit = parse_ok(
            "module top(input logic clk_in, output logic [7:0] q);
               child #(.W(8)) u_child (.clk_in(clk_in), .q, .unused());
             endmodule",
        );
        let Item::Instance(inst) = &unit.modules[0].items[0] else { panic!() };
        assert_eq!(inst.module, "child");
        assert_eq!(inst.name, "u_child");
        assert_eq!(inst.params.len(), 1);
        assert_eq!(inst.connections.len(), 3);
        assert_eq!(inst.connections[1].expr, Some(Expr::ident("q")));
        assert_eq!(inst.connections[2].expr, None);
    }

    #[test]
    fn missing_endmodule() {
        let err = parse_source("module m(input logic a);\n assign b = a;\n").unwrap_err();
        assert!(err[0].message.contains("endmodule"));
    }
}
