// SPDX-License-Identifier: Apache-2.0

//! Hierarchy flattening and symbolic execution of processes into a
//! [`TransitionSystem`].

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::diag::{Diagnostic, Loc};
use crate::sv::ast::*;
use crate::sv::parser::parse_source;
use crate::sv::printer;
use crate::ts::lower::{self, element_key, LowerCtx, Shape};
use crate::ts::{mask, ArrayInfo, Define, Driver, ExprArena, ExprRef, ResetInfo, TransitionSystem, MAX_WIDTH};

type EResult<T> = Result<T, Diagnostic>;

/// Unpacked arrays larger than this many bits are rejected.
pub const ARRAY_BIT_CAP: u64 = 4096;

const MAX_LOOP_ITERATIONS: u32 = 4096;

/// Parses and elaborates in one step.
pub fn elaborate_source(source: &str, top: Option<&str>) -> Result<TransitionSystem, Vec<Diagnostic>> {
    let unit = parse_source(source)?;
    elaborate(&unit, top)
}

/// Flattens `unit` below `top` (or the unique uninstantiated module).
pub fn elaborate(unit: &SourceUnit, top: Option<&str>) -> Result<TransitionSystem, Vec<Diagnostic>> {
    let top = match top {
        Some(t) => unit
            .module(t)
            .ok_or_else(|| vec![Diagnostic::error(Loc::new(1, 1), format!("top module `{t}` not found"))])?,
        None => find_top(unit).map_err(|d| vec![d])?,
    };
    let mut el = Elab {
        unit,
        scopes: Vec::new(),
        ts: TransitionSystem { top: top.name.clone(), ..Default::default() },
        resolved: HashMap::new(),
        running: HashSet::new(),
        state_of: HashMap::new(),
        clock: None,
        warnings: Vec::new(),
    };
    el.run(top).map_err(|d| vec![d])?;
    let mut ts = el.ts;
    ts.warnings = el.warnings;
    Ok(ts)
}

fn find_top(unit: &SourceUnit) -> EResult<&ModuleDecl> {
    if unit.modules.is_empty() {
        return Err(Diagnostic::error(Loc::new(1, 1), "no module found"));
    }
    let mut seen = HashSet::new();
    for m in &unit.modules {
        if !seen.insert(&m.name) {
            return Err(Diagnostic::error(m.loc, format!("module `{}` is defined twice", m.name)));
        }
    }
    let instantiated: HashSet<&str> = unit
        .modules
        .iter()
        .flat_map(|m| m.items.iter())
        .filter_map(|i| match i {
            Item::Instance(inst) => Some(inst.module.as_str()),
            _ => None,
        })
        .collect();
    let roots: Vec<&ModuleDecl> =
        unit.modules.iter().filter(|m| !instantiated.contains(m.name.as_str())).collect();
    match roots.as_slice() {
        [one] => Ok(one),
        [] => Err(Diagnostic::error(unit.modules[0].loc, "recursive module instantiation")),
        many => Err(Diagnostic::error(
            many[1].loc,
            format!(
                "several top-level modules ({}); choose one explicitly",
                many.iter().map(|m| m.name.as_str()).collect::<Vec<_>>().join(", ")
            ),
        )),
    }
}

fn is_reset_name(name: &str) -> bool {
    let l = name.to_ascii_lowercase();
    l.contains("rst") || l.contains("reset") || l.contains("clr") || l.contains("clear")
}

fn is_active_low_name(name: &str) -> bool {
    let l = name.to_ascii_lowercase();
    l.ends_with("_n")
        || l.contains("_n_")
        || l.ends_with("_ni")
        || l.ends_with("_b")
        || l.ends_with("resetn")
        || l.ends_with("rstn")
        || l.starts_with("n_")
        || l.starts_with("nrst")
        || l.starts_with("nreset")
}

#[derive(Debug, Clone)]
struct Decl {
    width: u32,
    msb: i64,
    lsb: i64,
    array: Option<(i64, i64)>,
    dir: Option<Direction>,
    init: Option<Expr>,
    wire: bool,
    loc: Loc,
}

#[derive(Debug, Clone)]
enum AssignSrc<'a> {
    Item { lhs: &'a Expr, rhs: &'a Expr },
    ChildOut { lhs: &'a Expr, child: usize, port: String },
    DeclInit { name: String },
}

#[derive(Debug, Clone)]
enum Source<'a> {
    TopInput,
    PortIn(Option<&'a Expr>),
    Assigns(Vec<AssignSrc<'a>>),
    Comb(usize),
    Seq,
}

struct Block<'a> {
    body: &'a Stmt,
    edges: Vec<(Edge, String)>,
    targets: Vec<String>,
}

struct Scope<'a> {
    prefix: String,
    parent: Option<usize>,
    params: HashMap<String, (u64, u32)>,
    decls: HashMap<String, Decl>,
    decl_order: Vec<String>,
    sources: HashMap<String, Source<'a>>,
    blocks: Vec<Block<'a>>,
}

#[derive(Clone, Copy)]
enum Res {
    InProgress,
    Done(ExprRef),
}

#[derive(Debug, Clone, Copy)]
struct Val {
    e: ExprRef,
    /// Bits assigned so far (combinational processes only).
    mask: u64,
}

#[derive(Clone)]
struct ProcEnv {
    seq: bool,
    vals: BTreeMap<String, Val>,
    next: BTreeMap<String, ExprRef>,
    consts: Vec<(String, u64, u32)>,
}

struct Elab<'a> {
    unit: &'a SourceUnit,
    scopes: Vec<Scope<'a>>,
    ts: TransitionSystem,
    resolved: HashMap<(usize, String), Res>,
    running: HashSet<(usize, usize)>,
    state_of: HashMap<(usize, String), usize>,
    clock: Option<String>,
    warnings: Vec<Diagnostic>,
}

struct Ctx<'e, 'a> {
    el: &'e mut Elab<'a>,
    scope: usize,
    env: Option<&'e ProcEnv>,
    /// Parameters visible while a scope is still being built.
    params: Option<&'e HashMap<String, (u64, u32)>>,
}

impl LowerCtx for Ctx<'_, '_> {
    fn arena(&mut self) -> &mut ExprArena {
        &mut self.el.ts.arena
    }

    fn shape(&mut self, name: &str, loc: Loc) -> EResult<Shape> {
        if let Some(env) = self.env {
            if let Some((_, v, w)) = env.consts.iter().rev().find(|(n, _, _)| n == name) {
                return Ok(Shape::Const { value: *v, width: *w });
            }
        }
        if let Some(p) = self.params {
            if let Some(&(value, width)) = p.get(name) {
                return Ok(Shape::Const { value, width });
            }
            return Err(Diagnostic::error(loc, format!("`{name}` is not a parameter")));
        }
        self.el.shape(self.scope, name, loc)
    }

    fn read(&mut self, key: &str, loc: Loc) -> EResult<ExprRef> {
        if let Some(env) = self.env {
            if let Some(v) = env.vals.get(key) {
                let w = self.el.ts.arena.width(v.e);
                if env.seq || v.mask == mask(w) {
                    return Ok(v.e);
                }
            }
        }
        self.el.resolve(self.scope, key, loc)
    }
}

impl<'a> Elab<'a> {
    fn ctx<'e>(&'e mut self, scope: usize, env: Option<&'e ProcEnv>) -> Ctx<'e, 'a> {
        Ctx { el: self, scope, env, params: None }
    }

    fn shape(&self, scope: usize, name: &str, loc: Loc) -> EResult<Shape> {
        let s = &self.scopes[scope];
        if let Some(&(value, width)) = s.params.get(name) {
            return Ok(Shape::Const { value, width });
        }
        match s.decls.get(name) {
            Some(d) => Ok(match d.array {
                Some((lo, hi)) => Shape::Array { elem_width: d.width, msb: d.msb, lsb: d.lsb, lo, hi },
                None => Shape::Vector { width: d.width, msb: d.msb, lsb: d.lsb },
            }),
            None => Err(Diagnostic::error(loc, format!("undeclared identifier `{name}`"))),
        }
    }

    fn run(&mut self, top: &'a ModuleDecl) -> EResult<()> {
        self.build_scope(top, String::new(), None, &[], &HashMap::new())?;
        self.detect_clock()?;
        // Inputs of the top module, minus the clock.
        let top_ports: Vec<&Port> = top.ports.iter().collect();
        for p in &top_ports {
            if p.direction == Direction::Input && Some(&p.name) != self.clock.as_ref() {
                let w = self.scopes[0].decls[&p.name].width;
                let idx = self.ts.add_input(p.name.clone(), w);
                let e = self.ts.inputs[idx].expr;
                self.resolved.insert((0, p.name.clone()), Res::Done(e));
            }
        }
        self.create_states()?;
        for s in 0..self.scopes.len() {
            for b in 0..self.scopes[s].blocks.len() {
                if !self.scopes[s].blocks[b].edges.is_empty() {
                    self.exec_seq(s, b)?;
                }
            }
        }
        self.collect_defines()?;
        for p in &top_ports {
            if p.direction == Direction::Output {
                let d = &self.scopes[0].decls[&p.name];
                let w = d.width;
                let e = self.resolve(0, &p.name, p.loc)?;
                self.ts.outputs.push(Define { name: p.name.clone(), width: w, expr: e });
            }
        }
        self.detect_reset(top);
        self.compute_reset_values();
        self.ts.clock = self.clock.clone();
        Ok(())
    }

    fn eval_range(&mut self, params: &HashMap<String, (u64, u32)>, r: &Range) -> EResult<(i64, i64)> {
        let mut c = Ctx { el: self, scope: 0, env: None, params: Some(params) };
        let msb = lower::const_eval(&mut c, &r.msb)? as i64;
        let lsb = lower::const_eval(&mut c, &r.lsb)? as i64;
        // Negative bounds arrive as 32-bit two's complement.
        let fix = |v: i64| if v > i32::MAX as i64 && v <= u32::MAX as i64 { v - (1i64 << 32) } else { v };
        Ok((fix(msb), fix(lsb)))
    }

    fn eval_param(
        &mut self,
        params: &HashMap<String, (u64, u32)>,
        p: &ParamDecl,
        value: &Expr,
        value_scope: Option<(usize, &HashMap<String, (u64, u32)>)>,
    ) -> EResult<(u64, u32)> {
        let (v, w) = match value_scope {
            Some((_, pp)) => {
                let mut c = Ctx { el: self, scope: 0, env: None, params: Some(pp) };
                let w = lower::self_width(&mut c, value)?;
                (lower::const_eval(&mut c, value)?, w)
            }
            None => {
                let mut c = Ctx { el: self, scope: 0, env: None, params: Some(params) };
                let w = lower::self_width(&mut c, value)?;
                (lower::const_eval(&mut c, value)?, w)
            }
        };
        match &p.range {
            Some(r) => {
                let (m, l) = self.eval_range(params, r)?;
                let pw = (m.abs_diff(l) + 1) as u32;
                Ok((v & mask(pw), pw))
            }
            None => Ok((v, w)),
        }
    }

    /// Builds a scope for `m`; `overrides` are evaluated in `parent_params`.
    fn build_scope(
        &mut self,
        m: &'a ModuleDecl,
        prefix: String,
        parent: Option<usize>,
        overrides: &'a [(String, Expr)],
        parent_params: &HashMap<String, (u64, u32)>,
    ) -> EResult<usize> {
        if prefix.matches('.').count() > 32 {
            return Err(Diagnostic::error(m.loc, "instantiation depth limit exceeded"));
        }
        let mut params: HashMap<String, (u64, u32)> = HashMap::new();
        for (name, e) in overrides {
            if !m.params.iter().any(|p| &p.name == name && !p.local) {
                return Err(Diagnostic::error(
                    e.loc(),
                    format!("module `{}` has no parameter `{name}`", m.name),
                ));
            }
        }
        let body_params = m.items.iter().filter_map(|i| match i {
            Item::Param(p) => Some(p),
            _ => None,
        });
        for p in m.params.iter().chain(body_params) {
            if params.contains_key(&p.name) {
                return Err(Diagnostic::error(p.loc, format!("parameter `{}` declared twice", p.name)));
            }
            let ov = if p.local { None } else { overrides.iter().find(|(n, _)| n == &p.name) };
            let val = match ov {
                Some((_, e)) => self.eval_param(&params, p, e, Some((0, parent_params)))?,
                None => self.eval_param(&params, p, &p.value, None)?,
            };
            params.insert(p.name.clone(), val);
        }

        let mut decls: HashMap<String, Decl> = HashMap::new();
        let mut decl_order = Vec::new();
        let mut add_decl = |decls: &mut HashMap<String, Decl>, name: &str, d: Decl| -> EResult<()> {
            if decls.contains_key(name) || params.contains_key(name) {
                return Err(Diagnostic::error(d.loc, format!("`{name}` is declared twice")));
            }
            decl_order.push(name.to_string());
            decls.insert(name.to_string(), d);
            Ok(())
        };
        for p in &m.ports {
            if p.direction == Direction::Inout {
                return Err(Diagnostic::unsupported(p.loc, "inout ports are not supported"));
            }
            let (width, msb, lsb) = self.packed(&params, p.kind, p.range.as_ref(), p.loc)?;
            add_decl(
                &mut decls,
                &p.name,
                Decl {
                    width,
                    msb,
                    lsb,
                    array: None,
                    dir: Some(p.direction),
                    init: None,
                    wire: p.kind == NetKind::Wire || p.kind == NetKind::Implicit,
                    loc: p.loc,
                },
            )?;
        }
        for item in &m.items {
            let Item::Net(n) = item else { continue };
            let (width, msb, lsb) = self.packed(&params, n.kind, n.range.as_ref(), n.loc)?;
            for v in &n.vars {
                let array = match v.unpacked.as_slice() {
                    [] => None,
                    [r] => {
                        let (a, b) = self.eval_range(&params, r)?;
                        let (lo, hi) = (a.min(b), a.max(b));
                        let bits = (hi - lo + 1) as u64 * width as u64;
                        if bits > ARRAY_BIT_CAP {
                            return Err(Diagnostic::unsupported(
                                v.loc,
                                format!("array `{}` has {bits} bits, above the {ARRAY_BIT_CAP}-bit cap", v.name),
                            ));
                        }
                        Some((lo, hi))
                    }
                    _ => {
                        return Err(Diagnostic::unsupported(
                            v.loc,
                            "multi-dimensional unpacked arrays are not supported",
                        ))
                    }
                };
                add_decl(
                    &mut decls,
                    &v.name,
                    Decl {
                        width,
                        msb,
                        lsb,
                        array,
                        dir: None,
                        init: v.init.clone(),
                        wire: n.kind == NetKind::Wire,
                        loc: v.loc,
                    },
                )?;
            }
        }

        let id = self.scopes.len();
        self.scopes.push(Scope {
            prefix: prefix.clone(),
            parent,
            params: params.clone(),
            decls,
            decl_order,
            sources: HashMap::new(),
            blocks: Vec::new(),
        });
        if parent.is_none() {
            for p in &m.ports {
                if p.direction == Direction::Input {
                    self.scopes[id].sources.insert(p.name.clone(), Source::TopInput);
                }
            }
        }

        for item in &m.items {
            match item {
                Item::Param(_) | Item::Net(_) => {}
                Item::Assign { lhs, rhs, loc } => {
                    for root in lvalue_roots(lhs) {
                        self.add_assign(id, &root, *loc, AssignSrc::Item { lhs, rhs })?;
                    }
                }
                Item::Always { kind, sensitivity, body, loc } => {
                    let edges = match (kind, sensitivity) {
                        (AlwaysKind::AlwaysFf, Sensitivity::Edges(e)) => e.clone(),
                        (AlwaysKind::AlwaysFf, _) => {
                            return Err(Diagnostic::error(*loc, "always_ff requires an edge event control"))
                        }
                        (_, Sensitivity::Edges(e)) => e.clone(),
                        _ => Vec::new(),
                    };
                    let mut targets: Vec<String> = Vec::new();
                    let mut bad: Option<Diagnostic> = None;
                    body.walk(&mut |s| {
                        if let Stmt::Blocking { lhs, .. } | Stmt::NonBlocking { lhs, .. } = s {
                            for r in lvalue_roots(lhs) {
                                if !targets.contains(&r) {
                                    targets.push(r);
                                }
                            }
                            if bad.is_none() && lvalue_roots(lhs).is_empty() {
                                bad = Some(Diagnostic::error(lhs.loc(), "invalid assignment target"));
                            }
                        }
                    });
                    if let Some(b) = bad {
                        return Err(b);
                    }
                    let b = self.scopes[id].blocks.len();
                    let seq = !edges.is_empty();
                    for t in &targets {
                        let d = self.scopes[id].decls.get(t).ok_or_else(|| {
                            Diagnostic::error(*loc, format!("undeclared identifier `{t}`"))
                        })?;
                        if d.dir == Some(Direction::Input) {
                            return Err(Diagnostic::error(*loc, format!("assignment to input `{t}`")));
                        }
                        if self.scopes[id].sources.contains_key(t) {
                            return Err(Diagnostic::error(*loc, format!("`{t}` has multiple drivers")));
                        }
                        let src = if seq { Source::Seq } else { Source::Comb(b) };
                        self.scopes[id].sources.insert(t.clone(), src);
                    }
                    self.scopes[id].blocks.push(Block { body, edges, targets });
                }
                Item::Instance(inst) => self.build_instance(id, inst, &params)?,
            }
        }

        // Declaration initializers: wires get a continuous driver.
        let order = self.scopes[id].decl_order.clone();
        for name in order {
            let d = &self.scopes[id].decls[&name];
            let Some(init) = d.init.clone() else { continue };
            let loc = d.loc;
            let wire = d.wire;
            match self.scopes[id].sources.get(&name) {
                Some(Source::Seq) if !wire => {}
                None => self.add_assign(id, &name, loc, AssignSrc::DeclInit { name: name.clone() })?,
                Some(Source::Assigns(_)) if wire => {
                    self.add_assign(id, &name, loc, AssignSrc::DeclInit { name: name.clone() })?
                }
                _ => {
                    let _ = init;
                    return Err(Diagnostic::error(loc, format!("`{name}` has multiple drivers")));
                }
            }
        }
        Ok(id)
    }

    fn packed(
        &mut self,
        params: &HashMap<String, (u64, u32)>,
        kind: NetKind,
        range: Option<&Range>,
        loc: Loc,
    ) -> EResult<(u32, i64, i64)> {
        let (msb, lsb) = match range {
            Some(r) => self.eval_range(params, r)?,
            None => match kind.implicit_width() {
                Some(w) => (w as i64 - 1, 0),
                None => (0, 0),
            },
        };
        let width = msb.abs_diff(lsb) + 1;
        if width > MAX_WIDTH as u64 {
            return Err(Diagnostic::unsupported(
                loc,
                format!("{width}-bit signals exceed the {MAX_WIDTH}-bit limit"),
            ));
        }
        Ok((width as u32, msb, lsb))
    }

    fn add_assign(&mut self, scope: usize, root: &str, loc: Loc, src: AssignSrc<'a>) -> EResult<()> {
        let s = &mut self.scopes[scope];
        let Some(d) = s.decls.get(root) else {
            return Err(Diagnostic::error(loc, format!("undeclared identifier `{root}`")));
        };
        if d.dir == Some(Direction::Input) {
            return Err(Diagnostic::error(loc, format!("assignment to input `{root}`")));
        }
        match s.sources.get_mut(root) {
            None => {
                s.sources.insert(root.to_string(), Source::Assigns(vec![src]));
                Ok(())
            }
            Some(Source::Assigns(list)) => {
                list.push(src);
                Ok(())
            }
            Some(_) => Err(Diagnostic::error(loc, format!("`{root}` has multiple drivers"))),
        }
    }

    fn build_instance(
        &mut self,
        parent: usize,
        inst: &'a Instance,
        params: &HashMap<String, (u64, u32)>,
    ) -> EResult<()> {
        let Some(m) = self.unit.module(&inst.module) else {
            return Err(Diagnostic::error(inst.loc, format!("unknown module `{}`", inst.module)));
        };
        let prefix = format!("{}{}.", self.scopes[parent].prefix, inst.name);
        let child = self.build_scope(m, prefix.clone(), Some(parent), &inst.params, params)?;
        self.ts.instances.push((prefix.trim_end_matches('.').to_string(), m.name.clone()));
        let mut connected = HashSet::new();
        for c in &inst.connections {
            let Some(port) = m.ports.iter().find(|p| p.name == c.port) else {
                return Err(Diagnostic::error(
                    c.loc,
                    format!("module `{}` has no port `{}`", m.name, c.port),
                ));
            };
            if !connected.insert(&c.port) {
                return Err(Diagnostic::error(c.loc, format!("port `{}` connected twice", c.port)));
            }
            match port.direction {
                Direction::Input => {
                    self.scopes[child].sources.insert(port.name.clone(), Source::PortIn(c.expr.as_ref()));
                }
                Direction::Output => {
                    if let Some(e) = &c.expr {
                        let roots = lvalue_roots(e);
                        if roots.is_empty() {
                            return Err(Diagnostic::error(c.loc, "output port connected to a non-lvalue"));
                        }
                        for r in roots {
                            self.add_assign(
                                parent,
                                &r,
                                c.loc,
                                AssignSrc::ChildOut { lhs: e, child, port: port.name.clone() },
                            )?;
                        }
                    }
                }
                Direction::Inout => unreachable!(),
            }
        }
        for p in &m.ports {
            if p.direction == Direction::Input && !connected.contains(&p.name) {
                self.warnings.push(Diagnostic::warning(
                    inst.loc,
                    format!("input `{}` of `{}` is unconnected; treated as 0", p.name, inst.name),
                ));
                self.scopes[child].sources.insert(p.name.clone(), Source::PortIn(None));
            }
        }
        Ok(())
    }

    /// Follows input-port connections up to a top-level input name.
    fn trace_to_top(&self, scope: usize, name: &str) -> Option<String> {
        match self.scopes[scope].sources.get(name)? {
            Source::TopInput => Some(name.to_string()),
            Source::PortIn(Some(Expr::Ident { name: n, .. })) => {
                self.trace_to_top(self.scopes[scope].parent?, n)
            }
            _ => None,
        }
    }

    fn detect_clock(&mut self) -> EResult<()> {
        let mut clocks: Vec<String> = Vec::new();
        for s in 0..self.scopes.len() {
            for b in 0..self.scopes[s].blocks.len() {
                let edges = self.scopes[s].blocks[b].edges.clone();
                if edges.is_empty() {
                    continue;
                }
                let body = self.scopes[s].blocks[b].body;
                let clk = match edges.as_slice() {
                    [(_, c)] => c.clone(),
                    [a, b2] => {
                        let first_cond = first_if_cond_names(body);
                        let a_rst = is_reset_name(&a.1) || first_cond.contains(&a.1);
                        let b_rst = is_reset_name(&b2.1) || first_cond.contains(&b2.1);
                        match (a_rst, b_rst) {
                            (true, false) => b2.1.clone(),
                            (false, true) => a.1.clone(),
                            _ => a.1.clone(),
                        }
                    }
                    _ => {
                        return Err(Diagnostic::unsupported(
                            body.loc(),
                            "more than two edge events in one process",
                        ))
                    }
                };
                let top = self.trace_to_top(s, &clk).ok_or_else(|| {
                    Diagnostic::unsupported(
                        body.loc(),
                        format!("clock `{clk}` is not driven directly by a top-level input"),
                    )
                })?;
                if !clocks.contains(&top) {
                    clocks.push(top);
                }
            }
        }
        if clocks.len() > 1 {
            return Err(Diagnostic::unsupported(
                Loc::new(1, 1),
                format!("multiple clocks ({}) are not supported", clocks.join(", ")),
            ));
        }
        self.clock = clocks.pop();
        Ok(())
    }

    fn detect_reset(&mut self, top: &ModuleDecl) {
        // An asynchronous edge event that is not the clock wins.
        for s in 0..self.scopes.len() {
            for b in &self.scopes[s].blocks {
                for (edge, name) in &b.edges {
                    let Some(t) = self.trace_to_top(s, name) else { continue };
                    if Some(&t) != self.clock.as_ref() {
                        self.ts.reset = Some(ResetInfo { name: t, active_low: *edge == Edge::Negedge });
                        return;
                    }
                }
            }
        }
        for p in &top.ports {
            if p.direction == Direction::Input
                && Some(&p.name) != self.clock.as_ref()
                && is_reset_name(&p.name)
                && self.scopes[0].decls[&p.name].width == 1
            {
                self.ts.reset = Some(ResetInfo { name: p.name.clone(), active_low: is_active_low_name(&p.name) });
                return;
            }
        }
    }

    fn compute_reset_values(&mut self) {
        let reset = self.ts.reset.clone();
        let input = reset.as_ref().and_then(|r| self.ts.input_index(&r.name));
        for i in 0..self.ts.states.len() {
            let mut rv = None;
            if let (Some(r), Some(idx)) = (&reset, input) {
                let active = if r.active_low { 0 } else { 1 };
                let next = self.ts.states[i].next;
                let arena = &mut self.ts.arena;
                let k = arena.konst(active, 1);
                let sub = arena.substitute(next, &|n| match n {
                    crate::ts::Node::Input { index, .. } if *index as usize == idx => Some(k),
                    _ => None,
                });
                rv = arena.const_value(sub);
            }
            let s = &mut self.ts.states[i];
            s.reset_value = rv;
            if rv.is_some() {
                s.init = rv;
            }
        }
    }

    fn create_states(&mut self) -> EResult<()> {
        for s in 0..self.scopes.len() {
            for b in 0..self.scopes[s].blocks.len() {
                if self.scopes[s].blocks[b].edges.is_empty() {
                    continue;
                }
                let targets = self.scopes[s].blocks[b].targets.clone();
                for t in targets {
                    let d = self.scopes[s].decls[&t].clone();
                    let keys: Vec<String> = match d.array {
                        Some((lo, hi)) => (lo..=hi).map(|i| element_key(&t, i)).collect(),
                        None => vec![t.clone()],
                    };
                    let mut init = None;
                    if let Some(e) = &d.init {
                        let mut c = self.ctx(s, None);
                        init = Some(lower::const_eval(&mut c, e).map_err(|_| {
                            Diagnostic::unsupported(d.loc, "register initializers must be constant")
                        })?);
                    }
                    for k in keys {
                        let full = format!("{}{}", self.scopes[s].prefix, k);
                        let idx = self.ts.add_state(full, d.width, init.map(|v| v & mask(d.width)));
                        let e = self.ts.states[idx].expr;
                        self.state_of.insert((s, k.clone()), idx);
                        self.resolved.insert((s, k), Res::Done(e));
                    }
                }
            }
        }
        Ok(())
    }

    fn collect_defines(&mut self) -> EResult<()> {
        for s in 0..self.scopes.len() {
            let order = self.scopes[s].decl_order.clone();
            let prefix = self.scopes[s].prefix.clone();
            for name in order {
                let d = self.scopes[s].decls[&name].clone();
                let full = format!("{prefix}{name}");
                self.ts.ranges.insert(full.clone(), (d.msb, d.lsb));
                let keys: Vec<String> = match d.array {
                    Some((lo, hi)) => {
                        self.ts.arrays.insert(full.clone(), ArrayInfo { lo, hi, elem_width: d.width });
                        (lo..=hi).map(|i| element_key(&name, i)).collect()
                    }
                    None => vec![name.clone()],
                };
                if s == 0 && d.dir == Some(Direction::Input) {
                    continue;
                }
                if Some(&name) == self.clock.as_ref() && s == 0 {
                    continue;
                }
                if self.is_clock_alias(s, &name) {
                    continue;
                }
                for k in keys {
                    if self.state_of.contains_key(&(s, k.clone())) {
                        continue;
                    }
                    let e = self.resolve(s, &k, d.loc)?;
                    self.ts.defines.push(Define { name: format!("{prefix}{k}"), width: d.width, expr: e });
                }
            }
        }
        Ok(())
    }

    fn is_clock_alias(&self, scope: usize, name: &str) -> bool {
        self.clock.is_some() && self.trace_to_top(scope, name) == self.clock
    }

    /// Value of a storage key (scalar or array element) outside any process.
    fn resolve(&mut self, scope: usize, key: &str, loc: Loc) -> EResult<ExprRef> {
        let ck = (scope, key.to_string());
        match self.resolved.get(&ck) {
            Some(Res::Done(e)) => return Ok(*e),
            Some(Res::InProgress) => {
                return Err(Diagnostic::error(
                    loc,
                    format!("combinational loop through `{}{key}`", self.scopes[scope].prefix),
                ))
            }
            None => {}
        }
        let root = key.split('[').next().unwrap().to_string();
        let decl = self.scopes[scope]
            .decls
            .get(&root)
            .cloned()
            .ok_or_else(|| Diagnostic::error(loc, format!("undeclared identifier `{root}`")))?;
        let source = self.scopes[scope].sources.get(&root).cloned();
        let width = decl.width;
        match source {
            Some(Source::TopInput) => Err(Diagnostic::unsupported(
                loc,
                format!("clock `{root}` cannot be used as data"),
            )),
            Some(Source::Seq) => unreachable!("states are pre-resolved"),
            Some(Source::Comb(b)) => {
                self.run_comb(scope, b)?;
                match self.resolved.get(&ck) {
                    Some(Res::Done(e)) => Ok(*e),
                    _ => unreachable!(),
                }
            }
            Some(Source::PortIn(conn)) => {
                if self.is_clock_alias(scope, &root) {
                    return Err(Diagnostic::unsupported(
                        loc,
                        format!("clock `{}{root}` cannot be used as data", self.scopes[scope].prefix),
                    ));
                }
                self.resolved.insert(ck.clone(), Res::InProgress);
                let e = match conn {
                    Some(expr) => {
                        let parent = self.scopes[scope].parent.unwrap();
                        let mut c = self.ctx(parent, None);
                        lower::lower(&mut c, expr, width)?
                    }
                    None => self.ts.arena.zero(width),
                };
                self.resolved.insert(ck, Res::Done(e));
                Ok(e)
            }
            Some(Source::Assigns(list)) => {
                self.resolved.insert(ck.clone(), Res::InProgress);
                let mut vals: BTreeMap<String, Val> = BTreeMap::new();
                for src in &list {
                    match src {
                        AssignSrc::Item { lhs, rhs } => {
                            let w = self.lvalue_width(scope, lhs)?;
                            let mut c = self.ctx(scope, None);
                            let v = lower::lower(&mut c, rhs, w)?;
                            self.write_lvalue(scope, lhs, v, &mut vals, None, false, Some(&root))?;
                        }
                        AssignSrc::ChildOut { lhs, child, port } => {
                            let w = self.lvalue_width(scope, lhs)?;
                            let pw = self.scopes[*child].decls[port].width;
                            let pv = self.resolve(*child, port, loc)?;
                            let v = if pw >= w {
                                self.ts.arena.slice(pv, 0, w)
                            } else {
                                self.ts.arena.zext(pv, w)
                            };
                            self.write_lvalue(scope, lhs, v, &mut vals, None, false, Some(&root))?;
                        }
                        AssignSrc::DeclInit { name } => {
                            let init = self.scopes[scope].decls[name].init.clone().unwrap();
                            let mut c = self.ctx(scope, None);
                            let v = lower::lower(&mut c, &init, width)?;
                            vals.insert(name.clone(), Val { e: v, mask: mask(width) });
                        }
                    }
                }
                let keys: Vec<String> = match decl.array {
                    Some((lo, hi)) => (lo..=hi).map(|i| element_key(&root, i)).collect(),
                    None => vec![root.clone()],
                };
                for k in keys {
                    let val = vals.get(&k).copied().unwrap_or(Val { e: self.ts.arena.zero(width), mask: 0 });
                    if val.mask != mask(width) {
                        self.warnings.push(Diagnostic::warning(
                            decl.loc,
                            format!("`{}{k}` is not fully driven; undriven bits read as 0", self.scopes[scope].prefix),
                        ));
                    }
                    self.resolved.insert((scope, k), Res::Done(val.e));
                }
                match self.resolved.get(&ck) {
                    Some(Res::Done(e)) => Ok(*e),
                    _ => Err(Diagnostic::error(loc, format!("`{key}` is not driven"))),
                }
            }
            None => {
                if self.is_clock_alias(scope, &root) {
                    return Err(Diagnostic::unsupported(loc, format!("clock `{root}` cannot be used as data")));
                }
                self.warnings.push(Diagnostic::warning(
                    decl.loc,
                    format!("`{}{root}` is never driven; it reads as 0", self.scopes[scope].prefix),
                ));
                let z = self.ts.arena.zero(width);
                let keys: Vec<String> = match decl.array {
                    Some((lo, hi)) => (lo..=hi).map(|i| element_key(&root, i)).collect(),
                    None => vec![root.clone()],
                };
                for k in keys {
                    self.resolved.insert((scope, k), Res::Done(z));
                }
                Ok(z)
            }
        }
    }

    fn lvalue_width(&mut self, scope: usize, lhs: &Expr) -> EResult<u32> {
        let mut c = self.ctx(scope, None);
        lower::self_width(&mut c, lhs)
    }

    fn run_comb(&mut self, scope: usize, b: usize) -> EResult<()> {
        if !self.running.insert((scope, b)) {
            let loc = self.scopes[scope].blocks[b].body.loc();
            return Err(Diagnostic::error(loc, "combinational loop through a combinational process"));
        }
        let body = self.scopes[scope].blocks[b].body;
        let targets = self.scopes[scope].blocks[b].targets.clone();
        let mut env = ProcEnv { seq: false, vals: BTreeMap::new(), next: BTreeMap::new(), consts: Vec::new() };
        let t = self.ts.arena.tru();
        self.exec(scope, body, &mut env, t)?;
        for root in targets {
            let d = self.scopes[scope].decls[&root].clone();
            let keys: Vec<String> = match d.array {
                Some((lo, hi)) => (lo..=hi).map(|i| element_key(&root, i)).collect(),
                None => vec![root.clone()],
            };
            for k in keys {
                let v = env.vals.get(&k).copied();
                match v {
                    Some(v) if v.mask == mask(d.width) => {
                        self.resolved.insert((scope, k), Res::Done(v.e));
                    }
                    _ => {
                        return Err(Diagnostic::unsupported(
                            body.loc(),
                            format!(
                                "latch inferred for `{}{k}`: not assigned on every path",
                                self.scopes[scope].prefix
                            ),
                        ))
                    }
                }
            }
        }
        self.running.remove(&(scope, b));
        Ok(())
    }

    fn exec_seq(&mut self, scope: usize, b: usize) -> EResult<()> {
        let body = self.scopes[scope].blocks[b].body;
        let mut env = ProcEnv { seq: true, vals: BTreeMap::new(), next: BTreeMap::new(), consts: Vec::new() };
        let t = self.ts.arena.tru();
        self.exec(scope, body, &mut env, t)?;
        for (k, e) in env.next {
            let idx = self.state_of[&(scope, k)];
            self.ts.states[idx].next = e;
        }
        Ok(())
    }

    /// Default value for a key absent from a process environment.
    fn absent(&mut self, scope: usize, key: &str, seq: bool, loc: Loc) -> EResult<Val> {
        if seq {
            let e = self.resolve(scope, key, loc)?;
            let w = self.ts.arena.width(e);
            Ok(Val { e, mask: mask(w) })
        } else {
            let root = key.split('[').next().unwrap();
            let w = self.scopes[scope].decls[root].width;
            Ok(Val { e: self.ts.arena.zero(w), mask: 0 })
        }
    }

    fn exec(&mut self, scope: usize, s: &Stmt, env: &mut ProcEnv, guard: ExprRef) -> EResult<()> {
        match s {
            Stmt::Block { stmts, .. } => {
                for st in stmts {
                    self.exec(scope, st, env, guard)?;
                }
                Ok(())
            }
            Stmt::Null { .. } => Ok(()),
            Stmt::If { cond, then_branch, else_branch, .. } => {
                let c = {
                    let mut cx = self.ctx(scope, Some(env));
                    lower::lower_bool(&mut cx, cond)?
                };
                self.branch(scope, env, guard, c, then_branch, else_branch.as_deref())
            }
            Stmt::Case { kind, subject, items, default, .. } => {
                self.exec_case(scope, env, guard, *kind, subject, items, default.as_deref())
            }
            Stmt::Blocking { lhs, rhs, loc } | Stmt::NonBlocking { lhs, rhs, loc } => {
                let nb = matches!(s, Stmt::NonBlocking { .. });
                if nb && !env.seq {
                    self.warnings.push(Diagnostic::warning(
                        *loc,
                        "nonblocking assignment in a combinational process",
                    ));
                }
                let w = self.lvalue_width(scope, lhs)?;
                let v = {
                    let mut cx = self.ctx(scope, Some(env));
                    lower::lower(&mut cx, rhs, w)?
                };
                if env.seq {
                    let text = format!(
                        "{} {} {}",
                        printer::expr(lhs),
                        if nb { "<=" } else { "=" },
                        printer::expr(rhs)
                    );
                    self.record_drivers(scope, lhs, guard, v, loc.line, text, env)?;
                    let mut next = std::mem::take(&mut env.next);
                    self.write_next(scope, lhs, v, &mut next, env)?;
                    env.next = next;
                    if !nb {
                        let mut vals = std::mem::take(&mut env.vals);
                        let r = self.write_lvalue(scope, lhs, v, &mut vals, Some(env), true, None);
                        env.vals = vals;
                        r?;
                    }
                } else {
                    let mut vals = std::mem::take(&mut env.vals);
                    let r = self.write_lvalue(scope, lhs, v, &mut vals, Some(env), false, None);
                    env.vals = vals;
                    r?;
                }
                Ok(())
            }
            Stmt::For { var, init, cond, step, body, loc } => {
                let (mut value, width) = {
                    let mut cx = self.ctx(scope, Some(env));
                    let w = lower::self_width(&mut cx, init)?.max(32);
                    (lower::const_eval(&mut cx, init)?, w)
                };
                let mut iterations = 0;
                loop {
                    env.consts.push((var.clone(), value & mask(width), width));
                    let go = {
                        let mut cx = self.ctx(scope, Some(env));
                        lower::const_eval(&mut cx, cond).map_err(|_| {
                            Diagnostic::unsupported(*loc, "loop bounds must be compile-time constants")
                        })?
                    };
                    if go == 0 {
                        env.consts.pop();
                        break;
                    }
                    iterations += 1;
                    if iterations > MAX_LOOP_ITERATIONS {
                        return Err(Diagnostic::unsupported(*loc, "loop exceeds the iteration limit"));
                    }
                    self.exec(scope, body, env, guard)?;
                    let nv = {
                        let mut cx = self.ctx(scope, Some(env));
                        lower::const_eval(&mut cx, step)?
                    };
                    env.consts.pop();
                    value = nv;
                }
                Ok(())
            }
        }
    }

    fn branch(
        &mut self,
        scope: usize,
        env: &mut ProcEnv,
        guard: ExprRef,
        c: ExprRef,
        then_branch: &Stmt,
        else_branch: Option<&Stmt>,
    ) -> EResult<()> {
        match self.ts.arena.const_value(c) {
            Some(1) => return self.exec(scope, then_branch, env, guard),
            Some(_) => {
                return match else_branch {
                    Some(e) => self.exec(scope, e, env, guard),
                    None => Ok(()),
                }
            }
            None => {}
        }
        let mut t_env = env.clone();
        let gt = self.ts.arena.and(guard, c);
        self.exec(scope, then_branch, &mut t_env, gt)?;
        let mut f_env = env.clone();
        if let Some(e) = else_branch {
            let nc = self.ts.arena.not(c);
            let gf = self.ts.arena.and(guard, nc);
            self.exec(scope, e, &mut f_env, gf)?;
        }
        self.merge(scope, env, c, t_env, f_env)
    }

    fn merge(&mut self, scope: usize, env: &mut ProcEnv, c: ExprRef, t: ProcEnv, f: ProcEnv) -> EResult<()> {
        let keys: Vec<String> = t.vals.keys().chain(f.vals.keys()).cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let loc = Loc::default();
        for k in keys {
            let tv = match t.vals.get(&k) {
                Some(v) => *v,
                None => self.absent(scope, &k, env.seq, loc)?,
            };
            let fv = match f.vals.get(&k) {
                Some(v) => *v,
                None => self.absent(scope, &k, env.seq, loc)?,
            };
            let e = self.ts.arena.mux(c, tv.e, fv.e);
            env.vals.insert(k, Val { e, mask: tv.mask & fv.mask });
        }
        let keys: Vec<String> = t.next.keys().chain(f.next.keys()).cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        for k in keys {
            let hold = |el: &mut Self, k: &str| el.ts.states[el.state_of[&(scope, k.to_string())]].expr;
            let te = t.next.get(&k).copied().unwrap_or_else(|| hold(self, &k));
            let fe = f.next.get(&k).copied().unwrap_or_else(|| hold(self, &k));
            let e = self.ts.arena.mux(c, te, fe);
            env.next.insert(k, e);
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn exec_case(
        &mut self,
        scope: usize,
        env: &mut ProcEnv,
        guard: ExprRef,
        kind: CaseKind,
        subject: &Expr,
        items: &[CaseItem],
        default: Option<&Stmt>,
    ) -> EResult<()> {
        // Match conditions are computed up front against the entry state.
        let mut conds = Vec::with_capacity(items.len());
        {
            let mut cx = self.ctx(scope, Some(env));
            let sw = lower::self_width(&mut cx, subject)?;
            for item in items {
                let mut any = cx.arena().fals();
                for label in &item.labels {
                    let lw = lower::self_width(&mut cx, label)?;
                    let w = sw.max(lw);
                    let s = lower::lower(&mut cx, subject, w)?;
                    let l = lower::lower(&mut cx, label, w)?;
                    let dc = match (kind, label) {
                        (CaseKind::Casez | CaseKind::Casex, Expr::Literal { lit: Literal::Number { xz_mask, .. }, .. }) => {
                            *xz_mask & mask(w)
                        }
                        _ => 0,
                    };
                    let hit = if dc == 0 {
                        cx.arena().eq(s, l)
                    } else {
                        let care = cx.arena().konst(!dc, w);
                        let a = cx.arena().and(s, care);
                        let b = cx.arena().and(l, care);
                        cx.arena().eq(a, b)
                    };
                    any = cx.arena().or(any, hit);
                }
                conds.push(any);
            }
        }
        self.case_chain(scope, env, guard, &conds, items, default)
    }

    fn case_chain(
        &mut self,
        scope: usize,
        env: &mut ProcEnv,
        guard: ExprRef,
        conds: &[ExprRef],
        items: &[CaseItem],
        default: Option<&Stmt>,
    ) -> EResult<()> {
        let Some((&c, rest)) = conds.split_first() else {
            return match default {
                Some(d) => self.exec(scope, d, env, guard),
                None => Ok(()),
            };
        };
        match self.ts.arena.const_value(c) {
            Some(1) => return self.exec(scope, &items[0].body, env, guard),
            Some(_) => return self.case_chain(scope, env, guard, rest, &items[1..], default),
            None => {}
        }
        let mut t_env = env.clone();
        let gt = self.ts.arena.and(guard, c);
        self.exec(scope, &items[0].body, &mut t_env, gt)?;
        let mut f_env = env.clone();
        let nc = self.ts.arena.not(c);
        let gf = self.ts.arena.and(guard, nc);
        self.case_chain(scope, &mut f_env, gf, rest, &items[1..], default)?;
        self.merge(scope, env, c, t_env, f_env)
    }

    /// Element keys addressed by an lvalue base, each with an optional select guard.
    fn lvalue_targets(
        &mut self,
        scope: usize,
        lhs: &Expr,
        env: Option<&ProcEnv>,
    ) -> EResult<(Vec<(String, Option<ExprRef>)>, Option<LSel>)> {
        let loc = lhs.loc();
        match lhs {
            Expr::Ident { name, loc } => match self.shape(scope, name, *loc)? {
                Shape::Vector { .. } => Ok((vec![(name.clone(), None)], None)),
                Shape::Array { .. } => Err(Diagnostic::unsupported(*loc, "whole-array assignment")),
                Shape::Const { .. } => Err(Diagnostic::error(*loc, format!("cannot assign to parameter `{name}`"))),
            },
            Expr::Index { base, index, .. } => {
                if let Expr::Ident { name, loc } = &**base {
                    if let Shape::Array { lo, hi, .. } = self.shape(scope, name, *loc)? {
                        let mut cx = self.ctx(scope, env);
                        let idx = lower::lower_self(&mut cx, index)?;
                        if let Some(i) = cx.arena().const_value(idx) {
                            let i = i as i64;
                            if i < lo || i > hi {
                                if !lower::is_static(&mut cx, index)? {
                                    return Ok((Vec::new(), None));
                                }
                                return Err(Diagnostic::error(
                                    index.loc(),
                                    format!("index {i} is out of range for `{name}[{lo}:{hi}]`"),
                                ));
                            }
                            return Ok((vec![(element_key(name, i), None)], None));
                        }
                        let iw = cx.arena().width(idx);
                        let mut out = Vec::new();
                        for i in lo..=hi {
                            if i < 0 || (iw < 64 && i as u64 > mask(iw)) {
                                continue;
                            }
                            let k = cx.arena().konst(i as u64, iw);
                            let g = cx.arena().eq(idx, k);
                            out.push((element_key(name, i), Some(g)));
                        }
                        return Ok((out, None));
                    }
                }
                let (targets, inner) = self.lvalue_targets(scope, base, env)?;
                if inner.is_some() {
                    return Err(Diagnostic::unsupported(loc, "nested part selects in assignment targets"));
                }
                let (msb, lsb) = self.target_range(scope, base)?;
                let mut cx = self.ctx(scope, env);
                let idx = lower::lower_self(&mut cx, index)?;
                Ok((targets, Some(LSel { start: idx, bias: lsb, width: 1, msb, lsb, descending: msb >= lsb })))
            }
            Expr::Range { base, msb: m, lsb: l, .. } => {
                let (targets, inner) = self.lvalue_targets(scope, base, env)?;
                if inner.is_some() {
                    return Err(Diagnostic::unsupported(loc, "nested part selects in assignment targets"));
                }
                let (msb, lsb) = self.target_range(scope, base)?;
                let mut cx = self.ctx(scope, env);
                let mi = lower::const_eval(&mut cx, m)? as i64;
                let li = lower::const_eval(&mut cx, l)? as i64;
                let low = if msb >= lsb { mi.min(li) } else { mi.max(li) };
                let start = cx.arena().konst(low as u64, 64);
                Ok((
                    targets,
                    Some(LSel { start, bias: lsb, width: (mi.abs_diff(li) + 1) as u32, msb, lsb, descending: msb >= lsb }),
                ))
            }
            Expr::IndexedRange { base, start, width, up, .. } => {
                let (targets, inner) = self.lvalue_targets(scope, base, env)?;
                if inner.is_some() {
                    return Err(Diagnostic::unsupported(loc, "nested part selects in assignment targets"));
                }
                let (msb, lsb) = self.target_range(scope, base)?;
                if msb < lsb {
                    return Err(Diagnostic::unsupported(loc, "indexed part select on an ascending range"));
                }
                let mut cx = self.ctx(scope, env);
                let wd = lower::const_eval(&mut cx, width)? as i64;
                let s = lower::lower_self(&mut cx, start)?;
                let bias = if *up { lsb } else { lsb + wd - 1 };
                Ok((targets, Some(LSel { start: s, bias, width: wd as u32, msb, lsb, descending: true })))
            }
            _ => Err(Diagnostic::error(loc, "invalid assignment target")),
        }
    }

    fn target_range(&mut self, scope: usize, base: &Expr) -> EResult<(i64, i64)> {
        match base {
            Expr::Ident { name, loc } => match self.shape(scope, name, *loc)? {
                Shape::Vector { msb, lsb, .. } | Shape::Array { msb, lsb, .. } => Ok((msb, lsb)),
                Shape::Const { .. } => Err(Diagnostic::error(*loc, "cannot assign to a parameter")),
            },
            Expr::Index { base: inner, .. } => match inner.as_ref() {
                Expr::Ident { name, loc } => match self.shape(scope, name, *loc)? {
                    Shape::Vector { msb, lsb, .. } | Shape::Array { msb, lsb, .. } => Ok((msb, lsb)),
                    Shape::Const { .. } => Err(Diagnostic::error(*loc, "cannot assign to a parameter")),
                },
                _ => Err(Diagnostic::error(base.loc(), "invalid assignment target")),
            },
            _ => Err(Diagnostic::error(base.loc(), "invalid assignment target")),
        }
    }

    /// Writes `value` (already at the lvalue's width) into `map`.
    #[allow(clippy::too_many_arguments)]
    fn write_lvalue(
        &mut self,
        scope: usize,
        lhs: &Expr,
        value: ExprRef,
        map: &mut BTreeMap<String, Val>,
        env: Option<&ProcEnv>,
        seq: bool,
        only_root: Option<&str>,
    ) -> EResult<()> {
        if let Expr::Concat { parts, .. } = lhs {
            let mut offset = self.ts.arena.width(value);
            for p in parts {
                let w = self.lvalue_width(scope, p)?;
                offset -= w;
                let part = self.ts.arena.slice(value, offset, w);
                self.write_lvalue(scope, p, part, map, env, seq, only_root)?;
            }
            return Ok(());
        }
        if let Some(r) = only_root {
            if lhs.root_name() != Some(r) {
                return Ok(());
            }
        }
        let (targets, sel) = self.lvalue_targets(scope, lhs, env)?;
        for (key, g) in targets {
            let old = match map.get(&key) {
                Some(v) => *v,
                None => self.absent(scope, &key, seq, lhs.loc())?,
            };
            let (new_e, new_mask) = self.apply_sel(old, value, sel.as_ref(), lhs.loc())?;
            let (e, m) = match g {
                None => (new_e, new_mask),
                Some(g) => (self.ts.arena.mux(g, new_e, old.e), old.mask),
            };
            map.insert(key, Val { e, mask: m });
        }
        Ok(())
    }

    fn write_next(
        &mut self,
        scope: usize,
        lhs: &Expr,
        value: ExprRef,
        next: &mut BTreeMap<String, ExprRef>,
        env: &ProcEnv,
    ) -> EResult<()> {
        let mut vals: BTreeMap<String, Val> = next
            .iter()
            .map(|(k, e)| (k.clone(), Val { e: *e, mask: u64::MAX }))
            .collect();
        // Absent next values hold the current state, not the blocking view.
        let touched = self.next_keys(scope, lhs, env)?;
        for k in &touched {
            if !vals.contains_key(k) {
                let e = self.ts.states[self.state_of[&(scope, k.clone())]].expr;
                vals.insert(k.clone(), Val { e, mask: u64::MAX });
            }
        }
        self.write_lvalue(scope, lhs, value, &mut vals, Some(env), true, None)?;
        for k in touched {
            next.insert(k.clone(), vals[&k].e);
        }
        Ok(())
    }

    fn next_keys(&mut self, scope: usize, lhs: &Expr, env: &ProcEnv) -> EResult<Vec<String>> {
        if let Expr::Concat { parts, .. } = lhs {
            let mut out = Vec::new();
            for p in parts {
                out.extend(self.next_keys(scope, p, env)?);
            }
            return Ok(out);
        }
        let (targets, _) = self.lvalue_targets(scope, lhs, Some(env))?;
        Ok(targets.into_iter().map(|(k, _)| k).collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn record_drivers(
        &mut self,
        scope: usize,
        lhs: &Expr,
        guard: ExprRef,
        value: ExprRef,
        line: u32,
        text: String,
        env: &ProcEnv,
    ) -> EResult<()> {
        if let Expr::Concat { parts, .. } = lhs {
            for p in parts {
                self.record_drivers(scope, p, guard, value, line, text.clone(), env)?;
            }
            return Ok(());
        }
        let (targets, _) = self.lvalue_targets(scope, lhs, Some(env))?;
        for (k, g) in targets {
            let state = self.state_of[&(scope, k)];
            let guard = match g {
                Some(g) => self.ts.arena.and(guard, g),
                None => guard,
            };
            self.ts.drivers.push(Driver { state, guard, value, line, text: text.clone() });
        }
        Ok(())
    }

    /// Inserts `value` into `old` at the selected bits.
    fn apply_sel(&mut self, old: Val, value: ExprRef, sel: Option<&LSel>, loc: Loc) -> EResult<(ExprRef, u64)> {
        let a = &mut self.ts.arena;
        let ow = a.width(old.e);
        let Some(sel) = sel else {
            return Ok((value, mask(ow)));
        };
        let w = sel.width;
        let place = |a: &mut ExprArena, lo: u32| -> ExprRef {
            let mut parts: Vec<ExprRef> = Vec::new();
            if lo + w < ow {
                parts.push(a.slice(old.e, lo + w, ow - lo - w));
            }
            parts.push(value);
            if lo > 0 {
                parts.push(a.slice(old.e, 0, lo));
            }
            let mut acc = parts[0];
            for p in &parts[1..] {
                acc = a.concat(acc, *p);
            }
            acc
        };
        let offset_of = |i: i64| if sel.descending { i - sel.bias } else { sel.bias - i };
        if let Some(s) = a.const_value(sel.start) {
            let s = s as i64;
            let lo = if sel.descending { offset_of(s) } else { offset_of(s) - (w as i64 - 1) };
            if lo < 0 || lo + w as i64 > ow as i64 {
                return Err(Diagnostic::error(
                    loc,
                    format!("select is out of range [{}:{}]", sel.msb, sel.lsb),
                ));
            }
            let lo = lo as u32;
            return Ok((place(a, lo), old.mask | (mask(w) << lo)));
        }
        if !sel.descending {
            return Err(Diagnostic::unsupported(loc, "variable select on an ascending range"));
        }
        let sw = a.width(sel.start);
        let mut acc = old.e;
        for lo in 0..=(ow - w) {
            let idx = lo as i64 + sel.bias;
            if idx < 0 || (sw < 64 && idx as u64 > mask(sw)) {
                continue;
            }
            let k = a.konst(idx as u64, sw);
            let hit = a.eq(sel.start, k);
            let placed = place(a, lo);
            acc = a.mux(hit, placed, acc);
        }
        Ok((acc, old.mask))
    }
}

/// A bit or part select on an assignment target.
struct LSel {
    start: ExprRef,
    /// Declared index that maps to the lowest selected bit offset.
    bias: i64,
    width: u32,
    msb: i64,
    lsb: i64,
    descending: bool,
}

fn lvalue_roots(e: &Expr) -> Vec<String> {
    match e {
        Expr::Concat { parts, .. } => parts.iter().flat_map(lvalue_roots).collect(),
        _ => e.root_name().map(|n| vec![n.to_string()]).unwrap_or_default(),
    }
}

/// Names appearing in the condition of the first `if` of a process body.
fn first_if_cond_names(body: &Stmt) -> Vec<String> {
    let mut s = body;
    loop {
        match s {
            Stmt::Block { stmts, .. } if !stmts.is_empty() => s = &stmts[0],
            Stmt::If { cond, .. } => {
                let mut names = Vec::new();
                cond.walk(&mut |e| {
                    if let Expr::Ident { name, .. } = e {
                        names.push(name.clone());
                    }
                });
                return names;
            }
            _ => return Vec::new(),
        }
    }
}
