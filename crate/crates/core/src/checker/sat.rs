// SPDX-License-Identifier: Apache-2.0

//! A CDCL SAT solver: two watched literals, first-UIP learning with clause
//! minimization, VSIDS decisions, phase saving, Luby restarts and learnt
//! clause deletion.
//!
//! Literals use the same encoding as [`Lit`]: `var << 1 | negated`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::aig::Lit;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    Unsat,
    /// The conflict budget ran out.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LBool {
    True,
    False,
    Undef,
}

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    activity: f64,
    deleted: bool,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: u32,
    blocker: Lit,
}

#[derive(Debug, Clone, Default)]
pub struct Stats {
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub learnts: u64,
}

/// Binary max-heap over variables keyed by activity.
#[derive(Debug, Clone, Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn contains(&self, v: u32) -> bool {
        self.pos.get(v as usize).is_some_and(|p| p.is_some())
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let p = (i - 1) / 2;
            if act[self.heap[p] as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[p];
            self.pos[self.heap[i] as usize] = Some(i);
            i = p;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let c = if r < self.heap.len() && act[self.heap[r] as usize] > act[self.heap[l] as usize] { r } else { l };
            if act[self.heap[c] as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i] as usize] = Some(i);
            i = c;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.pos.len() <= v as usize {
            self.pos.resize(v as usize + 1, None);
        }
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        let i = self.heap.len() - 1;
        self.up(i, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top as usize] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = Some(0);
            self.down(0, act);
        }
        Some(top)
    }

    fn bumped(&mut self, v: u32, act: &[f64]) {
        if let Some(Some(i)) = self.pos.get(v as usize) {
            self.up(*i, act);
        }
    }
}

fn luby(y: f64, mut x: u64) -> f64 {
    let (mut size, mut seq) = (1u64, 0i32);
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq)
}

#[derive(Debug, Clone)]
pub struct Solver {
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<LBool>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    heap: VarHeap,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    seen: Vec<bool>,
    var_inc: f64,
    cla_inc: f64,
    ok: bool,
    model: Vec<bool>,
    max_learnts: f64,
    num_learnts: usize,
    rng: ChaCha8Rng,
    /// Remaining conflicts for the next `solve` call; `None` is unlimited.
    pub conflict_budget: Option<u64>,
    pub stats: Stats,
}

impl Default for Solver {
    fn default() -> Self {
        Self::new(0)
    }
}

impl Solver {
    pub fn new(seed: u64) -> Self {
        Solver {
            clauses: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            polarity: Vec::new(),
            activity: Vec::new(),
            heap: VarHeap::default(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            seen: Vec::new(),
            var_inc: 1.0,
            cla_inc: 1.0,
            ok: true,
            model: Vec::new(),
            max_learnts: 0.0,
            num_learnts: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            conflict_budget: None,
            stats: Stats::default(),
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.assigns.len() as u32
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.iter().filter(|c| !c.deleted && !c.learnt).count()
    }

    /// Makes variables `0..n` available.
    pub fn reserve_vars(&mut self, n: u32) {
        while self.num_vars() < n {
            let v = self.num_vars();
            self.assigns.push(LBool::Undef);
            self.level.push(0);
            self.reason.push(None);
            self.polarity.push(true);
            self.activity.push(0.0);
            self.seen.push(false);
            self.watches.push(Vec::new());
            self.watches.push(Vec::new());
            self.heap.insert(v, &self.activity);
        }
    }

    pub fn new_var(&mut self) -> u32 {
        let v = self.num_vars();
        self.reserve_vars(v + 1);
        v
    }

    fn value(&self, l: Lit) -> LBool {
        match self.assigns[l.var() as usize] {
            LBool::Undef => LBool::Undef,
            LBool::True if !l.is_negated() => LBool::True,
            LBool::False if l.is_negated() => LBool::True,
            _ => LBool::False,
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Value of `var` in the last satisfying assignment.
    pub fn model_value(&self, var: u32) -> bool {
        self.model.get(var as usize).copied().unwrap_or(false)
    }

    pub fn lit_model_value(&self, l: Lit) -> bool {
        self.model_value(l.var()) ^ l.is_negated()
    }

    pub fn model(&self) -> &[bool] {
        &self.model
    }

    /// Adds a permanent clause. Returns false once the formula is unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        self.cancel_until(0);
        let max = lits.iter().map(|l| l.var() + 1).max().unwrap_or(0);
        self.reserve_vars(max);
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort();
        c.dedup();
        if c.windows(2).any(|w| w[0] == !w[1]) {
            return true;
        }
        let mut out = Vec::with_capacity(c.len());
        for l in c {
            match self.value(l) {
                LBool::True => return true,
                LBool::False => {}
                LBool::Undef => out.push(l),
            }
        }
        match out.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(out[0], None);
                self.ok = self.propagate().is_none();
                self.ok
            }
            _ => {
                self.attach(out, false);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[(!lits[0]).0 as usize].push(Watcher { cref, blocker: lits[1] });
        self.watches[(!lits[1]).0 as usize].push(Watcher { cref, blocker: lits[0] });
        self.clauses.push(Clause { lits, learnt, activity: 0.0, deleted: false });
        if learnt {
            self.num_learnts += 1;
        }
        cref
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        let v = l.var() as usize;
        self.assigns[v] = if l.is_negated() { LBool::False } else { LBool::True };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let mut ws = std::mem::take(&mut self.watches[p.0 as usize]);
            let false_lit = !p;
            let (mut i, mut j) = (0, 0);
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == LBool::True {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref as usize;
                if self.clauses[cref].deleted {
                    continue;
                }
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                let nw = Watcher { cref: w.cref, blocker: first };
                if first != w.blocker && self.value(first) == LBool::True {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.clauses[cref].lits[k];
                    if self.value(l) != LBool::False {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[(!l).0 as usize].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if self.value(first) == LBool::False {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.cref));
                }
            }
            ws.truncate(j);
            self.watches[p.0 as usize] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var();
            self.assigns[v as usize] = LBool::Undef;
            self.reason[v as usize] = None;
            self.polarity[v as usize] = !l.is_negated();
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = lim;
    }

    fn bump_var(&mut self, v: u32) {
        self.activity[v as usize] += self.var_inc;
        if self.activity[v as usize] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, c: u32) {
        let cl = &mut self.clauses[c as usize];
        cl.activity += self.cla_inc;
        if cl.activity > 1e20 {
            for c in self.clauses.iter_mut().filter(|c| c.learnt) {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit::FALSE];
        let mut path = 0;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl);
            }
            let lits = self.clauses[confl as usize].lits.clone();
            let start = usize::from(p.is_some());
            for &q in &lits[start..] {
                let v = q.var() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(q.var());
                    if self.level[v] >= self.decision_level() {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var() as usize] {
                    break;
                }
            }
            let pl = self.trail[idx];
            p = Some(pl);
            self.seen[pl.var() as usize] = false;
            path -= 1;
            if path == 0 {
                learnt[0] = !pl;
                break;
            }
            confl = self.reason[pl.var() as usize].expect("implied literal has a reason");
        }
        // Recursive minimization: drop literals implied by the rest.
        let abstract_levels = learnt[1..].iter().fold(0u32, |acc, l| acc | 1 << (self.level[l.var() as usize] & 31));
        let mut to_clear: Vec<Lit> = learnt.clone();
        let mut keep = vec![learnt[0]];
        for &l in &learnt[1..] {
            if self.reason[l.var() as usize].is_none() || !self.redundant(l, abstract_levels, &mut to_clear) {
                keep.push(l);
            }
        }
        for l in to_clear {
            self.seen[l.var() as usize] = false;
        }
        let mut learnt = keep;
        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var() as usize] > self.level[learnt[max_i].var() as usize] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var() as usize]
        };
        (learnt, bt)
    }

    fn redundant(&mut self, p: Lit, abstract_levels: u32, to_clear: &mut Vec<Lit>) -> bool {
        let mut stack = vec![p];
        let top = to_clear.len();
        while let Some(q) = stack.pop() {
            let r = self.reason[q.var() as usize].expect("has reason");
            let lits = self.clauses[r as usize].lits.clone();
            for &l in &lits[1..] {
                let v = l.var() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    if self.reason[v].is_some() && (abstract_levels & 1 << (self.level[v] & 31)) != 0 {
                        self.seen[v] = true;
                        stack.push(l);
                        to_clear.push(l);
                    } else {
                        for c in to_clear.drain(top..) {
                            self.seen[c.var() as usize] = false;
                        }
                        return false;
                    }
                }
            }
        }
        true
    }

    fn locked(&self, c: u32) -> bool {
        let l = self.clauses[c as usize].lits[0];
        self.value(l) == LBool::True && self.reason[l.var() as usize] == Some(c)
    }

    fn reduce_db(&mut self) {
        let mut learnts: Vec<u32> = (0..self.clauses.len() as u32)
            .filter(|&c| {
                let cl = &self.clauses[c as usize];
                cl.learnt && !cl.deleted && cl.lits.len() > 2
            })
            .collect();
        learnts.sort_by(|&a, &b| self.clauses[a as usize].activity.total_cmp(&self.clauses[b as usize].activity));
        let half = learnts.len() / 2;
        for &c in &learnts[..half] {
            if !self.locked(c) {
                self.clauses[c as usize].deleted = true;
                self.num_learnts -= 1;
            }
        }
        self.compact_watches();
    }

    fn compact_watches(&mut self) {
        let clauses = &self.clauses;
        for ws in &mut self.watches {
            ws.retain(|w| !clauses[w.cref as usize].deleted);
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        if self.rng.random_ratio(1, 50) && !self.heap.heap.is_empty() {
            let v = self.heap.heap[self.rng.random_range(0..self.heap.heap.len())];
            if self.assigns[v as usize] == LBool::Undef {
                return Some(Lit::new(v, !self.polarity[v as usize]));
            }
        }
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v as usize] == LBool::Undef {
                return Some(Lit::new(v, !self.polarity[v as usize]));
            }
        }
        None
    }

    fn search(&mut self, nof_conflicts: u64, assumptions: &[Lit], budget: &mut Option<u64>) -> Option<SatResult> {
        let mut conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts += 1;
                if let Some(b) = budget {
                    if *b == 0 {
                        return Some(SatResult::Unknown);
                    }
                    *b -= 1;
                }
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Some(SatResult::Unsat);
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    let c = self.attach(learnt, true);
                    self.bump_clause(c);
                    self.enqueue(first, Some(c));
                }
                self.stats.learnts += 1;
                self.var_inc *= 1.0 / 0.95;
                self.cla_inc *= 1.0 / 0.999;
            } else {
                if conflicts >= nof_conflicts {
                    self.cancel_until(0);
                    self.stats.restarts += 1;
                    return None;
                }
                if self.num_learnts as f64 - self.trail.len() as f64 >= self.max_learnts {
                    self.reduce_db();
                }
                let mut next = None;
                while (self.decision_level() as usize) < assumptions.len() {
                    let a = assumptions[self.decision_level() as usize];
                    match self.value(a) {
                        LBool::True => self.trail_lim.push(self.trail.len()),
                        LBool::False => {
                            self.cancel_until(0);
                            return Some(SatResult::Unsat);
                        }
                        LBool::Undef => {
                            next = Some(a);
                            break;
                        }
                    }
                }
                let next = match next {
                    Some(a) => a,
                    None => {
                        self.stats.decisions += 1;
                        match self.pick_branch() {
                            Some(l) => l,
                            None => {
                                self.model = self.assigns.iter().map(|&a| a == LBool::True).collect();
                                self.cancel_until(0);
                                return Some(SatResult::Sat);
                            }
                        }
                    }
                };
                self.trail_lim.push(self.trail.len());
                self.enqueue(next, None);
            }
        }
    }

    /// Solves under `assumptions`. An `Unsat` answer under non-empty
    /// assumptions leaves the solver usable.
    pub fn solve(&mut self, assumptions: &[Lit]) -> SatResult {
        if !self.ok {
            return SatResult::Unsat;
        }
        let max = assumptions.iter().map(|l| l.var() + 1).max().unwrap_or(0);
        self.reserve_vars(max);
        self.cancel_until(0);
        if self.propagate().is_some() {
            self.ok = false;
            return SatResult::Unsat;
        }
        self.max_learnts = (self.num_clauses() as f64 / 3.0).max(2000.0);
        let mut budget = self.conflict_budget;
        let mut restarts = 0;
        loop {
            let n = (luby(2.0, restarts) * 100.0) as u64;
            if let Some(r) = self.search(n, assumptions, &mut budget) {
                self.cancel_until(0);
                return r;
            }
            restarts += 1;
            self.max_learnts *= 1.05;
        }
    }

    /// Checks that the stored model satisfies every original clause.
    pub fn model_satisfies_clauses(&self) -> bool {
        self.clauses
            .iter()
            .filter(|c| !c.learnt && !c.deleted)
            .all(|c| c.lits.iter().any(|&l| self.lit_model_value(l)))
    }
}
