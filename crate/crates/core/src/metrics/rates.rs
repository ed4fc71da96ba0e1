// SPDX-License-Identifier: Apache-2.0

//! Pass@k tables and provider x CWE heatmaps.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::{DatasetRow, Label, MetricsError};
use crate::catalog::{Difficulty, CWE_IDS};
use crate::TOOLKIT_VERSION;

/// `correct / (num_cwes * n)`; zero when the denominator is.
pub fn pass_rate(correct: u64, num_cwes: u64, n: u64) -> f64 {
    let d = num_cwes * n;
    if d == 0 {
        0.0
    } else {
        correct as f64 / d as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CellCounts {
    pub proven: u64,
    pub falsified: u64,
    pub unknown: u64,
    pub compile_error: u64,
}

impl CellCounts {
    pub fn add(&mut self, l: Label) {
        match l {
            Label::Proven => self.proven += 1,
            Label::Falsified => self.falsified += 1,
            Label::Unknown => self.unknown += 1,
            Label::CompileError => self.compile_error += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.proven + self.falsified + self.unknown + self.compile_error
    }

    /// Proven share. Without non-compilable designs the compile errors leave
    /// both numerator and denominator.
    pub fn rate(&self, include_noncompilable: bool) -> f64 {
        let d = if include_noncompilable { self.total() } else { self.total() - self.compile_error };
        pass_rate(self.proven, 1, d)
    }
}

/// Providers, CWEs, difficulties and regenerations spanned by a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusShape {
    pub providers: Vec<String>,
    pub cwes: Vec<u32>,
    pub difficulties: Vec<Difficulty>,
    pub n: u32,
}

type Key<'a> = (&'a str, u32, Difficulty, u32);

impl CorpusShape {
    pub fn of(rows: &[DatasetRow]) -> CorpusShape {
        let mut providers: Vec<String> = Vec::new();
        for r in rows {
            if !providers.contains(&r.provider) {
                providers.push(r.provider.clone());
            }
        }
        let mut cwes: Vec<u32> = CWE_IDS.iter().copied().filter(|c| rows.iter().any(|r| r.cwe_id == *c)).collect();
        let mut extra: Vec<u32> = rows.iter().map(|r| r.cwe_id).filter(|c| !CWE_IDS.contains(c)).collect();
        extra.sort_unstable();
        extra.dedup();
        cwes.extend(extra);
        let difficulties = Difficulty::ALL.iter().copied().filter(|d| rows.iter().any(|r| r.difficulty == *d)).collect();
        let n = rows.iter().map(|r| r.regen_index + 1).max().unwrap_or(0);
        CorpusShape { providers, cwes, difficulties, n }
    }
}

struct Index<'a> {
    shape: CorpusShape,
    map: HashMap<Key<'a>, Label>,
}

impl<'a> Index<'a> {
    fn new(rows: &'a [DatasetRow]) -> Self {
        let map = rows.iter().map(|r| ((r.provider.as_str(), r.cwe_id, r.difficulty, r.regen_index), r.verdict)).collect();
        Index { shape: CorpusShape::of(rows), map }
    }

    /// Counts over the selected cells, or the cells that are missing.
    fn collect(&self, provider: &str, scope: Option<RateScope>) -> Result<CellCounts, Vec<String>> {
        let mut counts = CellCounts::default();
        let mut missing = Vec::new();
        for &c in &self.shape.cwes {
            for &d in &self.shape.difficulties {
                match scope {
                    Some(RateScope::Cwe(x)) if x != c => continue,
                    Some(RateScope::Difficulty(x)) if x != d => continue,
                    _ => {}
                }
                for i in 0..self.shape.n {
                    match self.map.get(&(provider, c, d, i)) {
                        Some(l) => counts.add(*l),
                        None => missing.push(format!("{provider} cwe{c}-{d} #{i}")),
                    }
                }
            }
        }
        if missing.is_empty() {
            Ok(counts)
        } else {
            Err(missing)
        }
    }
}

fn incomplete(scope: String, mut missing: Vec<String>) -> MetricsError {
    const SHOWN: usize = 20;
    if missing.len() > SHOWN {
        let more = missing.len() - SHOWN;
        missing.truncate(SHOWN);
        missing.push(format!("and {more} more"));
    }
    MetricsError::Incomplete { scope, missing }
}

/// Pass@k of one provider at one difficulty.
pub fn pass_at_k(
    rows: &[DatasetRow],
    provider: &str,
    difficulty: Difficulty,
    include_noncompilable: bool,
) -> Result<f64, MetricsError> {
    let idx = Index::new(rows);
    if !idx.shape.providers.iter().any(|p| p == provider) {
        return Err(MetricsError::Empty(format!("provider {provider}")));
    }
    if !idx.shape.difficulties.contains(&difficulty) {
        return Err(MetricsError::Empty(format!("difficulty {difficulty}")));
    }
    idx.collect(provider, Some(RateScope::Difficulty(difficulty)))
        .map(|c| c.rate(include_noncompilable))
        .map_err(|m| incomplete(format!("{provider}/{difficulty}"), m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateScope {
    Difficulty(Difficulty),
    Cwe(u32),
}

impl RateScope {
    pub fn kind(&self) -> &'static str {
        match self {
            RateScope::Difficulty(_) => "difficulty",
            RateScope::Cwe(_) => "cwe",
        }
    }
}

impl fmt::Display for RateScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateScope::Difficulty(d) => write!(f, "{d}"),
            RateScope::Cwe(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCell {
    pub provider: String,
    pub scope: RateScope,
    pub counts: CellCounts,
    /// All designs in the denominator.
    pub rate_include: f64,
    /// Compile errors dropped from the denominator.
    pub rate_exclude: f64,
}

impl RateCell {
    fn new(provider: &str, scope: RateScope, counts: CellCounts) -> Self {
        RateCell {
            provider: provider.to_string(),
            scope,
            counts,
            rate_include: counts.rate(true),
            rate_exclude: counts.rate(false),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassAtKTable {
    pub shape: CorpusShape,
    pub by_difficulty: Vec<RateCell>,
    pub by_cwe: Vec<RateCell>,
}

impl PassAtKTable {
    pub fn cell(&self, provider: &str, scope: RateScope) -> Option<&RateCell> {
        self.by_difficulty.iter().chain(&self.by_cwe).find(|c| c.provider == provider && c.scope == scope)
    }
}

/// Every (provider, difficulty) and (provider, CWE) cell of a complete corpus.
pub fn pass_at_k_table(rows: &[DatasetRow]) -> Result<PassAtKTable, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::Empty("corpus".into()));
    }
    let idx = Index::new(rows);
    let mut missing = Vec::new();
    for p in &idx.shape.providers {
        if let Err(m) = idx.collect(p, None) {
            missing.extend(m);
        }
    }
    if !missing.is_empty() {
        return Err(incomplete("corpus".into(), missing));
    }
    let mut by_difficulty = Vec::new();
    let mut by_cwe = Vec::new();
    for p in &idx.shape.providers {
        for &d in &idx.shape.difficulties {
            let s = RateScope::Difficulty(d);
            by_difficulty.push(RateCell::new(p, s, idx.collect(p, Some(s)).unwrap_or_default()));
        }
        for &c in &idx.shape.cwes {
            let s = RateScope::Cwe(c);
            by_cwe.push(RateCell::new(p, s, idx.collect(p, Some(s)).unwrap_or_default()));
        }
    }
    Ok(PassAtKTable { shape: idx.shape, by_difficulty, by_cwe })
}

/// Provider x CWE pass rates, each cell over n regenerations of every difficulty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub providers: Vec<String>,
    pub cwes: Vec<u32>,
    pub designs_per_cell: u64,
    pub exclude_noncompilable: Vec<Vec<f64>>,
    pub include_noncompilable: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn matrix(&self, include_noncompilable: bool) -> &[Vec<f64>] {
        if include_noncompilable {
            &self.include_noncompilable
        } else {
            &self.exclude_noncompilable
        }
    }
}

pub fn heatmap(rows: &[DatasetRow]) -> Result<Heatmap, MetricsError> {
    Ok(heatmap_from(&pass_at_k_table(rows)?))
}

fn heatmap_from(t: &PassAtKTable) -> Heatmap {
    let row = |p: &str, inc: bool| -> Vec<f64> {
        t.shape
            .cwes
            .iter()
            .map(|&c| {
                t.cell(p, RateScope::Cwe(c)).map(|x| if inc { x.rate_include } else { x.rate_exclude }).unwrap_or(0.0)
            })
            .collect()
    };
    Heatmap {
        providers: t.shape.providers.clone(),
        cwes: t.shape.cwes.clone(),
        designs_per_cell: t.shape.n as u64 * t.shape.difficulties.len() as u64,
        exclude_noncompilable: t.shape.providers.iter().map(|p| row(p, false)).collect(),
        include_noncompilable: t.shape.providers.iter().map(|p| row(p, true)).collect(),
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    toolkit_version: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: &'a T,
}

pub fn heatmap_json(h: &Heatmap, seed: u64) -> String {
    let s = Stamped { toolkit_version: TOOLKIT_VERSION, seed, body: h };
    serde_json::to_string_pretty(&s).unwrap_or_default() + "\n"
}

fn to_csv(header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut wr = csv::Writer::from_writer(Vec::new());
    let write = || -> csv::Result<()> {
        wr.write_record(header)?;
        for r in records {
            wr.write_record(&r)?;
        }
        wr.flush()?;
        Ok(())
    };
    write().expect("writing CSV to memory");
    String::from_utf8(wr.into_inner().unwrap_or_default()).unwrap_or_default()
}

pub fn heatmap_csv(t: &PassAtKTable, seed: u64) -> String {
    to_csv(
        &["provider", "cwe_id", "designs", "proven", "compile_error", "rate_exclude_noncompilable", "rate_include_noncompilable", "toolkit_version", "seed"],
        t.by_cwe.iter().map(|c| {
            vec![
                c.provider.clone(),
                c.scope.to_string(),
                c.counts.total().to_string(),
                c.counts.proven.to_string(),
                c.counts.compile_error.to_string(),
                c.rate_exclude.to_string(),
                c.rate_include.to_string(),
                TOOLKIT_VERSION.to_string(),
                seed.to_string(),
            ]
        }),
    )
}

/// Every cell of the table, difficulty cells first.
pub fn passatk_csv(t: &PassAtKTable, seed: u64) -> String {
    to_csv(
        &[
            "provider",
            "scope",
            "key",
            "designs",
            "proven",
            "falsified",
            "unknown",
            "compile_error",
            "pass_at_k",
            "pass_at_k_compilable",
            "toolkit_version",
            "seed",
        ],
        t.by_difficulty.iter().chain(&t.by_cwe).map(|c| {
            vec![
                c.provider.clone(),
                c.scope.kind().to_string(),
                c.scope.to_string(),
                c.counts.total().to_string(),
                c.counts.proven.to_string(),
                c.counts.falsified.to_string(),
                c.counts.unknown.to_string(),
                c.counts.compile_error.to_string(),
                c.rate_include.to_string(),
                c.rate_exclude.to_string(),
                TOOLKIT_VERSION.to_string(),
                seed.to_string(),
            ]
        }),
    )
}
