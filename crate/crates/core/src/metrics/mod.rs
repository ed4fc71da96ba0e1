// SPDX-License-Identifier: Apache-2.0

//! Labeling generated designs and computing corpus metrics.

mod keywords;
mod rates;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, CatalogError, Difficulty, ProblemSpec};
use crate::checker::{check, CheckOptions, Verdict};
use crate::diag::Diagnostic;
use crate::gen::Generation;
use crate::property::{compile_obligation, SafetyObligation};
use crate::ts::elaborate_source;
use crate::TOOLKIT_VERSION;

pub use keywords::{keyword_frequency, keyword_frequency_with, keywords_csv, KeywordHistogram, DEFAULT_KEYWORDS};
pub use rates::{
    heatmap, heatmap_csv, heatmap_json, pass_at_k, pass_at_k_table, pass_rate, passatk_csv, CellCounts, CorpusShape,
    Heatmap, PassAtKTable, RateCell, RateScope,
};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected CSV header: {0}")]
    Header(String),
    #[error("row {row}: {message}")]
    Invalid { row: usize, message: String },
    #[error("duplicate row for {0}")]
    Duplicate(String),
    #[error("incomplete scope {scope}: missing {}", missing.join(", "))]
    Incomplete { scope: String, missing: Vec<String> },
    #[error("no rows for {0}")]
    Empty(String),
    #[error("{0}")]
    Catalog(#[from] CatalogError),
}

/// Verdict recorded for one design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Proven,
    Falsified,
    Unknown,
    CompileError,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Proven, Label::Falsified, Label::Unknown, Label::CompileError];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Proven => "proven",
            Label::Falsified => "falsified",
            Label::Unknown => "unknown",
            Label::CompileError => "compile_error",
        }
    }

    /// Process exit code for this verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Label::Proven => 0,
            Label::Falsified => 1,
            Label::Unknown => 2,
            Label::CompileError => 3,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Label::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| format!("unknown verdict `{s}`"))
    }
}

impl From<&Verdict> for Label {
    fn from(v: &Verdict) -> Self {
        match v {
            Verdict::Proven { .. } => Label::Proven,
            Verdict::Falsified { .. } => Label::Falsified,
            Verdict::Unknown { .. } => Label::Unknown,
            Verdict::CompileError { .. } => Label::CompileError,
        }
    }
}

/// One labeled design. Column order is the CSV header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub design_id: String,
    pub provider: String,
    pub cwe_id: u32,
    pub difficulty: Difficulty,
    pub regen_index: u32,
    pub verdict: Label,
    pub cex_depth: Option<u32>,
    pub k_used: Option<u32>,
    pub lines_of_code: u32,
    /// Absent unless timings were requested.
    pub runtime_ms: Option<u64>,
    pub source_path: String,
    pub property_id: String,
    pub toolkit_version: String,
    pub seed: u64,
}

pub const CSV_HEADER: [&str; 14] = [
    "design_id",
    "provider",
    "cwe_id",
    "difficulty",
    "regen_index",
    "verdict",
    "cex_depth",
    "k_used",
    "lines_of_code",
    "runtime_ms",
    "source_path",
    "property_id",
    "toolkit_version",
    "seed",
];

impl DatasetRow {
    /// Uniqueness key.
    pub fn key(&self) -> (String, u32, Difficulty, u32) {
        (self.provider.clone(), self.cwe_id, self.difficulty, self.regen_index)
    }

    fn key_string(&self) -> String {
        format!("{} cwe{}-{} #{}", self.provider, self.cwe_id, self.difficulty, self.regen_index)
    }

    /// Checks the verdict/column invariants.
    pub fn validate(&self) -> Result<(), String> {
        if (self.verdict == Label::Falsified) != self.cex_depth.is_some() {
            return Err(format!("cex_depth must be present exactly when falsified ({})", self.key_string()));
        }
        if (self.verdict == Label::Proven) != self.k_used.is_some() {
            return Err(format!("k_used must be present exactly when proven ({})", self.key_string()));
        }
        Ok(())
    }
}

/// Rejects rows that break an invariant or repeat a key.
pub fn validate_rows(rows: &[DatasetRow]) -> Result<(), MetricsError> {
    let mut seen = HashSet::new();
    for (i, r) in rows.iter().enumerate() {
        r.validate().map_err(|message| MetricsError::Invalid { row: i + 1, message })?;
        if !seen.insert(r.key()) {
            return Err(MetricsError::Duplicate(r.key_string()));
        }
    }
    Ok(())
}

pub fn write_csv<W: Write>(rows: &[DatasetRow], w: W) -> Result<(), MetricsError> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<DatasetRow>, MetricsError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(MetricsError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut rows = Vec::new();
    for rec in rd.deserialize() {
        rows.push(rec?);
    }
    validate_rows(&rows)?;
    Ok(rows)
}

/// Writes `rows` as CSV with the fixed header.
pub fn export_csv(rows: &[DatasetRow], path: impl AsRef<std::path::Path>) -> Result<(), MetricsError> {
    validate_rows(rows)?;
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn import_csv(path: impl AsRef<std::path::Path>) -> Result<Vec<DatasetRow>, MetricsError> {
    read_csv(std::fs::File::open(path)?)
}

/// Pipeline stage that rejected a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extract,
    Elaborate,
    Property,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Extract => "extraction",
            Stage::Elaborate => "parse/elaboration",
            Stage::Property => "property instantiation",
        })
    }
}

/// Parses, elaborates and attaches the problem's property to `source`.
pub fn prepare(spec: &ProblemSpec, source: &str) -> Result<SafetyObligation, (Stage, Vec<Diagnostic>)> {
    if source.trim().is_empty() {
        return Err((Stage::Extract, Vec::new()));
    }
    let ts = elaborate_source(&spec.checkable_source(source), Some(spec.top_module()))
        .map_err(|d| (Stage::Elaborate, d))?;
    let prop = Catalog::builtin().instantiate_property(spec, &ts).map_err(|e| match e {
        CatalogError::Property { diag, .. } => (Stage::Property, vec![diag]),
        other => (Stage::Property, vec![Diagnostic::error(crate::diag::Loc::default(), other.to_string())]),
    })?;
    compile_obligation(&prop, &ts).map_err(|d| (Stage::Property, vec![d]))
}

/// Verdict summary of one adjudication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub verdict: Label,
    pub cex_depth: Option<u32>,
    pub k_used: Option<u32>,
}

/// Checks `source` (extracted code, if any) against `spec`.
pub fn adjudicate(spec: &ProblemSpec, source: Option<&str>, opts: &CheckOptions) -> Outcome {
    let compile_error = Outcome { verdict: Label::CompileError, cex_depth: None, k_used: None };
    let Some(src) = source else { return compile_error };
    let obl = match prepare(spec, src) {
        Ok(o) => o,
        Err((stage, diags)) => {
            log::debug!("{}: {stage} failed: {}", spec.id(), diags.first().map(|d| d.to_string()).unwrap_or_default());
            return compile_error;
        }
    };
    let v = check(&obl, opts);
    Outcome {
        verdict: Label::from(&v),
        cex_depth: match v {
            Verdict::Falsified { depth, .. } => Some(depth),
            _ => None,
        },
        k_used: match v {
            Verdict::Proven { k } => Some(k),
            _ => None,
        },
    }
}

fn path_part(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

/// Relative path under which a generation's extracted source is stored.
pub fn design_path(provider: &str, problem_id: &str, regen_index: u32) -> String {
    format!("designs/{}/{}/{regen_index}.sv", path_part(provider), path_part(problem_id))
}

fn count_lines(src: Option<&str>) -> u32 {
    src.map(|s| s.lines().filter(|l| !l.trim().is_empty()).count() as u32).unwrap_or(0)
}

fn make_row(gen: &Generation, spec: &ProblemSpec, o: Outcome, runtime_ms: Option<u64>, seed: u64) -> DatasetRow {
    DatasetRow {
        design_id: format!("{}/{}/{}", gen.provider, gen.problem_id, gen.regen_index),
        provider: gen.provider.clone(),
        cwe_id: spec.cwe_id,
        difficulty: spec.difficulty,
        regen_index: gen.regen_index,
        verdict: o.verdict,
        cex_depth: o.cex_depth,
        k_used: o.k_used,
        lines_of_code: count_lines(gen.extracted.as_deref()),
        runtime_ms,
        source_path: design_path(&gen.provider, &gen.problem_id, gen.regen_index),
        property_id: format!("{}:{}", spec.id(), spec.property_template_id),
        toolkit_version: TOOLKIT_VERSION.to_string(),
        seed,
    }
}

/// Labels one generation. Every outcome maps to a verdict.
pub fn label_design(gen: &Generation, spec: &ProblemSpec, opts: &CheckOptions, seed: u64) -> DatasetRow {
    debug_assert_eq!(gen.problem_id, spec.id());
    let start = Instant::now();
    let o = adjudicate(spec, gen.extracted.as_deref(), opts);
    make_row(gen, spec, o, Some(start.elapsed().as_millis() as u64), seed)
}

#[derive(Debug, Clone)]
pub struct LabelOptions {
    pub check: CheckOptions,
    pub seed: u64,
    pub workers: usize,
    /// Record wall-clock runtimes (makes the CSV run-dependent).
    pub record_runtime: bool,
}

impl Default for LabelOptions {
    fn default() -> Self {
        LabelOptions { check: CheckOptions::default(), seed: 0, workers: 1, record_runtime: false }
    }
}

/// Labels a corpus, in input order.
///
/// Identical (problem, source) pairs are checked once.
pub fn label_corpus(gens: &[Generation], catalog: &Catalog, opts: &LabelOptions) -> Result<Vec<DatasetRow>, MetricsError> {
    let specs: Vec<&ProblemSpec> = gens.iter().map(|g| catalog.get(&g.problem_id)).collect::<Result<_, _>>()?;
    let mut unique: BTreeMap<(&str, Option<&str>), usize> = BTreeMap::new();
    let mut jobs: Vec<(&ProblemSpec, Option<&str>)> = Vec::new();
    let slots: Vec<usize> = gens
        .iter()
        .zip(&specs)
        .map(|(g, s)| {
            *unique.entry((g.problem_id.as_str(), g.extracted.as_deref())).or_insert_with(|| {
                jobs.push((s, g.extracted.as_deref()));
                jobs.len() - 1
            })
        })
        .collect();
    log::info!("labeling {} generations ({} distinct designs)", gens.len(), jobs.len());
    let run = || {
        jobs.par_iter()
            .map(|(s, src)| {
                let start = Instant::now();
                let o = adjudicate(s, *src, &opts.check);
                (o, start.elapsed().as_millis() as u64)
            })
            .collect::<Vec<_>>()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(opts.workers.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    let rows: Vec<DatasetRow> = gens
        .iter()
        .zip(&specs)
        .zip(slots)
        .map(|((g, s), slot)| {
            let (o, ms) = results[slot];
            make_row(g, s, o, opts.record_runtime.then_some(ms), opts.seed)
        })
        .collect();
    validate_rows(&rows)?;
    Ok(rows)
}
