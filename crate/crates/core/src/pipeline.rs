// SPDX-License-Identifier: Apache-2.0

//! End-to-end commands over an output directory.
//!
//! Layout: `manifest.json` and `cache/` from generate, `designs/` and
//! `dataset.csv` from label, `heatmap.json`, `heatmap.csv`, `passatk.csv` and
//! `keywords.csv` from metrics, `report.txt` and `report.json` from report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, CatalogError, Difficulty, ProblemSpec};
use crate::checker::{check, explain, CheckOptions, RootCause, Verdict};
use crate::diag::Diagnostic;
use crate::gen::{
    generate_batch, load_provider_configs, BatchStats, Cache, ChatProvider, Generation, Provider, ProviderError,
    StubMix, StubProvider,
};
use crate::metrics::{
    export_csv, heatmap_csv, heatmap_json, import_csv, keyword_frequency, keywords_csv, label_corpus, pass_at_k_table,
    passatk_csv, prepare, DatasetRow, KeywordHistogram, Label, LabelOptions, MetricsError, PassAtKTable, RateScope,
    Stage,
};
use crate::property::{compile_obligation, parse_property, SafetyObligation};
use crate::trace::Trace;
use crate::ts::elaborate_source;
use crate::TOOLKIT_VERSION;

pub const MANIFEST: &str = "manifest.json";
pub const CACHE_DIR: &str = "cache";
pub const DATASET: &str = "dataset.csv";
pub const HEATMAP_JSON: &str = "heatmap.json";
pub const HEATMAP_CSV: &str = "heatmap.csv";
pub const PASSATK_CSV: &str = "passatk.csv";
pub const KEYWORDS_CSV: &str = "keywords.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{file} not found in {dir}: run {command} first")]
    Missing { file: String, dir: String, command: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Catalog(#[from] CatalogError),
    #[error("{0}")]
    Provider(#[from] ProviderError),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{count} generation(s) missing or failed (first: {first}); rerun generate to retry them")]
    Generations { count: usize, first: String },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn require(out: &Path, file: &str, command: &str) -> Result<PathBuf, PipelineError> {
    let p = out.join(file);
    if p.is_file() {
        Ok(p)
    } else {
        Err(PipelineError::Missing { file: file.into(), dir: out.display().to_string(), command: command.into() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderEntry {
    Stub { id: String, mix: StubMix },
    Chat { id: String, model: String, temperature: f64 },
}

impl ProviderEntry {
    pub fn id(&self) -> &str {
        match self {
            ProviderEntry::Stub { id, .. } | ProviderEntry::Chat { id, .. } => id,
        }
    }
}

/// What generate produced; label reads it back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub seed: u64,
    pub n: u32,
    pub providers: Vec<ProviderEntry>,
    pub problems: Vec<String>,
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Manifest, PipelineError> {
        let p = require(out, MANIFEST, "generate")?;
        let text = fs::read_to_string(&p).map_err(io_err(&p))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Format { path: p.display().to_string(), message: e.to_string() })
    }
}

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub n: u32,
    pub workers: usize,
    /// Use the offline stub providers.
    pub stub: bool,
    /// Provider definitions (TOML) when not using stubs.
    pub providers_file: Option<PathBuf>,
    pub cwe: Option<u32>,
    pub difficulty: Option<Difficulty>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerateSummary {
    pub generations: usize,
    pub provider_calls: u64,
    pub cache_hits: u64,
    pub failures: u64,
}

/// Fills the response cache and writes the manifest.
pub fn generate(cfg: &GenerateConfig) -> Result<GenerateSummary, PipelineError> {
    let catalog = Catalog::builtin();
    let specs = catalog.list(cfg.cwe, cfg.difficulty)?;
    let (providers, entries): (Vec<Box<dyn Provider>>, Vec<ProviderEntry>) = match (&cfg.providers_file, cfg.stub) {
        (None, true) => StubProvider::defaults(cfg.seed)
            .into_iter()
            .map(|p| {
                let e = ProviderEntry::Stub { id: p.id.clone(), mix: p.mix };
                (Box::new(p) as Box<dyn Provider>, e)
            })
            .unzip(),
        (Some(path), false) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            load_provider_configs(&text)?
                .into_iter()
                .map(|c| {
                    let e = ProviderEntry::Chat { id: c.id.clone(), model: c.model.clone(), temperature: c.temperature };
                    (Box::new(ChatProvider::http(c)) as Box<dyn Provider>, e)
                })
                .unzip()
        }
        (Some(_), true) => return Err(PipelineError::Usage("--stub and --providers are mutually exclusive".into())),
        (None, false) => return Err(PipelineError::Usage("pass --stub or --providers <file>".into())),
    };
    let cache = Cache::new(cfg.out.join(CACHE_DIR));
    let stats = BatchStats::default();
    let mut count = 0;
    for p in &providers {
        log::info!("generating {} x {} with {}", specs.len(), cfg.n, p.id());
        count += generate_batch(&specs, p.as_ref(), cfg.n, Some(&cache), cfg.workers, &stats).len();
    }
    let manifest = Manifest {
        toolkit_version: TOOLKIT_VERSION.into(),
        seed: cfg.seed,
        n: cfg.n,
        providers: entries,
        problems: specs.iter().map(|s| s.id()).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).unwrap_or_default() + "\n";
    write_file(&cfg.out.join(MANIFEST), json)?;
    Ok(GenerateSummary {
        generations: count,
        provider_calls: stats.provider_calls(),
        cache_hits: stats.cache_hits(),
        failures: stats.failures(),
    })
}

/// Labels every generation named in the manifest and writes `dataset.csv`.
///
/// The seed recorded in the rows is the manifest's.
pub fn label(out: &Path, check: &CheckOptions, workers: usize, record_runtime: bool) -> Result<Vec<DatasetRow>, PipelineError> {
    let m = Manifest::load(out)?;
    let cache = Cache::new(out.join(CACHE_DIR));
    let mut gens: Vec<Generation> = Vec::new();
    let mut bad: Vec<String> = Vec::new();
    for p in &m.providers {
        for problem in &m.problems {
            for i in 0..m.n {
                match cache.load(p.id(), problem, i) {
                    Some(g) if g.succeeded() => gens.push(g),
                    _ => bad.push(format!("{} {problem} #{i}", p.id())),
                }
            }
        }
    }
    if let Some(first) = bad.first() {
        return Err(PipelineError::Generations { count: bad.len(), first: first.clone() });
    }
    let opts = LabelOptions { check: check.clone(), seed: m.seed, workers, record_runtime };
    let rows = label_corpus(&gens, Catalog::builtin(), &opts)?;
    for (g, r) in gens.iter().zip(&rows) {
        if let Some(src) = &g.extracted {
            write_file(&out.join(&r.source_path), src)?;
        }
    }
    let path = out.join(DATASET);
    export_csv(&rows, &path)?;
    Ok(rows)
}

pub fn load_dataset(out: &Path) -> Result<Vec<DatasetRow>, PipelineError> {
    let p = require(out, DATASET, "label")?;
    Ok(import_csv(p)?)
}

fn dataset_seed(rows: &[DatasetRow]) -> u64 {
    rows.first().map(|r| r.seed).unwrap_or(0)
}

/// Keyword histograms: the whole corpus first, then each provider.
pub fn corpus_keywords(out: &Path, rows: &[DatasetRow], providers: &[String]) -> Vec<(String, KeywordHistogram)> {
    let source = |r: &DatasetRow| (r.lines_of_code > 0).then(|| fs::read_to_string(out.join(&r.source_path)).ok()).flatten();
    let all: Vec<(String, String)> = rows.iter().filter_map(|r| source(r).map(|s| (r.provider.clone(), s))).collect();
    let mut v = vec![("all".to_string(), keyword_frequency(&all.iter().map(|(_, s)| s.as_str()).collect::<Vec<_>>()))];
    for p in providers {
        let srcs: Vec<&str> = all.iter().filter(|(q, _)| q == p).map(|(_, s)| s.as_str()).collect();
        v.push((p.clone(), keyword_frequency(&srcs)));
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub table: PassAtKTable,
    pub seed: u64,
    pub written: Vec<PathBuf>,
}

/// Writes the heatmap, Pass@k and keyword artifacts.
pub fn metrics(out: &Path) -> Result<MetricsSummary, PipelineError> {
    let rows = load_dataset(out)?;
    let seed = dataset_seed(&rows);
    let table = pass_at_k_table(&rows)?;
    let h = crate::metrics::heatmap(&rows)?;
    let kw = corpus_keywords(out, &rows, &table.shape.providers);
    let files = [
        (HEATMAP_JSON, heatmap_json(&h, seed)),
        (HEATMAP_CSV, heatmap_csv(&table, seed)),
        (PASSATK_CSV, passatk_csv(&table, seed)),
        (KEYWORDS_CSV, keywords_csv(&kw, seed)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let p = out.join(name);
        write_file(&p, body)?;
        written.push(p);
    }
    Ok(MetricsSummary { table, seed, written })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderSummary {
    pub provider: String,
    pub designs: u64,
    pub proven: u64,
    pub falsified: u64,
    pub unknown: u64,
    pub compile_error: u64,
    /// Keyed by difficulty.
    pub pass_at_k: Vec<(Difficulty, f64)>,
    pub pass_at_k_compilable: Vec<(Difficulty, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub toolkit_version: String,
    pub seed: u64,
    pub designs: usize,
    pub n: u32,
    pub cwes: Vec<u32>,
    pub difficulties: Vec<Difficulty>,
    pub providers: Vec<ProviderSummary>,
    /// Falsified designs plus code that failed to compile, over all designs.
    pub vulnerable_or_broken_share: f64,
}

pub fn build_report(rows: &[DatasetRow]) -> Result<Report, PipelineError> {
    let table = pass_at_k_table(rows)?;
    let providers = table
        .shape
        .providers
        .iter()
        .map(|p| {
            let cells: Vec<_> = table.by_difficulty.iter().filter(|c| &c.provider == p).collect();
            let sum = |f: fn(&crate::metrics::CellCounts) -> u64| cells.iter().map(|c| f(&c.counts)).sum::<u64>();
            let rate = |inc: bool| {
                cells
                    .iter()
                    .filter_map(|c| match c.scope {
                        RateScope::Difficulty(d) => Some((d, if inc { c.rate_include } else { c.rate_exclude })),
                        RateScope::Cwe(_) => None,
                    })
                    .collect()
            };
            ProviderSummary {
                provider: p.clone(),
                designs: sum(|c| c.total()),
                proven: sum(|c| c.proven),
                falsified: sum(|c| c.falsified),
                unknown: sum(|c| c.unknown),
                compile_error: sum(|c| c.compile_error),
                pass_at_k: rate(true),
                pass_at_k_compilable: rate(false),
            }
        })
        .collect();
    let bad = rows
        .iter()
        .filter(|r| r.verdict == Label::Falsified || (r.verdict == Label::CompileError && r.lines_of_code > 0))
        .count();
    Ok(Report {
        toolkit_version: TOOLKIT_VERSION.into(),
        seed: dataset_seed(rows),
        designs: rows.len(),
        n: table.shape.n,
        cwes: table.shape.cwes.clone(),
        difficulties: table.shape.difficulties.clone(),
        providers,
        vulnerable_or_broken_share: bad as f64 / rows.len().max(1) as f64,
    })
}

impl Report {
    fn rate_table(&self, out: &mut String, title: &str, pick: fn(&ProviderSummary) -> &Vec<(Difficulty, f64)>) {
        let w = self.providers.iter().map(|p| p.provider.len()).max().unwrap_or(0).max(8);
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "  {:<w$}", "provider");
        for d in &self.difficulties {
            let _ = write!(out, "  {:>12}", d.as_str());
        }
        out.push('\n');
        for p in &self.providers {
            let _ = write!(out, "  {:<w$}", p.provider);
            for (_, r) in pick(p) {
                let _ = write!(out, "  {r:>12.3}");
            }
            out.push('\n');
        }
        out.push('\n');
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hwcwe report (toolkit {}, seed {})", self.toolkit_version, self.seed);
        let _ = writeln!(
            s,
            "corpus: {} designs, {} providers, {} CWEs, {} difficulties, n = {}\n",
            self.designs,
            self.providers.len(),
            self.cwes.len(),
            self.difficulties.len(),
            self.n
        );
        self.rate_table(&mut s, "Pass@k, all designs", |p| &p.pass_at_k);
        self.rate_table(&mut s, "Pass@k, compilable designs only", |p| &p.pass_at_k_compilable);
        let w = self.providers.iter().map(|p| p.provider.len()).max().unwrap_or(0).max(8);
        let _ = writeln!(s, "Verdicts");
        let _ = writeln!(s, "  {:<w$}  {:>7}  {:>9}  {:>7}  {:>13}", "provider", "proven", "falsified", "unknown", "compile_error");
        for p in &self.providers {
            let _ = writeln!(
                s,
                "  {:<w$}  {:>7}  {:>9}  {:>7}  {:>13}",
                p.provider, p.proven, p.falsified, p.unknown, p.compile_error
            );
        }
        let _ = writeln!(s, "\nvulnerable or broken: {:.1}%", 100.0 * self.vulnerable_or_broken_share);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default() + "\n"
    }
}

/// Builds the report and writes `report.txt` and `report.json`.
pub fn report(out: &Path) -> Result<Report, PipelineError> {
    let rows = load_dataset(out)?;
    let r = build_report(&rows)?;
    write_file(&out.join(REPORT_TXT), r.to_text())?;
    write_file(&out.join(REPORT_JSON), r.to_json())?;
    Ok(r)
}

/// Result of checking one file.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub problem: String,
    pub property: String,
    pub verdict: Verdict,
    pub causes: Vec<RootCause>,
    pub obligation: Option<SafetyObligation>,
    pub runtime_ms: u128,
}

impl VerifyReport {
    pub fn label(&self) -> Label {
        Label::from(&self.verdict)
    }

    pub fn exit_code(&self) -> i32 {
        self.label().exit_code()
    }

    pub fn trace(&self) -> Option<&Trace> {
        match &self.verdict {
            Verdict::Falsified { trace, .. } => Some(trace),
            _ => None,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.verdict {
            Verdict::Proven { k } => {
                let _ = writeln!(s, "{}: proven (k={k})", self.problem);
            }
            Verdict::Falsified { trace, depth } => {
                let _ = writeln!(s, "{}: falsified (counterexample depth {depth})", self.problem);
                let _ = writeln!(s, "property: {}", self.property);
                for c in &self.causes {
                    let _ = writeln!(
                        s,
                        "violation driven by line {}: {} ({} assigned in cycle {})",
                        c.line,
                        c.text.trim(),
                        c.state,
                        c.cycle
                    );
                }
                if let Some(o) = &self.obligation {
                    s.push_str(&trace_table(trace, o.design_states));
                }
            }
            Verdict::Unknown { max_k, reason } => {
                let _ = writeln!(s, "{}: unknown after k={max_k} ({reason})", self.problem);
            }
            Verdict::CompileError { diagnostics } => {
                let _ = writeln!(s, "{}: compile_error", self.problem);
                for d in diagnostics {
                    let _ = writeln!(s, "  {d}");
                }
            }
        }
        s
    }
}

/// Inputs and design state per cycle, one row per cycle.
pub fn trace_table(trace: &Trace, design_states: usize) -> String {
    let mut cols: Vec<(String, Vec<u64>)> = Vec::new();
    for (i, sig) in trace.inputs.iter().enumerate() {
        cols.push((sig.name.clone(), trace.input_values.iter().map(|v| v[i]).collect()));
    }
    for (i, sig) in trace.states.iter().enumerate().take(design_states) {
        cols.push((sig.name.clone(), trace.state_values.iter().map(|v| v[i]).collect()));
    }
    let cells: Vec<Vec<String>> = cols.iter().map(|(_, v)| v.iter().map(|x| format!("{x:#x}")).collect()).collect();
    let widths: Vec<usize> =
        cols.iter().zip(&cells).map(|((n, _), c)| c.iter().map(String::len).max().unwrap_or(0).max(n.len())).collect();
    let mut s = String::from("trace:\n  cycle");
    for ((n, _), w) in cols.iter().zip(&widths) {
        let _ = write!(s, "  {n:>w$}");
    }
    s.push('\n');
    for t in 0..trace.len() {
        let _ = write!(s, "  {t:>5}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(s, "  {:>w$}", c[t]);
        }
        s.push('\n');
    }
    s
}

fn compile_error(problem: String, property: String, diagnostics: Vec<Diagnostic>, start: Instant) -> VerifyReport {
    VerifyReport {
        problem,
        property,
        verdict: Verdict::CompileError { diagnostics },
        causes: Vec::new(),
        obligation: None,
        runtime_ms: start.elapsed().as_millis(),
    }
}

/// Checks `source` against the problem's property, or `property` when given.
pub fn verify(source: &str, spec: &ProblemSpec, property: Option<&str>, opts: &CheckOptions) -> VerifyReport {
    let start = Instant::now();
    let problem = spec.id();
    let catalog = Catalog::builtin();
    let obl = match property {
        None => {
            let text = catalog.property_text(spec).unwrap_or_default();
            match prepare(spec, source) {
                Ok(o) => o,
                Err((Stage::Extract, _)) => {
                    let d = Diagnostic::error(Default::default(), "no design in input");
                    return compile_error(problem, text, vec![d], start);
                }
                Err((_, d)) => return compile_error(problem, text, d, start),
            }
        }
        Some(text) => {
            let ts = match elaborate_source(&spec.checkable_source(source), Some(spec.top_module())) {
                Ok(ts) => ts,
                Err(d) => return compile_error(problem, text.into(), d, start),
            };
            match parse_property(text, &ts).and_then(|p| compile_obligation(&p, &ts)) {
                Ok(o) => o,
                Err(d) => return compile_error(problem, text.into(), vec![d], start),
            }
        }
    };
    let verdict = check(&obl, opts);
    let causes = match &verdict {
        Verdict::Falsified { trace, depth } => explain(&obl, trace, *depth as usize),
        _ => Vec::new(),
    };
    VerifyReport {
        problem,
        property: obl.property.to_text(),
        verdict,
        causes,
        obligation: Some(obl),
        runtime_ms: start.elapsed().as_millis(),
    }
}
