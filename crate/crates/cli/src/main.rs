// SPDX-License-Identifier: Apache-2.0

//! `hwcwe`: generate, label and score SystemVerilog designs against hardware CWE properties.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hwcwe_core::catalog::{Catalog, Difficulty};
use hwcwe_core::checker::CheckOptions;
use hwcwe_core::pipeline::{self, GenerateConfig, PipelineError};

/// Exit status for runtime failures (bad input files, missing artifacts).
const EXIT_ERROR: u8 = 4;
/// Exit status for command-line usage errors.
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "hwcwe", version, about = "Formal CWE labeling of generated SystemVerilog")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Seed recorded in every artifact
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Parallel jobs
    #[arg(long, global = true, default_value_t = 4)]
    workers: usize,
    /// Wall-clock budget per proof obligation
    #[arg(long, global = true, default_value_t = 60)]
    budget_seconds: u64,
    /// Deepest counterexample searched
    #[arg(long, global = true, default_value_t = 64)]
    max_depth: u32,
    /// Largest induction depth tried
    #[arg(long, global = true, default_value_t = 32)]
    max_k: u32,
    /// More logging (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Global {
    fn check_options(&self) -> CheckOptions {
        CheckOptions {
            max_depth: self.max_depth,
            max_k: self.max_k,
            time_budget: Duration::from_secs(self.budget_seconds),
            seed: self.seed,
            ..CheckOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check one design against a catalog property
    Verify {
        file: PathBuf,
        #[arg(long)]
        cwe: u32,
        #[arg(long)]
        difficulty: Difficulty,
        /// Assertion to check instead of the catalog's
        #[arg(long)]
        property: Option<PathBuf>,
        /// Write the counterexample as VCD
        #[arg(long)]
        vcd: Option<PathBuf>,
        /// Write the counterexample as JSON
        #[arg(long)]
        trace_json: Option<PathBuf>,
    },
    /// Query providers and cache their answers
    Generate {
        /// Use the four offline stub providers
        #[arg(long, conflicts_with = "providers")]
        stub: bool,
        /// Provider definitions ([[provider]] TOML)
        #[arg(long)]
        providers: Option<PathBuf>,
        /// Regenerations per problem
        #[arg(long, default_value_t = 20)]
        n: u32,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Only this CWE
        #[arg(long)]
        cwe: Option<u32>,
        /// Only this difficulty
        #[arg(long)]
        difficulty: Option<Difficulty>,
    },
    /// Label cached generations into dataset.csv
    Label {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Record wall-clock runtimes (output then differs between runs)
        #[arg(long)]
        record_runtime: bool,
    },
    /// Compute Pass@k, heatmaps and keyword counts from dataset.csv
    Metrics {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Summarize dataset.csv
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List the problem catalog
    List,
}

fn read(path: &PathBuf) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.display().to_string(), source })
}

fn write(path: &PathBuf, body: String) -> Result<(), PipelineError> {
    std::fs::write(path, body).map_err(|source| PipelineError::Io { path: path.display().to_string(), source })
}

fn run(cli: Cli) -> Result<u8, PipelineError> {
    let g = &cli.global;
    match cli.command {
        Command::Verify { file, cwe, difficulty, property, vcd, trace_json } => {
            let spec = Catalog::builtin().get(&format!("cwe{cwe}-{difficulty}"))?;
            let source = read(&file)?;
            let prop = property.as_ref().map(read).transpose()?;
            let r = pipeline::verify(&source, spec, prop.as_deref(), &g.check_options());
            print!("{}", r.to_text());
            if let Some(t) = r.trace() {
                if let Some(p) = &vcd {
                    write(p, t.to_vcd())?;
                }
                if let Some(p) = &trace_json {
                    write(p, t.to_json())?;
                }
            }
            log::info!("checked in {} ms", r.runtime_ms);
            Ok(r.exit_code() as u8)
        }
        Command::Generate { stub, providers, n, out, cwe, difficulty } => {
            let cfg = GenerateConfig {
                out: out.clone(),
                seed: g.seed,
                n,
                workers: g.workers,
                stub,
                providers_file: providers,
                cwe,
                difficulty,
            };
            let s = pipeline::generate(&cfg)?;
            println!(
                "{} generations in {} ({} requests, {} cached, {} failed)",
                s.generations,
                out.display(),
                s.provider_calls,
                s.cache_hits,
                s.failures
            );
            Ok(if s.failures > 0 { EXIT_ERROR } else { 0 })
        }
        Command::Label { out, record_runtime } => {
            let rows = pipeline::label(&out, &g.check_options(), g.workers, record_runtime)?;
            println!("{} rows written to {}", rows.len(), out.join(pipeline::DATASET).display());
            Ok(0)
        }
        Command::Metrics { out } => {
            let m = pipeline::metrics(&out)?;
            for p in &m.written {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Report { out, format } => {
            let r = pipeline::report(&out)?;
            match format {
                Format::Text => print!("{}", r.to_text()),
                Format::Json => print!("{}", r.to_json()),
            }
            Ok(0)
        }
        Command::List => {
            for p in Catalog::builtin().problems() {
                println!("{:<24} {:<14} {}", p.id(), p.top_module(), p.title);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
