// SPDX-License-Identifier: Apache-2.0

//! Prompt rendering, providers, response caching and batch generation.

mod extract;
mod prompt;
mod provider;
mod stub;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::ProblemSpec;

pub use extract::extract_code;
pub use prompt::{instructions, render_prompt, FIXED_RULES, PREAMBLE};
pub use provider::{
    load_provider_configs, ChatProvider, Completion, HttpTransport, Provider, ProviderConfig, ProviderError,
    RetryPolicy, Transport, TransportError, Usage,
};
pub use stub::{StubKind, StubMix, StubProvider, STUB_PROVIDERS};

/// One provider answer for one problem and regeneration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub problem_id: String,
    pub provider: String,
    pub regen_index: u32,
    pub temperature: f64,
    /// Seconds since the epoch; absent for offline providers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    #[serde(default = "one")]
    pub attempts: u32,
}

fn one() -> u32 {
    1
}

impl Generation {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// On-disk response cache: `<root>/<provider>/<problem>/<regen>.json`.
#[derive(Debug)]
pub struct Cache {
    root: PathBuf,
    write_lock: Mutex<()>,
}

fn safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into(), write_lock: Mutex::new(()) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, provider: &str, problem: &str, regen: u32) -> PathBuf {
        self.root.join(safe(provider)).join(safe(problem)).join(format!("{regen}.json"))
    }

    /// A cached successful generation, if any.
    pub fn get(&self, provider: &str, problem: &str, regen: u32) -> Option<Generation> {
        let text = fs::read_to_string(self.path(provider, problem, regen)).ok()?;
        let g: Generation = serde_json::from_str(&text).ok()?;
        g.succeeded().then_some(g)
    }

    /// Any cached entry, failed ones included.
    pub fn load(&self, provider: &str, problem: &str, regen: u32) -> Option<Generation> {
        let text = fs::read_to_string(self.path(provider, problem, regen)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put(&self, g: &Generation) -> io::Result<()> {
        let path = self.path(&g.provider, &g.problem_id, g.regen_index);
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(g).map_err(io::Error::other)? + "\n")?;
        fs::rename(tmp, path)
    }
}

/// Counters for one batch.
#[derive(Debug, Default)]
pub struct BatchStats {
    pub provider_calls: AtomicU64,
    pub cache_hits: AtomicU64,
    pub failures: AtomicU64,
}

impl BatchStats {
    pub fn provider_calls(&self) -> u64 {
        self.provider_calls.load(Ordering::SeqCst)
    }
    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }
    pub fn failures(&self) -> u64 {
        self.failures.load(Ordering::SeqCst)
    }
}

/// Produces one generation, consulting the cache first.
pub fn generate_one(
    spec: &ProblemSpec,
    provider: &dyn Provider,
    regen_index: u32,
    cache: Option<&Cache>,
    stats: &BatchStats,
) -> Generation {
    let problem_id = spec.id();
    if let Some(g) = cache.and_then(|c| c.get(provider.id(), &problem_id, regen_index)) {
        stats.cache_hits.fetch_add(1, Ordering::SeqCst);
        return g;
    }
    stats.provider_calls.fetch_add(1, Ordering::SeqCst);
    let prompt = render_prompt(spec);
    let timestamp = provider
        .timestamps()
        .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
    let mut g = Generation {
        problem_id,
        provider: provider.id().to_string(),
        regen_index,
        temperature: provider.temperature(),
        timestamp,
        raw: None,
        extracted: None,
        error: None,
        usage: None,
        attempts: 1,
    };
    match provider.complete(spec, &prompt, regen_index) {
        Ok(c) => {
            g.extracted = extract_code(&c.text);
            g.raw = Some(c.text);
            g.usage = c.usage;
            g.attempts = c.attempts;
        }
        Err(e) => {
            stats.failures.fetch_add(1, Ordering::SeqCst);
            log::warn!("{} {} #{regen_index}: {e}", g.provider, g.problem_id);
            if let ProviderError::Exhausted { attempts, .. } = &e {
                g.attempts = *attempts;
            }
            g.error = Some(e.to_string());
        }
    }
    if let Some(c) = cache {
        if let Err(e) = c.put(&g) {
            log::warn!("cache write failed for {} {}: {e}", g.provider, g.problem_id);
        }
    }
    g
}

/// `n` regenerations of every spec, in (spec, regen) order.
///
/// At most `workers` requests are in flight (capped by the provider's own limit).
pub fn generate_batch(
    specs: &[&ProblemSpec],
    provider: &dyn Provider,
    n: u32,
    cache: Option<&Cache>,
    workers: usize,
    stats: &BatchStats,
) -> Vec<Generation> {
    let jobs: Vec<(&ProblemSpec, u32)> = specs.iter().flat_map(|s| (0..n).map(move |i| (*s, i))).collect();
    let threads = workers.min(provider.concurrency()).max(1);
    let run = || jobs.par_iter().map(|(s, i)| generate_one(s, provider, *i, cache, stats)).collect::<Vec<_>>();
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(run),
        Err(_) => jobs.iter().map(|(s, i)| generate_one(s, provider, *i, cache, stats)).collect(),
    }
}
