// SPDX-License-Identifier: Apache-2.0

//! Stub corpora and synthetic rows.

use hwcwe_core::catalog::{Catalog, Difficulty, ProblemSpec, CWE_IDS};
use hwcwe_core::gen::{generate_batch, BatchStats, Generation, StubProvider};
use hwcwe_core::metrics::{DatasetRow, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn stub_generations(providers: &[StubProvider], n: u32) -> Vec<Generation> {
    let specs: Vec<&ProblemSpec> = Catalog::builtin().problems().iter().collect();
    let stats = BatchStats::default();
    providers.iter().flat_map(|p| generate_batch(&specs, p, n, None, 4, &stats)).collect()
}

/// A complete random corpus with verdict fields consistent with the label.
pub fn random_rows(seed: u64, providers: usize, n: u32) -> Vec<DatasetRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for p in 0..providers {
        for cwe in CWE_IDS {
            for d in Difficulty::ALL {
                for i in 0..n {
                    let verdict = Label::ALL[rng.random_range(0..4)];
                    rows.push(DatasetRow {
                        design_id: format!("p{p}/cwe{cwe}-{d}/{i}"),
                        provider: format!("p{p}"),
                        cwe_id: cwe,
                        difficulty: d,
                        regen_index: i,
                        verdict,
                        cex_depth: (verdict == Label::Falsified).then(|| rng.random_range(1..9)),
                        k_used: (verdict == Label::Proven).then(|| rng.random_range(1..5)),
                        lines_of_code: rng.random_range(0..80),
                        runtime_ms: None,
                        source_path: String::new(),
                        property_id: String::new(),
                        toolkit_version: "0".into(),
                        seed,
                    });
                }
            }
        }
    }
    rows
}
