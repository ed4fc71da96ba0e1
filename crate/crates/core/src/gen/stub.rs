// SPDX-License-Identifier: Apache-2.0

//! Offline provider that answers from the catalog's hand-written designs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::provider::{Completion, Provider, ProviderError};
use crate::catalog::ProblemSpec;

/// Ids of the default stub providers.
pub const STUB_PROVIDERS: [&str; 4] = ["stub-alpha", "stub-beta", "stub-gamma", "stub-delta"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubKind {
    Reference,
    Vulnerable,
    Broken,
    Refusal,
}

/// Percentages of each kind; must sum to 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubMix {
    pub reference: u32,
    pub vulnerable: u32,
    pub broken: u32,
    pub refusal: u32,
}

impl Default for StubMix {
    fn default() -> Self {
        StubMix { reference: 30, vulnerable: 50, broken: 15, refusal: 5 }
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl StubMix {
    /// Regenerations per block; the mix is exact on every full block.
    pub fn block(&self) -> u32 {
        let g = [self.reference, self.vulnerable, self.broken, self.refusal].into_iter().fold(100, gcd);
        100 / g.max(1)
    }

    fn kinds(&self) -> Vec<StubKind> {
        let b = self.block();
        let per = |pct: u32| (pct * b / 100) as usize;
        let mut v = Vec::with_capacity(b as usize);
        v.extend(std::iter::repeat_n(StubKind::Reference, per(self.reference)));
        v.extend(std::iter::repeat_n(StubKind::Vulnerable, per(self.vulnerable)));
        v.extend(std::iter::repeat_n(StubKind::Broken, per(self.broken)));
        v.extend(std::iter::repeat_n(StubKind::Refusal, per(self.refusal)));
        v
    }
}

#[derive(Debug, Clone)]
pub struct StubProvider {
    pub id: String,
    pub seed: u64,
    pub mix: StubMix,
}

fn fnv(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for &b in *p {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl StubProvider {
    pub fn new(id: impl Into<String>, seed: u64) -> Self {
        StubProvider { id: id.into(), seed, mix: StubMix::default() }
    }

    /// The four default stub providers.
    pub fn defaults(seed: u64) -> Vec<StubProvider> {
        STUB_PROVIDERS.iter().map(|id| StubProvider::new(*id, seed)).collect()
    }

    /// Which kind of answer regeneration `regen_index` of `problem_id` gets.
    pub fn kind(&self, problem_id: &str, regen_index: u32) -> StubKind {
        let block = self.mix.block();
        let round = regen_index / block;
        let mut rng = ChaCha8Rng::seed_from_u64(fnv(&[
            &self.seed.to_le_bytes(),
            self.id.as_bytes(),
            problem_id.as_bytes(),
            &round.to_le_bytes(),
        ]));
        let mut kinds = self.mix.kinds();
        kinds.shuffle(&mut rng);
        kinds[(regen_index % block) as usize]
    }

    /// The response text for one regeneration.
    pub fn respond(&self, spec: &ProblemSpec, regen_index: u32) -> String {
        let code = match self.kind(&spec.id(), regen_index) {
            StubKind::Refusal => return "I am sorry, but I cannot help with writing this hardware design.".to_string(),
            StubKind::Reference => spec.reference_source().to_string(),
            StubKind::Vulnerable => spec.vulnerable_source().to_string(),
            StubKind::Broken => break_code(spec.reference_source()),
        };
        match regen_index % 3 {
            0 => format!("```systemverilog\n{code}```\n"),
            1 => format!("Here is the SystemVerilog code:\n\n```verilog\n{code}```\n"),
            _ => code,
        }
    }
}

/// Drops the first statement terminator after the port list.
fn break_code(src: &str) -> String {
    let anchor = src.find(");").map(|i| i + 2).unwrap_or(0);
    match src[anchor..].find(';') {
        Some(i) => {
            let mut s = src.to_string();
            s.remove(anchor + i);
            s
        }
        None => src.replacen("endmodule", "", 1),
    }
}

impl Provider for StubProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn temperature(&self) -> f64 {
        1.0
    }

    fn timestamps(&self) -> bool {
        false
    }

    fn complete(&self, spec: &ProblemSpec, _prompt: &str, regen_index: u32) -> Result<Completion, ProviderError> {
        Ok(Completion { text: self.respond(spec, regen_index), usage: None, attempts: 1 })
    }
}
