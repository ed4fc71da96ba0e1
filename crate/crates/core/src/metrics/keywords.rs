// SPDX-License-Identifier: Apache-2.0

//! Keyword histograms over generated sources.

use std::collections::HashMap;

use serde::Serialize;

use crate::sv::{tokenize, TokenKind};
use crate::TOOLKIT_VERSION;

pub const DEFAULT_KEYWORDS: [&str; 44] = [
    "module", "endmodule", "input", "output", "logic", "reg", "wire", "assign", "always", "always_ff", "always_comb",
    "begin", "end", "if", "else", "case", "casez", "endcase", "default", "posedge", "negedge", "parameter",
    "localparam", "genvar", "generate", "endgenerate", "function", "endfunction", "task", "endtask", "initial", "for",
    "while", "typedef", "enum", "struct", "packed", "signed", "unsigned", "integer", "bit", "byte", "return", "unique",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordHistogram {
    /// In keyword-list order.
    pub counts: Vec<(String, u64)>,
    /// Sources that failed to tokenize.
    pub skipped: usize,
}

impl KeywordHistogram {
    pub fn get(&self, keyword: &str) -> u64 {
        self.counts.iter().find(|(k, _)| k == keyword).map(|(_, c)| *c).unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|(_, c)| c).sum()
    }
}

pub fn keyword_frequency<S: AsRef<str>>(sources: &[S]) -> KeywordHistogram {
    keyword_frequency_with(sources, &DEFAULT_KEYWORDS)
}

/// Counts keyword tokens; comments, strings and identifiers never count.
pub fn keyword_frequency_with<S: AsRef<str>>(sources: &[S], keywords: &[&str]) -> KeywordHistogram {
    let slot: HashMap<&str, usize> = keywords.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let mut counts = vec![0u64; keywords.len()];
    let mut skipped = 0;
    for src in sources {
        let (tokens, diags) = tokenize(src.as_ref());
        if !diags.is_empty() {
            skipped += 1;
            continue;
        }
        for t in tokens.iter().filter(|t| t.kind == TokenKind::Keyword) {
            if let Some(&i) = slot.get(t.text.as_str()) {
                counts[i] += 1;
            }
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} source(s) did not tokenize and were skipped");
    }
    KeywordHistogram { counts: keywords.iter().map(|k| k.to_string()).zip(counts).collect(), skipped }
}

/// `provider,keyword,count,...` with one block per histogram.
pub fn keywords_csv(histograms: &[(String, KeywordHistogram)], seed: u64) -> String {
    let mut wr = csv::Writer::from_writer(Vec::new());
    let mut write = || -> csv::Result<()> {
        wr.write_record(["provider", "keyword", "count", "toolkit_version", "seed"])?;
        for (p, h) in histograms {
            for (k, c) in &h.counts {
                wr.write_record([p.as_str(), k, &c.to_string(), TOOLKIT_VERSION, &seed.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    };
    write().expect("writing CSV to memory");
    String::from_utf8(wr.into_inner().unwrap_or_default()).unwrap_or_default()
}
