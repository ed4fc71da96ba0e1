// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

pub mod corpus;
pub mod gen;
pub mod interp;

pub fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}
