// SPDX-License-Identifier: Apache-2.0

//! Formal labeling of generated SystemVerilog against hardware CWE properties.

pub mod catalog;
pub mod checker;
pub mod diag;
pub mod gen;
pub mod metrics;
pub mod pipeline;
pub mod property;
pub mod sv;
pub mod trace;
pub mod ts;

pub use diag::{Diagnostic, Loc, Severity};
pub use sv::{parse, parse_source, pretty_print, tokenize, SourceUnit, Token, TokenKind};
pub use property::{compile_obligation, evaluate_on_trace, parse_property, PropertyAst, SafetyObligation};
pub use trace::Trace;
pub use ts::{elaborate, elaborate_source, simulate_step, StepResult, TransitionSystem};

/// Version string embedded in every artifact.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
