// SPDX-License-Identifier: Apache-2.0

//! Source locations and diagnostics shared by every frontend stage.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A 1-based line/column position in the original source text.
///
/// Locations never participate in structural equality: two AST nodes that
/// differ only in where they were parsed from compare equal.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
}

impl Loc {
    pub fn new(line: u32, col: u32) -> Self {
        Loc { line, col }
    }
}

impl PartialEq for Loc {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Loc {}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    /// The construct is valid SystemVerilog but outside the supported subset.
    Unsupported,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Unsupported => "unsupported",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub loc: Loc,
}

impl Diagnostic {
    pub fn error(loc: Loc, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into(), loc }
    }

    pub fn warning(loc: Loc, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into(), loc }
    }

    pub fn unsupported(loc: Loc, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Unsupported, message: message.into(), loc }
    }

    /// Errors and unsupported constructs both prevent a design from being checked.
    pub fn is_fatal(&self) -> bool {
        self.severity != Severity::Warning
    }

    /// Renders as `file:line:col: severity: message`.
    pub fn render(&self, file: &str) -> String {
        format!("{}:{}:{}: {}: {}", file, self.loc.line, self.loc.col, self.severity, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.loc, self.severity, self.message)
    }
}

pub fn has_fatal(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_fatal)
}
