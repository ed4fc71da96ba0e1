// SPDX-License-Identifier: Apache-2.0

//! SystemVerilog subset frontend.

pub mod ast;
pub mod parser;
pub mod printer;
pub mod token;

pub use ast::SourceUnit;
pub use parser::{parse, parse_source};
pub use printer::pretty_print;
pub use token::{tokenize, Token, TokenKind};
