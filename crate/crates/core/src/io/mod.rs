//! Text formats, generators, bundles and traces.

mod bundle;
mod expr;
mod format;
pub mod generate;

pub use bundle::{read_trace, write_trace, ModelBundle, RunConfig, BUNDLE_FILE};
pub use expr::{parse_expr, parse_rational, parse_real};
pub use format::{parse_macro, parse_mode, parse_template, serialize_macro, serialize_template};

use std::fmt;

/// A syntax error at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at {}:{}: {}",
            self.line, self.column, self.message
        )
    }
}

impl std::error::Error for ParseError {}
