//! The snippet language: a small indentation-based imperative language whose
//! only side effects are log lines and calls into the planning host.

pub mod ast;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod value;

use std::fmt;

pub use ast::{HostFn, Script};
pub use interp::{execute, interpolate, run_script, ExecEnv, ExecStatus, ExecutionResult, DEFAULT_STEP_BUDGET};
pub use parser::parse_script;
pub use value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Indentation,
    UnknownHost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            message: message.into(),
            kind: ParseErrorKind::Syntax,
        }
    }

    pub fn indentation(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            message: message.into(),
            kind: ParseErrorKind::Indentation,
        }
    }

    pub fn unknown_host((line, col): (usize, usize), message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            message: message.into(),
            kind: ParseErrorKind::UnknownHost,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::Indentation => "indentation error",
            ParseErrorKind::UnknownHost => "unknown host name",
        };
        write!(f, "{kind} at line {}, column {}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}
