//! Text form of programs: a small Python-like statement language.

mod lexer;
mod parser;
mod writer;

use std::fmt;

use serde::Serialize;

pub use parser::parse_program;
pub use writer::serialize_program;

/// Location of a parse error. `line` and `column` are 1-based, `column`
/// counts characters; `start..end` are byte offsets into the text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SourceSpan {
    pub statement: usize,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    Lexical,
    Syntax,
    UnknownCommand,
    ArityMismatch,
    UndefinedIdentifier,
    TypeMismatch,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorKind::Lexical => "lexical error",
            ErrorKind::Syntax => "syntax error",
            ErrorKind::UnknownCommand => "unknown command",
            ErrorKind::ArityMismatch => "arity mismatch",
            ErrorKind::UndefinedIdentifier => "undefined identifier",
            ErrorKind::TypeMismatch => "type mismatch",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, thiserror::Error)]
#[error("line {}, column {}: {kind}: {message}", span.line, span.column)]
pub struct ParseError {
    pub kind: ErrorKind,
    pub span: SourceSpan,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ErrorKind, span: SourceSpan, message: impl Into<String>) -> Self {
        Self { kind, span, message: message.into() }
    }
}

/// Rough model-token count of a text: one token per four bytes.
pub fn count_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}
