//! Parser for the Infrastructure-from-Code DSL subset.
//!
//! The grammar is documented in `docs/grammar.md`. Parsing is fail-fast:
//! the first violation is reported with its span and nothing is skipped.

mod annotate;
mod lexer;
mod parser;
mod span;
mod tree;

use std::fmt;

use thiserror::Error;

pub use annotate::{
    read_annotations, strip_annotations, write_annotation, Annotation, AnnotationError, WriteError,
};
pub use parser::{parse, parse_expression, parse_text};
pub use span::{LineIndex, Span};
pub use tree::{NodeKind, Phase, SourceFile, SyntaxNode, SyntaxTree, Walk};

#[derive(Debug, Clone, PartialEq, Eq, Error, serde::Serialize)]
pub struct ParseError {
    pub span: Span,
    pub expected: String,
    pub found: String,
}

impl ParseError {
    pub(crate) fn raw(start: usize, end: usize, expected: String, found: String) -> Self {
        let span = Span { start_byte: start, end_byte: end, start_line: 0, start_col: 0, end_line: 0, end_col: 0 };
        ParseError { span, expected, found }
    }

    pub(crate) fn locate(mut self, index: &LineIndex, text: &str) -> Self {
        self.span = index.span(text, self.span.start_byte, self.span.end_byte);
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, found {}", self.span, self.expected, self.found)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("span {0} lies outside the syntax tree")]
pub struct SpanOutOfRange(pub Span);

/// Phase of the code at `span`: inflight iff the innermost enclosing
/// closure is an inflight closure.
pub fn phase_of(tree: &SyntaxTree, span: &Span) -> Result<Phase, SpanOutOfRange> {
    let chain = tree.ancestry(span);
    let node = chain.last().ok_or(SpanOutOfRange(*span))?;
    if span.end_byte > tree.text.len() {
        return Err(SpanOutOfRange(*span));
    }
    // a span covering exactly a closure denotes the closure expression,
    // which is evaluated where it is written
    Ok(node.phase)
}

#[cfg(test)]
mod tests;
