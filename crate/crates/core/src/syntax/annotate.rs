//! The annotation idiom `[expr, {key: value}][0]`: reading, writing and stripping.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::{parse_text, NodeKind, ParseError, SourceFile, Span, SyntaxNode, SyntaxTree};
use crate::scalar::{quote, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Annotation {
    /// The wrapped expression.
    pub target_span: Span,
    /// The whole `[...][0]` wrapper.
    pub wrapper_span: Span,
    pub entries: BTreeMap<String, Scalar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("{span}: malformed annotation: {reason}")]
    MalformedAnnotation { span: Span, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WriteError {
    #[error("{0}: target is not a complete expression")]
    TargetNotAnExpression(Span),
    #[error("source does not parse: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Malformed(#[from] AnnotationError),
}

/// Every annotation wrapper in the tree, in source order.
pub fn read_annotations(tree: &SyntaxTree) -> Result<Vec<Annotation>, AnnotationError> {
    let mut out = Vec::new();
    for node in tree.nodes() {
        match node.kind {
            NodeKind::AnnotationWrapper => out.push(annotation_of(node)?),
            NodeKind::Index if node.children[0].kind == NodeKind::ArrayLiteral => {
                return Err(AnnotationError::MalformedAnnotation {
                    span: node.span,
                    reason: wrapper_shape_problem(node),
                });
            }
            _ => {}
        }
    }
    Ok(out)
}

fn wrapper_shape_problem(index: &SyntaxNode) -> String {
    let array = &index.children[0];
    let idx = &index.children[1];
    if array.children.len() != 2 {
        format!("expected 2 array elements, found {}", array.children.len())
    } else if array.children[1].kind != NodeKind::ObjectLiteral {
        "second element must be an object literal".into()
    } else if idx.kind != NodeKind::Number || idx.value != Some(Scalar::Number(crate::num::int(0))) {
        "index must be 0".into()
    } else {
        "annotation values must be scalars".into()
    }
}

fn annotation_of(wrapper: &SyntaxNode) -> Result<Annotation, AnnotationError> {
    let object = &wrapper.children[1];
    let mut entries = BTreeMap::new();
    for prop in &object.children {
        let value = prop.children[0].value.clone().ok_or_else(|| AnnotationError::MalformedAnnotation {
            span: prop.span,
            reason: "annotation values must be scalars".into(),
        })?;
        if entries.insert(prop.name().to_string(), value).is_some() {
            return Err(AnnotationError::MalformedAnnotation {
                span: prop.span,
                reason: format!("duplicate key `{}`", prop.name()),
            });
        }
    }
    Ok(Annotation { target_span: wrapper.children[0].span, wrapper_span: wrapper.span, entries })
}

fn render_key(key: &str) -> String {
    let ident = key.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(key, "bring" | "let" | "new" | "inflight" | "if" | "else" | "return" | "true" | "false");
    if ident {
        key.to_string()
    } else {
        quote(key)
    }
}

fn render_entry(key: &str, value: &Scalar) -> String {
    format!("{}: {}", render_key(key), value.to_source())
}

/// Persists `entries` on the expression at `target`.
///
/// An unwrapped target gets a new wrapper; an already wrapped target has its
/// entries merged, new values overriding. Text outside the edited region is
/// left byte-identical.
pub fn write_annotation(
    source: &SourceFile,
    target: &Span,
    entries: &BTreeMap<String, Scalar>,
) -> Result<SourceFile, WriteError> {
    let tree = parse_text(&source.text)?;
    if entries.is_empty() {
        return Ok(source.clone());
    }
    let text = &source.text;
    let existing = tree.nodes().find(|n| {
        n.kind == NodeKind::AnnotationWrapper
            && (n.span.same_range(target) || n.children[0].span.same_range(target))
    });
    let new_text = match existing {
        Some(wrapper) => {
            let object = &wrapper.children[1];
            let mut remaining = entries.clone();
            let mut parts = Vec::new();
            for prop in &object.children {
                match remaining.remove(prop.name()) {
                    Some(value) => parts.push(render_entry(prop.name(), &value)),
                    None => parts.push(text[prop.span.range()].to_string()),
                }
            }
            parts.extend(remaining.iter().map(|(k, v)| render_entry(k, v)));
            splice(text, object.span.start_byte, object.span.end_byte, &format!("{{{}}}", parts.join(", ")))
        }
        None => {
            let node = tree.expression_at(target).ok_or(WriteError::TargetNotAnExpression(*target))?;
            let body: Vec<String> = entries.iter().map(|(k, v)| render_entry(k, v)).collect();
            let wrapped = format!("[{}, {{{}}}][0]", &text[node.span.range()], body.join(", "));
            splice(text, node.span.start_byte, node.span.end_byte, &wrapped)
        }
    };
    let check = parse_text(&new_text)?;
    read_annotations(&check)?;
    Ok(source.edited(new_text))
}

fn splice(text: &str, start: usize, end: usize, replacement: &str) -> String {
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..start]);
    out.push_str(replacement);
    out.push_str(&text[end..]);
    out
}

/// Text with every annotation wrapper replaced by the expression it wraps.
pub fn strip_annotations(tree: &SyntaxTree) -> String {
    let mut cuts: Vec<(usize, usize)> = Vec::new();
    for node in tree.nodes().filter(|n| n.kind == NodeKind::AnnotationWrapper) {
        let target = &node.children[0].span;
        cuts.push((node.span.start_byte, target.start_byte));
        cuts.push((target.end_byte, node.span.end_byte));
    }
    cuts.sort_unstable();
    let mut out = String::with_capacity(tree.text.len());
    let mut at = 0;
    for (start, end) in cuts {
        out.push_str(&tree.text[at..start]);
        at = end;
    }
    out.push_str(&tree.text[at..]);
    out
}
