use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::Span;
use crate::scalar::Scalar;

/// A source text with a version that increases on every edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: PathBuf,
    pub text: String,
    pub version: u64,
}

impl SourceFile {
    pub fn new(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        SourceFile { path: path.into(), text: text.into(), version: 1 }
    }

    pub fn in_memory(text: impl Into<String>) -> Self {
        SourceFile::new("<memory>", text)
    }

    /// Same path, new text, next version.
    pub fn edited(&self, text: String) -> Self {
        SourceFile { path: self.path.clone(), text, version: self.version + 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Preflight,
    Inflight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Program,
    Bring,
    LetBinding,
    IfLet,
    Return,
    ExprStmt,
    Block,
    Closure,
    Param,
    TypeRef,
    ConstructorCall,
    MethodCall,
    Call,
    NamedArg,
    MemberAccess,
    Identifier,
    String,
    Number,
    DurationLiteral,
    Bool,
    ObjectLiteral,
    Property,
    StructLiteral,
    ArrayLiteral,
    Index,
    AnnotationWrapper,
}

impl NodeKind {
    pub fn is_expression(self) -> bool {
        !matches!(
            self,
            NodeKind::Program
                | NodeKind::Bring
                | NodeKind::LetBinding
                | NodeKind::IfLet
                | NodeKind::Return
                | NodeKind::ExprStmt
                | NodeKind::Block
                | NodeKind::Param
                | NodeKind::TypeRef
                | NodeKind::NamedArg
                | NodeKind::Property
        )
    }
}

/// One node of the span-preserving syntax tree.
///
/// `name` carries the identifier a node introduces or refers to (binding
/// name, method name, constructor type path, property key); `value` carries
/// literal payloads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxNode {
    pub kind: NodeKind,
    pub span: Span,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<SyntaxNode>,
}

impl SyntaxNode {
    /// Pre-order traversal.
    pub fn walk(&self) -> Walk<'_> {
        Walk { stack: vec![self] }
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("")
    }

    /// Looks through annotation wrappers to the wrapped expression.
    pub fn unwrapped(&self) -> &SyntaxNode {
        let mut node = self;
        while node.kind == NodeKind::AnnotationWrapper {
            node = &node.children[0];
        }
        node
    }

    /// Structural equality ignoring spans.
    pub fn same_shape(&self, other: &SyntaxNode) -> bool {
        self.kind == other.kind
            && self.phase == other.phase
            && self.name == other.name
            && self.value == other.value
            && self.children.len() == other.children.len()
            && self.children.iter().zip(&other.children).all(|(a, b)| a.same_shape(b))
    }

    /// Dotted path for identifier/member chains (`cloud.Api`), if this is one.
    pub fn as_path(&self) -> Option<String> {
        match self.kind {
            NodeKind::Identifier => self.name.clone(),
            NodeKind::MemberAccess => {
                let base = self.children.first()?.as_path()?;
                Some(format!("{base}.{}", self.name()))
            }
            _ => None,
        }
    }

    /// Leftmost identifier of a member chain.
    pub fn root_identifier(&self) -> Option<&str> {
        match self.kind {
            NodeKind::Identifier => self.name.as_deref(),
            NodeKind::MemberAccess => self.children.first()?.root_identifier(),
            _ => None,
        }
    }
}

pub struct Walk<'a> {
    stack: Vec<&'a SyntaxNode>,
}

impl<'a> Iterator for Walk<'a> {
    type Item = &'a SyntaxNode;

    fn next(&mut self) -> Option<&'a SyntaxNode> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

/// A parsed program together with the text it was parsed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntaxTree {
    #[serde(skip)]
    pub text: String,
    pub root: SyntaxNode,
}

impl SyntaxTree {
    pub fn slice(&self, span: &Span) -> &str {
        &self.text[span.range()]
    }

    pub fn nodes(&self) -> Walk<'_> {
        self.root.walk()
    }

    /// Innermost node whose span contains `span`, with its ancestors (root first).
    pub fn ancestry(&self, span: &Span) -> Vec<&SyntaxNode> {
        let mut chain = Vec::new();
        if !self.root.span.contains(span) {
            return chain;
        }
        let mut node = &self.root;
        chain.push(node);
        while let Some(child) = node.children.iter().find(|c| c.span.contains(span)) {
            node = child;
            chain.push(node);
        }
        chain
    }

    /// Expression node covering exactly the byte range of `span`; the
    /// outermost one when several share the range.
    pub fn expression_at(&self, span: &Span) -> Option<&SyntaxNode> {
        self.nodes().find(|n| n.kind.is_expression() && n.span.same_range(span))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.root).expect("syntax tree serializes")
    }
}
