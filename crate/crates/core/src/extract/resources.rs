use std::collections::{BTreeMap, HashMap};

use super::{span_id, static_value, ExtractError, ResourceDecl, ResourceType};
use crate::scalar::Scalar;
use crate::syntax::{read_annotations, NodeKind, Phase, SyntaxNode, SyntaxTree};

pub(crate) type AnnotationIndex = HashMap<(usize, usize), BTreeMap<String, Scalar>>;

pub(crate) fn annotation_index(tree: &SyntaxTree) -> Result<AnnotationIndex, ExtractError> {
    Ok(read_annotations(tree)?
        .into_iter()
        .map(|a| ((a.target_span.start_byte, a.target_span.end_byte), a.entries))
        .collect())
}

pub(crate) fn key(node: &SyntaxNode) -> (usize, usize) {
    (node.span.start_byte, node.span.end_byte)
}

/// Resource constructors plus one implicit Function per inline handler
/// closure, ordered by source position.
pub fn find_resources(tree: &SyntaxTree) -> Result<Vec<ResourceDecl>, ExtractError> {
    let annotations = annotation_index(tree)?;
    let mut bindings: HashMap<(usize, usize), String> = HashMap::new();
    for node in tree.nodes().filter(|n| n.kind == NodeKind::LetBinding) {
        let value = node.children.last().expect("let has a value").unwrapped();
        if value.kind == NodeKind::ConstructorCall {
            bindings.insert(key(value), node.name().to_string());
        }
    }

    let mut decls = Vec::new();
    for node in tree.nodes() {
        match node.kind {
            NodeKind::ConstructorCall => {
                let resource_type = ResourceType::from_path(node.name()).ok_or_else(|| ExtractError::UnsupportedResource {
                    span: node.span,
                    type_name: node.name().to_string(),
                })?;
                if node.phase != Phase::Preflight {
                    return Err(ExtractError::PhaseMismatch {
                        span: node.span,
                        method: format!("new {}", node.name()),
                        expected: Phase::Preflight,
                    });
                }
                decls.push(ResourceDecl {
                    id: span_id(resource_type.name(), &node.span),
                    resource_type,
                    binding_name: bindings.get(&key(node)).cloned(),
                    decl_span: node.span,
                    props: props_of(node),
                    annotations: annotations.get(&key(node)).cloned().unwrap_or_default(),
                    implicit: false,
                });
            }
            NodeKind::MethodCall if node.phase == Phase::Preflight => {
                for arg in &node.children[1..] {
                    let closure = arg.unwrapped();
                    if closure.kind == NodeKind::Closure {
                        decls.push(ResourceDecl {
                            id: span_id("Function", &closure.span),
                            resource_type: ResourceType::Function,
                            binding_name: None,
                            decl_span: closure.span,
                            props: BTreeMap::new(),
                            annotations: annotations.get(&key(closure)).cloned().unwrap_or_default(),
                            implicit: true,
                        });
                    }
                }
            }
            _ => {}
        }
    }
    decls.sort_by_key(|d| d.decl_span.start_byte);
    Ok(decls)
}

fn props_of(ctor: &SyntaxNode) -> BTreeMap<String, Scalar> {
    let mut props = BTreeMap::new();
    let mut position = 0;
    for arg in &ctor.children {
        let arg_u = arg.unwrapped();
        match arg_u.kind {
            NodeKind::NamedArg => {
                if let Some(v) = static_value(&arg_u.children[0]) {
                    props.insert(arg_u.name().to_string(), v);
                }
            }
            NodeKind::StructLiteral | NodeKind::ObjectLiteral => {
                for prop in &arg_u.children {
                    if let Some(v) = static_value(&prop.children[0]) {
                        props.insert(prop.name().to_string(), v);
                    }
                }
            }
            _ => {
                if let Some(v) = static_value(arg_u) {
                    props.insert(format!("arg{position}"), v);
                }
                position += 1;
            }
        }
    }
    props
}
