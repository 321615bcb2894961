//! Cost-graph extraction: find resource constructors, resolve the calls made
//! on them, then connect the resulting cost nodes using trigger rules.

mod build;
mod resources;
mod rules;
mod usages;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::syntax::{AnnotationError, Phase, Span, SyntaxNode};

pub use build::{build_graph, Extraction, Slot, ValueType};
pub use resources::find_resources;
pub use rules::{default_rules, RuleError, TriggerEdge, TriggerRule};
pub use usages::resolve_usages;

pub use crate::graph::CostGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResourceType {
    Api,
    Bucket,
    Queue,
    Table,
    Schedule,
    Function,
}

impl ResourceType {
    pub const ALL: [ResourceType; 6] = [
        ResourceType::Api,
        ResourceType::Bucket,
        ResourceType::Queue,
        ResourceType::Table,
        ResourceType::Schedule,
        ResourceType::Function,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResourceType::Api => "Api",
            ResourceType::Bucket => "Bucket",
            ResourceType::Queue => "Queue",
            ResourceType::Table => "Table",
            ResourceType::Schedule => "Schedule",
            ResourceType::Function => "Function",
        }
    }

    /// `cloud.Bucket` or `Bucket`.
    pub fn from_path(path: &str) -> Option<ResourceType> {
        let name = path.strip_prefix("cloud.").unwrap_or(path);
        ResourceType::ALL.into_iter().find(|t| t.name() == name)
    }

    pub fn method_role(self, method: &str) -> Option<MethodRole> {
        use MethodRole::*;
        match (self, method) {
            (ResourceType::Api, "get" | "post" | "put" | "delete" | "patch") => Some(Registration),
            (ResourceType::Bucket, "put" | "get") => Some(Data),
            (ResourceType::Bucket, "onCreate") => Some(Registration),
            (ResourceType::Queue, "push" | "pop") => Some(Data),
            (ResourceType::Table, "insert" | "list" | "get") => Some(Data),
            (ResourceType::Schedule, "onTick") => Some(Registration),
            _ => None,
        }
    }
}

impl std::fmt::Display for ResourceType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodRole {
    /// Preflight: attaches a handler.
    Registration,
    /// Inflight: a billable operation.
    Data,
}

/// Resource id of the pseudo-resource behind bare `httpPost` calls.
pub const HTTP_RESOURCE: &str = "http";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceDecl {
    pub id: String,
    pub resource_type: ResourceType,
    pub binding_name: Option<String>,
    pub decl_span: Span,
    pub props: BTreeMap<String, Scalar>,
    pub annotations: BTreeMap<String, Scalar>,
    /// Handler closures passed inline to a registration method.
    #[serde(default)]
    pub implicit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCall {
    pub resource_id: String,
    /// `None` for the `httpPost` pseudo-resource.
    pub resource_type: Option<ResourceType>,
    pub method: String,
    pub call_span: Span,
    pub enclosing_closure: Option<String>,
    pub args_summary: BTreeMap<String, Scalar>,
    pub annotations: BTreeMap<String, Scalar>,
}

impl ResourceCall {
    pub fn role(&self) -> MethodRole {
        match self.resource_type {
            Some(t) => t.method_role(&self.method).unwrap_or(MethodRole::Data),
            None => MethodRole::Data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "error")]
pub enum ExtractError {
    #[error("{span}: unsupported resource type `{type_name}`")]
    UnsupportedResource { span: Span, type_name: String },
    #[error("{span}: `{name}` does not refer to a resource in scope")]
    UnresolvedReceiver { span: Span, name: String },
    #[error("{span}: `{method}` must be called in {expected:?} code")]
    PhaseMismatch { span: Span, method: String, expected: Phase },
    #[error("{span}: {resource_type} has no supported method `{method}`")]
    UnsupportedMethod { span: Span, resource_type: ResourceType, method: String },
    #[error("{span}: `{method}` expects {expected}")]
    UnsupportedArgument { span: Span, method: String, expected: String },
    #[error("{span}: `{name}.{method}` registers a trigger on an undeclared resource")]
    DanglingTrigger { span: Span, name: String, method: String },
    #[error("{span}: no endpoint with route `{route}`")]
    UnknownRoute { span: Span, route: String },
    #[error("{span}: route `{route}` is registered more than once")]
    AmbiguousRoute { span: Span, route: String },
    #[error("unknown assumption key `{key}`")]
    UnknownAssumption { key: String },
    #[error("invalid value for `{key}`: {reason}")]
    InvalidAssumption { key: String, reason: String },
    #[error("{span}: malformed annotation: {reason}")]
    MalformedAnnotation { span: Span, reason: String },
}

impl From<AnnotationError> for ExtractError {
    fn from(err: AnnotationError) -> Self {
        match err {
            AnnotationError::MalformedAnnotation { span, reason } => ExtractError::MalformedAnnotation { span, reason },
        }
    }
}

impl ExtractError {
    pub fn span(&self) -> Option<Span> {
        use ExtractError::*;
        match self {
            UnsupportedResource { span, .. }
            | UnresolvedReceiver { span, .. }
            | PhaseMismatch { span, .. }
            | UnsupportedMethod { span, .. }
            | UnsupportedArgument { span, .. }
            | DanglingTrigger { span, .. }
            | UnknownRoute { span, .. }
            | AmbiguousRoute { span, .. }
            | MalformedAnnotation { span, .. } => Some(*span),
            UnknownAssumption { .. } | InvalidAssumption { .. } => None,
        }
    }
}

/// Nodes without incoming edges.
pub fn entry_points(graph: &CostGraph) -> Result<Vec<&crate::graph::CostNode>, NoEntryPoints> {
    let entries = graph.entry_points();
    if entries.is_empty() && !graph.nodes.is_empty() {
        return Err(NoEntryPoints);
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("every node has an incoming edge")]
pub struct NoEntryPoints;

/// `Kind@line:col` identifiers for spans.
pub(crate) fn span_id(prefix: &str, span: &Span) -> String {
    format!("{prefix}@{}:{}", span.start_line, span.start_col)
}

pub(crate) fn closure_id(span: &Span) -> String {
    span_id("closure", span)
}

/// Statically known value of an argument expression: literals and
/// `std.Duration.fromX(n)`.
pub(crate) fn static_value(node: &SyntaxNode) -> Option<Scalar> {
    use crate::syntax::NodeKind;
    let node = node.unwrapped();
    match node.kind {
        NodeKind::String | NodeKind::Number | NodeKind::DurationLiteral | NodeKind::Bool => node.value.clone(),
        NodeKind::MethodCall if node.children.len() == 2 => {
            let receiver = node.children[0].as_path()?;
            if receiver != "std.Duration" && receiver != "Duration" {
                return None;
            }
            let factor: u64 = match node.name() {
                "fromSeconds" => 1,
                "fromMinutes" => 60,
                "fromHours" => 3600,
                "fromDays" => 86_400,
                _ => return None,
            };
            let n = static_value(&node.children[1])?.as_number()?;
            if !n.is_integer() {
                return None;
            }
            let n: u64 = num_traits::ToPrimitive::to_u64(&n.to_integer())?;
            Some(Scalar::Duration(n.checked_mul(factor)?))
        }
        _ => None,
    }
}
