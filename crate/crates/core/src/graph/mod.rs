//! The cost model: nodes carrying cost factors, connected by typed flow edges.

mod export;
mod validate;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::assumptions::AssumptionSet;
use crate::num::{serde_rational, serde_rational_opt, Rational};
use crate::syntax::Span;

pub use export::{to_dot, to_json};
pub use validate::{validate, Finding, ValidationReport};

pub mod units {
    pub const REQUEST: &str = "request";
    pub const GB_SECOND: &str = "GB-second";
    pub const GB_MONTH: &str = "GB-month";
    /// Transferred gigabytes (endpoint egress).
    pub const GB: &str = "GB";
    /// One call to a third-party service, priced by the user.
    pub const CALL: &str = "call";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeClass {
    Endpoint,
    Function,
    BucketOp,
    QueueOp,
    TableOp,
    ScheduleTick,
    ExternalHttpCall,
    StorageStock,
}

impl NodeClass {
    pub const ALL: [NodeClass; 8] = [
        NodeClass::Endpoint,
        NodeClass::Function,
        NodeClass::BucketOp,
        NodeClass::QueueOp,
        NodeClass::TableOp,
        NodeClass::ScheduleTick,
        NodeClass::ExternalHttpCall,
        NodeClass::StorageStock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeClass::Endpoint => "Endpoint",
            NodeClass::Function => "Function",
            NodeClass::BucketOp => "BucketOp",
            NodeClass::QueueOp => "QueueOp",
            NodeClass::TableOp => "TableOp",
            NodeClass::ScheduleTick => "ScheduleTick",
            NodeClass::ExternalHttpCall => "ExternalHttpCall",
            NodeClass::StorageStock => "StorageStock",
        }
    }

    pub fn parse(name: &str) -> Option<NodeClass> {
        NodeClass::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl std::fmt::Display for NodeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Invocation,
    Fixed,
    Accumulating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    External,
    Internal,
}

/// `scale × Π inputs` units: per invocation for invocation factors, per
/// invocation of inflow for accumulating factors, per month for fixed ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantity {
    #[serde(with = "serde_rational")]
    pub scale: Rational,
    #[serde(default)]
    pub inputs: Vec<String>,
}

impl Quantity {
    pub fn constant(scale: Rational) -> Self {
        Quantity { scale, inputs: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueSource {
    Constant,
    Assumption { keys: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostFactor {
    pub id: String,
    pub kind: FactorKind,
    pub origin: Origin,
    pub unit: String,
    pub quantity: Quantity,
    /// Assumption key holding a user-supplied price in USD per unit; such
    /// factors are priced without a catalog rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_key: Option<String>,
}

impl CostFactor {
    pub fn new(node_id: &str, kind: FactorKind, unit: &str, quantity: Quantity) -> Self {
        let origin = if quantity.inputs.is_empty() { Origin::Internal } else { Origin::External };
        CostFactor { id: format!("{node_id}/{unit}"), kind, origin, unit: unit.to_string(), quantity, price_key: None }
    }

    pub fn user_priced(node_id: &str, unit: &str, price_key: String) -> Self {
        CostFactor {
            id: format!("{node_id}/{unit}"),
            kind: FactorKind::Invocation,
            origin: Origin::External,
            unit: unit.to_string(),
            quantity: Quantity::constant(Rational::from_integer(1.into())),
            price_key: Some(price_key),
        }
    }

    /// Every assumption key this factor reads.
    pub fn keys(&self) -> Vec<String> {
        let mut keys = self.quantity.inputs.clone();
        keys.extend(self.price_key.clone());
        keys
    }

    pub fn value_source(&self) -> ValueSource {
        let keys = self.keys();
        if keys.is_empty() {
            ValueSource::Constant
        } else {
            ValueSource::Assumption { keys }
        }
    }
}

/// How often an entry point fires when nothing upstream drives it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryRate {
    /// Invocations per month from an assumption.
    PerMonth { key: String },
    /// One invocation every `seconds`; the constant comes from code when known.
    Interval {
        key: String,
        #[serde(default, skip_serializing_if = "Option::is_none", with = "serde_rational_opt")]
        seconds: Option<Rational>,
    },
}

impl EntryRate {
    pub fn key(&self) -> &str {
        match self {
            EntryRate::PerMonth { key } | EntryRate::Interval { key, .. } => key,
        }
    }

    /// The assumption key still needed, if any.
    pub fn required_key(&self) -> Option<&str> {
        match self {
            EntryRate::Interval { seconds: Some(_), .. } => None,
            other => Some(other.key()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostNode {
    pub id: String,
    pub label: String,
    pub node_class: NodeClass,
    pub span: Span,
    /// Prefix of this node's assumption keys.
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_rate: Option<EntryRate>,
    pub factors: Vec<CostFactor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Sync,
    Deferred,
    ImplicitDominant,
    ImplicitSecondary,
}

impl EdgeKind {
    pub fn is_implicit(self) -> bool {
        matches!(self, EdgeKind::ImplicitDominant | EdgeKind::ImplicitSecondary)
    }

    /// Edges that carry invocation counts outside of diamonds.
    pub fn carries_flow(self) -> bool {
        !matches!(self, EdgeKind::ImplicitSecondary)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub id: String,
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
    #[serde(with = "serde_rational")]
    pub weight: Rational,
    /// The trigger rule or annotation that justifies the edge.
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diamond {
    pub node: String,
    pub dominant: Vec<String>,
    pub secondary: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostGraph {
    pub nodes: Vec<CostNode>,
    pub edges: Vec<FlowEdge>,
    pub diamonds: Vec<Diamond>,
}

impl CostGraph {
    pub fn node(&self, id: &str) -> Option<&CostNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn edge(&self, id: &str) -> Option<&FlowEdge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn in_edges<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a FlowEdge> + 'a {
        self.edges.iter().filter(move |e| e.to == id)
    }

    pub fn out_edges<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a FlowEdge> + 'a {
        self.edges.iter().filter(move |e| e.from == id)
    }

    pub fn diamond(&self, node: &str) -> Option<&Diamond> {
        self.diamonds.iter().find(|d| d.node == node)
    }

    /// Nodes without incoming edges, in node order.
    pub fn entry_points(&self) -> Vec<&CostNode> {
        let targeted: BTreeSet<&str> = self.edges.iter().map(|e| e.to.as_str()).collect();
        self.nodes.iter().filter(|n| !targeted.contains(n.id.as_str())).collect()
    }

    pub fn is_entry_point(&self, id: &str) -> bool {
        self.node(id).is_some() && self.in_edges(id).next().is_none()
    }

    pub fn factor(&self, id: &str) -> Option<(&CostNode, &CostFactor)> {
        self.nodes.iter().find_map(|n| n.factors.iter().find(|f| f.id == id).map(|f| (n, f)))
    }
}

/// Factors a node of `class` must carry; `operation` distinguishes writes.
pub fn mandatory_factors(class: NodeClass, operation: Option<&str>) -> Vec<(FactorKind, &'static str)> {
    use FactorKind::*;
    let writes = matches!(operation, Some("put") | Some("insert"));
    match class {
        NodeClass::Endpoint | NodeClass::QueueOp => vec![(Invocation, units::REQUEST)],
        NodeClass::Function => vec![(Invocation, units::GB_SECOND)],
        NodeClass::BucketOp | NodeClass::TableOp if writes => {
            vec![(Invocation, units::REQUEST), (Accumulating, units::GB_MONTH)]
        }
        NodeClass::BucketOp | NodeClass::TableOp => vec![(Invocation, units::REQUEST)],
        NodeClass::ScheduleTick => vec![],
        NodeClass::ExternalHttpCall => vec![(Invocation, units::CALL)],
        NodeClass::StorageStock => vec![(Accumulating, units::GB_MONTH)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Invocation,
    Fixed,
    Accumulating,
    EntryRate,
}

impl From<FactorKind> for EntryKind {
    fn from(kind: FactorKind) -> Self {
        match kind {
            FactorKind::Invocation => EntryKind::Invocation,
            FactorKind::Fixed => EntryKind::Fixed,
            FactorKind::Accumulating => EntryKind::Accumulating,
        }
    }
}

/// One row of the factor catalogue: a factor, or an entry point's rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogueEntry {
    pub id: String,
    pub node: String,
    pub kind: EntryKind,
    pub origin: Origin,
    pub value_source: ValueSource,
    pub resolved: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<String>,
}

/// Every factor and entry rate with the keys it still lacks in `assumptions`.
pub fn factor_catalogue(graph: &CostGraph, assumptions: &AssumptionSet) -> Vec<CatalogueEntry> {
    let mut out = Vec::new();
    for node in &graph.nodes {
        if graph.is_entry_point(&node.id) {
            if let Some(rate) = &node.entry_rate {
                let (value_source, missing) = match rate.required_key() {
                    None => (ValueSource::Constant, vec![]),
                    Some(key) => (
                        ValueSource::Assumption { keys: vec![key.to_string()] },
                        if assumptions.contains(key) { vec![] } else { vec![key.to_string()] },
                    ),
                };
                out.push(CatalogueEntry {
                    id: format!("{}/rate", node.id),
                    node: node.id.clone(),
                    kind: EntryKind::EntryRate,
                    origin: Origin::External,
                    value_source,
                    resolved: missing.is_empty(),
                    missing,
                });
            }
        }
        for factor in &node.factors {
            let missing: Vec<String> = factor.keys().into_iter().filter(|k| !assumptions.contains(k)).collect();
            out.push(CatalogueEntry {
                id: factor.id.clone(),
                node: node.id.clone(),
                kind: factor.kind.into(),
                origin: factor.origin,
                value_source: factor.value_source(),
                resolved: missing.is_empty(),
                missing,
            });
        }
    }
    out
}

/// Sorted, deduplicated keys missing across the catalogue.
pub fn unresolved_keys(catalogue: &[CatalogueEntry]) -> Vec<String> {
    let keys: BTreeSet<&String> = catalogue.iter().flat_map(|e| &e.missing).collect();
    keys.into_iter().cloned().collect()
}

#[cfg(test)]
mod tests;
