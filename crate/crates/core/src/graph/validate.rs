use std::collections::{BTreeMap, BTreeSet};

use num_traits::Signed;
use serde::Serialize;

use super::{mandatory_factors, CostGraph, EdgeKind, FactorKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    DuplicateId { id: String },
    MissingFactor { node: String, kind: FactorKind, unit: String },
    DanglingEdge { edge: String, endpoint: String },
    NegativeWeight { edge: String },
    MalformedDiamond { node: String, reason: String },
    ImplicitEdgeOutsideDiamond { edge: String },
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Finding::DuplicateId { id } => write!(f, "duplicate id `{id}`"),
            Finding::MissingFactor { node, kind, unit } => {
                write!(f, "node `{node}` lacks its {kind:?} factor in `{unit}`")
            }
            Finding::DanglingEdge { edge, endpoint } => write!(f, "edge `{edge}` refers to unknown node `{endpoint}`"),
            Finding::NegativeWeight { edge } => write!(f, "edge `{edge}` has a negative weight"),
            Finding::MalformedDiamond { node, reason } => write!(f, "diamond at `{node}`: {reason}"),
            Finding::ImplicitEdgeOutsideDiamond { edge } => {
                write!(f, "implicit edge `{edge}` does not belong to exactly one diamond")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

pub fn validate(graph: &CostGraph) -> ValidationReport {
    let mut findings = Vec::new();
    let mut ids = BTreeSet::new();
    for id in graph.nodes.iter().map(|n| &n.id).chain(graph.edges.iter().map(|e| &e.id)) {
        if !ids.insert(id.as_str()) {
            findings.push(Finding::DuplicateId { id: id.clone() });
        }
    }
    let mut factor_ids = BTreeSet::new();
    for node in &graph.nodes {
        for factor in &node.factors {
            if !factor_ids.insert(factor.id.as_str()) {
                findings.push(Finding::DuplicateId { id: factor.id.clone() });
            }
        }
        for (kind, unit) in mandatory_factors(node.node_class, node.operation.as_deref()) {
            if !node.factors.iter().any(|f| f.kind == kind && f.unit == unit) {
                findings.push(Finding::MissingFactor { node: node.id.clone(), kind, unit: unit.to_string() });
            }
        }
    }
    let node_ids: BTreeSet<&str> = graph.nodes.iter().map(|n| n.id.as_str()).collect();
    for edge in &graph.edges {
        for endpoint in [&edge.from, &edge.to] {
            if !node_ids.contains(endpoint.as_str()) {
                findings.push(Finding::DanglingEdge { edge: edge.id.clone(), endpoint: endpoint.clone() });
            }
        }
        if edge.weight.is_negative() {
            findings.push(Finding::NegativeWeight { edge: edge.id.clone() });
        }
    }

    let mut membership: BTreeMap<&str, usize> = BTreeMap::new();
    let mut seen_nodes = BTreeSet::new();
    for diamond in &graph.diamonds {
        let malformed = |reason: &str| Finding::MalformedDiamond { node: diamond.node.clone(), reason: reason.into() };
        if !node_ids.contains(diamond.node.as_str()) {
            findings.push(malformed("unknown node"));
            continue;
        }
        if !seen_nodes.insert(diamond.node.as_str()) {
            findings.push(malformed("listed twice"));
        }
        // no dominant in-edges means the queue is never written to
        if diamond.secondary.is_empty() {
            findings.push(malformed("needs at least one secondary in-edge"));
        }
        for (list, kind) in [(&diamond.dominant, EdgeKind::ImplicitDominant), (&diamond.secondary, EdgeKind::ImplicitSecondary)] {
            for id in list {
                match graph.edge(id) {
                    Some(e) if e.kind == kind && e.to == diamond.node => {
                        *membership.entry(e.id.as_str()).or_default() += 1;
                    }
                    _ => findings.push(malformed(&format!("edge `{id}` is not a {kind:?} in-edge"))),
                }
            }
        }
        let implicit_in = graph.in_edges(&diamond.node).filter(|e| e.kind.is_implicit()).count();
        if implicit_in != diamond.dominant.len() + diamond.secondary.len() {
            findings.push(malformed("lists do not partition the implicit in-edges"));
        }
    }
    for edge in graph.edges.iter().filter(|e| e.kind.is_implicit()) {
        if membership.get(edge.id.as_str()) != Some(&1) {
            findings.push(Finding::ImplicitEdgeOutsideDiamond { edge: edge.id.clone() });
        }
    }
    ValidationReport { findings }
}
