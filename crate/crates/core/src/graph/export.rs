use std::fmt::Write;

use serde_json::json;

use super::{CostGraph, EdgeKind, FactorKind};
use crate::num::format_rational;

/// The JSON graph document; see `docs/graph-schema.md`.
pub fn to_json(graph: &CostGraph) -> serde_json::Value {
    json!({
        "schema": "penny-graph/1",
        "nodes": graph.nodes,
        "edges": graph.edges,
        "diamonds": graph.diamonds,
        "entry_points": graph.entry_points().iter().map(|n| &n.id).collect::<Vec<_>>(),
    })
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering. Invocation factors show as circles, accumulating
/// ones as squares, fixed ones as triangles. Sync edges are solid,
/// deferred edges dashed; each diamond is drawn as a diamond-shaped point
/// whose dominant inflow has a filled arrowhead and secondary inflow an open one.
pub fn to_dot(graph: &CostGraph) -> String {
    let mut out = String::new();
    out.push_str("digraph cost {\n  rankdir=TB;\n  node [shape=box, style=rounded, fontname=\"Helvetica\"];\n");
    for node in &graph.nodes {
        let mut label = escape(&node.label);
        for factor in &node.factors {
            let marker = match factor.kind {
                FactorKind::Invocation => "○",
                FactorKind::Accumulating => "□",
                FactorKind::Fixed => "△",
            };
            let _ = write!(label, "\\n{marker} {}", escape(&factor.unit));
        }
        let _ = writeln!(out, "  \"{}\" [label=\"{}\"];", escape(&node.id), label);
    }
    for diamond in &graph.diamonds {
        let _ = writeln!(out, "  \"diamond:{}\" [shape=diamond, label=\"\", width=0.3, height=0.3];", escape(&diamond.node));
        let _ = writeln!(out, "  \"diamond:{0}\" -> \"{0}\";", escape(&diamond.node));
    }
    for edge in &graph.edges {
        let weight = if edge.weight == crate::num::int(1) {
            String::new()
        } else {
            format!(", label=\"×{}\"", format_rational(&edge.weight))
        };
        let (target, style) = match edge.kind {
            EdgeKind::Sync => (edge.to.clone(), "style=solid, arrowhead=normal".to_string()),
            EdgeKind::Deferred => (edge.to.clone(), "style=dashed, arrowhead=normal".to_string()),
            EdgeKind::ImplicitDominant => (format!("diamond:{}", edge.to), "style=solid, arrowhead=normal".to_string()),
            EdgeKind::ImplicitSecondary => (format!("diamond:{}", edge.to), "style=solid, arrowhead=empty".to_string()),
        };
        let _ = writeln!(out, "  \"{}\" -> \"{}\" [{style}{weight}];", escape(&edge.from), escape(&target));
    }
    out.push_str("}\n");
    out
}
