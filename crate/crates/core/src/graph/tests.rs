use std::collections::BTreeMap;

use super::*;
use crate::num::int;
use crate::pipeline::analyze_text;
use crate::scalar::Scalar;

const FIXTURE: &str = include_str!("../../examples/transcription.w");

fn fixture() -> CostGraph {
    analyze_text(FIXTURE, &BTreeMap::new()).unwrap().extraction.graph
}

#[test]
fn fixture_validates_cleanly() {
    assert!(validate(&fixture()).is_clean());
}

#[test]
fn missing_duration_factor_is_reported() {
    let mut g = fixture();
    let f = g.nodes.iter_mut().find(|n| n.node_class == NodeClass::Function).unwrap();
    f.factors.clear();
    let id = f.id.clone();
    let report = validate(&g);
    assert_eq!(
        report.findings,
        vec![Finding::MissingFactor { node: id, kind: FactorKind::Invocation, unit: units::GB_SECOND.into() }]
    );
}

#[test]
fn dangling_edge_is_reported() {
    let mut g = fixture();
    g.edges[0].to = "ghost".into();
    let report = validate(&g);
    assert!(report.findings.contains(&Finding::DanglingEdge { edge: g.edges[0].id.clone(), endpoint: "ghost".into() }));
}

#[test]
fn implicit_edge_outside_diamond_is_reported() {
    let mut g = fixture();
    g.diamonds.clear();
    let report = validate(&g);
    assert_eq!(report.findings.iter().filter(|f| matches!(f, Finding::ImplicitEdgeOutsideDiamond { .. })).count(), 2);
}

fn assumptions(pairs: &[(&str, i64)]) -> AssumptionSet {
    AssumptionSet::from_values(pairs.iter().map(|(k, v)| (*k, Scalar::Number(int(*v)))))
}

#[test]
fn catalogue_flags_unresolved_external_factors() {
    let g = fixture();
    let cat = factor_catalogue(&g, &AssumptionSet::new());
    let unresolved: Vec<_> = cat.iter().filter(|e| !e.resolved).collect();
    // 3 route rates, 3 function factors, payload, record size, unit price
    assert_eq!(unresolved.len(), 9);
    assert!(cat.iter().filter(|e| e.origin == Origin::Internal).all(|e| e.resolved));
    let schedule = cat.iter().find(|e| e.kind == EntryKind::EntryRate && e.node.starts_with("Schedule")).unwrap();
    assert!(schedule.resolved);
}

#[test]
fn half_annotated_function_has_one_gap() {
    let g = fixture();
    let cat = factor_catalogue(&g, &assumptions(&[("upload.fn.memoryGb", 1)]));
    let fn_node = g.nodes.iter().find(|n| n.subject == "upload.fn").unwrap();
    let gaps: Vec<_> = cat.iter().filter(|e| e.node == fn_node.id && !e.resolved).collect();
    assert_eq!(gaps.len(), 1);
    assert_eq!(gaps[0].missing, vec!["upload.fn.durationSeconds".to_string()]);
}

#[test]
fn fully_resolved_catalogue() {
    let g = fixture();
    let keys: Vec<(&str, i64)> = [
        "upload.requestsPerMonth",
        "search.requestsPerMonth",
        "callback.requestsPerMonth",
        "upload.fn.memoryGb",
        "upload.fn.durationSeconds",
        "search.fn.memoryGb",
        "search.fn.durationSeconds",
        "callback.fn.memoryGb",
        "callback.fn.durationSeconds",
        "videoStorage.put.payloadBytes",
        "transcripts.averageRecordSize",
        "http.transcribe.pricePerCallUsd",
    ]
    .iter()
    .map(|k| (*k, 1))
    .collect();
    let cat = factor_catalogue(&g, &assumptions(&keys));
    assert!(cat.iter().all(|e| e.resolved));
    assert!(unresolved_keys(&cat).is_empty());
}

#[test]
fn dot_marks_factor_and_edge_styles() {
    let dot = to_dot(&fixture());
    assert!(dot.starts_with("digraph cost {"));
    assert_eq!(dot.matches("style=dashed").count(), 5);
    assert_eq!(dot.matches("shape=diamond").count(), 1);
    assert_eq!(dot.matches("arrowhead=empty").count(), 1);
    assert_eq!(dot.matches("□ GB-month").count(), 2);
    assert!(dot.contains("○ GB-second"));
}

#[test]
fn json_document_round_trips() {
    let g = fixture();
    let doc = to_json(&g);
    assert_eq!(doc["schema"], "penny-graph/1");
    assert_eq!(doc["entry_points"].as_array().unwrap().len(), 4);
    let back: CostGraph = serde_json::from_value(serde_json::json!({
        "nodes": doc["nodes"], "edges": doc["edges"], "diamonds": doc["diamonds"],
    }))
    .unwrap();
    assert_eq!(back, g);
}
