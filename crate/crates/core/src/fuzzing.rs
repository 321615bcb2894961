//! Bodies of the fuzz targets in `fuzz/`. They live here so that the
//! checked-in seed corpus can be replayed by an ordinary test on stable.
//! Each function panics only when an invariant breaks.

use std::collections::BTreeMap;

use crate::estimate::estimate;
use crate::num::{format_rational, int, parse_decimal};
use crate::pipeline::{analyze, analyze_text};
use crate::pricing::{bundled_catalogs, evaluate_exact, marginal_rate, parse_catalog};
use crate::scalar::{parse_duration, Scalar};
use crate::syntax::{parse_text, read_annotations, strip_annotations, write_annotation, SourceFile};

pub fn parse_source(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(tree) = parse_text(text) {
        let _ = read_annotations(&tree);
        let stripped = strip_annotations(&tree);
        assert!(parse_text(&stripped).is_ok(), "stripped text no longer parses");
    }
}

pub fn extract(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(analysis) = analyze_text(text, &BTreeMap::new()) else { return };
    assert!(analysis.validation.is_clean(), "{:?}", analysis.validation);
    let _ = analysis.catalogue();
    for (_, catalog) in bundled_catalogs() {
        let _ = estimate(&analysis.extraction.graph, &catalog, &analysis.extraction.assumptions, 1);
    }
}

/// First byte picks the slot, second the value; the rest is source text.
pub fn write_annotation_roundtrip(data: &[u8]) {
    if data.len() < 2 {
        return;
    }
    let Ok(text) = std::str::from_utf8(&data[2..]) else { return };
    let source = SourceFile::in_memory(text);
    let Ok(analysis) = analyze(&source, &BTreeMap::new()) else { return };
    let slots = &analysis.extraction.slots;
    if slots.is_empty() {
        return;
    }
    let slot = &slots[data[0] as usize % slots.len()];
    let value = match data[1] % 3 {
        0 => Scalar::Number(int(i64::from(data[1]))),
        1 => Scalar::Text("/fuzz".into()),
        _ => Scalar::Duration(u64::from(data[1])),
    };
    let entries = BTreeMap::from([(slot.annotation_key.clone(), value)]);
    let Ok(written) = write_annotation(&source, &slot.target, &entries) else { return };
    let tree = parse_text(&written.text).expect("written text parses");
    let found = read_annotations(&tree).expect("written annotations read back");
    assert!(found.iter().any(|a| entries.iter().all(|(k, v)| a.entries.get(k) == Some(v))));
    let original = parse_text(text).expect("analyzed text parses");
    assert_eq!(strip_annotations(&tree), strip_annotations(&original));
}

/// A validated catalog prices every non-negative quantity, monotonically,
/// and survives a serialization round trip.
pub fn catalog(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(catalog) = parse_catalog(text) else { return };
    for rule in &catalog.rules {
        let mut last = None;
        for q in [0, 1, 7, 1000, 1_000_000] {
            let cost = evaluate_exact(rule, &int(q)).expect("non-negative quantities price");
            if let Some(prev) = &last {
                assert!(&cost >= prev);
            }
            let _ = marginal_rate(rule, &int(q));
            last = Some(cost);
        }
    }
    let again = parse_catalog(&serde_json::to_string(&catalog).unwrap()).expect("catalogs round-trip");
    assert_eq!(again, catalog);
}

pub fn assume_value(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_duration(text);
    if let Some(n) = parse_decimal(text) {
        assert_eq!(parse_decimal(&format_rational(&n)), Some(n));
    }
    let value = Scalar::parse_cli(text);
    let _ = value.to_source();
    let _ = Scalar::from_json(&value.to_json());
}

/// Assumption files and PATCH bodies.
pub fn assumption_json(data: &[u8]) {
    if let Ok(map) = serde_json::from_slice::<BTreeMap<String, Scalar>>(data) {
        let text = serde_json::to_string(&map).unwrap();
        let again: BTreeMap<String, Scalar> = serde_json::from_str(&text).expect("assumptions round-trip");
        assert_eq!(again, map);
    }
}

pub type Target = (&'static str, fn(&[u8]));

/// Target name to body, for replaying corpora.
pub const TARGETS: [Target; 6] = [
    ("parse_source", parse_source),
    ("extract", extract),
    ("write_annotation", write_annotation_roundtrip),
    ("parse_catalog", catalog),
    ("assume_value", assume_value),
    ("assumption_json", assumption_json),
];
