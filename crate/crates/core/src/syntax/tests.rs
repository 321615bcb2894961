use std::collections::BTreeMap;

use super::*;
use crate::num::{int, ratio};
use crate::scalar::Scalar;

const LISTING_UPLOAD: &str = r#"api.post("/upload",
  inflight(req: ApiRequest): ApiResponse => {
    videoStorage.put(str.fromJson(req.body));
    return ApiResponse { status:200 };
});
videoStorage.onCreate(inflight(key: str) => {
    queue.push(key);
});
"#;

const LISTING_POP: &str = "let schedule = new Schedule(ScheduleProps {
    rate: std.Duration.fromSeconds(1)
});
schedule.onTick(inflight () => {
\tif let key = queue.pop() {
\t\thttpPost(\"http://example.com/transcribe\", {
            videoId: key
        });
\t}
});
";

fn find<'a>(tree: &'a SyntaxTree, kind: NodeKind, name: &str) -> &'a SyntaxNode {
    tree.nodes()
        .find(|n| n.kind == kind && n.name() == name)
        .unwrap_or_else(|| panic!("no {kind:?} named {name}"))
}

fn entries(pairs: &[(&str, Scalar)]) -> BTreeMap<String, Scalar> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

#[test]
fn upload_listing_has_inflight_handler() {
    let tree = parse_text(LISTING_UPLOAD).unwrap();
    let post = find(&tree, NodeKind::MethodCall, "post");
    assert_eq!(post.children[0].name(), "api");
    assert_eq!(post.phase, Phase::Preflight);
    let closure = &post.children[2];
    assert_eq!(closure.kind, NodeKind::Closure);
    let body = closure.children.last().unwrap();
    assert_eq!(body.kind, NodeKind::Block);
    assert_eq!(body.phase, Phase::Inflight);
    let put = find(&tree, NodeKind::MethodCall, "put");
    assert_eq!(put.phase, Phase::Inflight);
}

#[test]
fn empty_program() {
    let tree = parse_text("").unwrap();
    assert_eq!(tree.root.kind, NodeKind::Program);
    assert!(tree.root.children.is_empty());
    assert_eq!(tree.root.span.len(), 0);
}

#[test]
fn duration_argument_is_seconds() {
    let tree = parse_text("let q = new cloud.Queue(timeout: 2m);").unwrap();
    assert_eq!(tree.root.children.len(), 1);
    let binding = &tree.root.children[0];
    assert_eq!(binding.kind, NodeKind::LetBinding);
    let ctor = &binding.children[0];
    assert_eq!(ctor.kind, NodeKind::ConstructorCall);
    assert_eq!(ctor.name(), "cloud.Queue");
    let arg = &ctor.children[0];
    assert_eq!(arg.kind, NodeKind::NamedArg);
    assert_eq!(arg.children[0].kind, NodeKind::DurationLiteral);
    assert_eq!(arg.children[0].value, Some(Scalar::Duration(120)));
}

#[test]
fn schedule_listing_parses() {
    let tree = parse_text(LISTING_POP).unwrap();
    let pop = find(&tree, NodeKind::MethodCall, "pop");
    assert_eq!(pop.phase, Phase::Inflight);
    let if_let = find(&tree, NodeKind::IfLet, "key");
    assert_eq!(if_let.children.len(), 2);
    let ctor = find(&tree, NodeKind::ConstructorCall, "Schedule");
    assert_eq!(ctor.children[0].kind, NodeKind::StructLiteral);
    assert_eq!(ctor.children[0].name(), "ScheduleProps");
}

#[test]
fn parse_errors_carry_span_and_expectation() {
    let err = parse_text("let x = ;").unwrap_err();
    assert_eq!(err.span.start_byte, 8);
    assert_eq!((err.span.start_line, err.span.start_col), (1, 9));
    assert_eq!(err.expected, "an expression");
    assert_eq!(err.found, "`;`");

    let err = parse_text("let a = 1;\nlet b = 1 + 2;").unwrap_err();
    assert_eq!((err.span.start_line, err.span.start_col), (2, 11));
    assert!(err.found.contains('+'));

    assert!(parse_text("if x { }").is_err());
    assert!(parse_text("let x = 5").is_err());
    assert!(parse_text("for x in y {}").is_err());
}

#[test]
fn deep_nesting_is_an_error_not_a_crash() {
    let text = format!("let x = {}1{};", "[".repeat(5000), "]".repeat(5000));
    assert!(parse_text(&text).is_err());
}

#[test]
fn phase_of_examples() {
    let tree = parse_text(LISTING_UPLOAD).unwrap();
    let put = find(&tree, NodeKind::MethodCall, "put");
    assert_eq!(phase_of(&tree, &put.span), Ok(Phase::Inflight));

    let tree = parse_text("let b = new cloud.Bucket();").unwrap();
    let ctor = find(&tree, NodeKind::ConstructorCall, "cloud.Bucket");
    assert_eq!(phase_of(&tree, &ctor.span), Ok(Phase::Preflight));

    let nested = "f(inflight () => { g(inflight () => { x.y(); }); });";
    let tree = parse_text(nested).unwrap();
    let inner = tree.nodes().filter(|n| n.kind == NodeKind::Closure).nth(1).unwrap();
    let inner_body = inner.children.last().unwrap();
    assert_eq!(phase_of(&tree, &inner_body.span), Ok(Phase::Inflight));
    let outer = tree.nodes().find(|n| n.kind == NodeKind::Closure).unwrap();
    assert_eq!(phase_of(&tree, &outer.span), Ok(Phase::Preflight));
}

#[test]
fn phase_of_rejects_foreign_span() {
    let tree = parse_text("let a = 1;").unwrap();
    let mut span = tree.root.span;
    span.end_byte = 999;
    assert!(phase_of(&tree, &span).is_err());
}

#[test]
fn reads_table_annotation() {
    let tree = parse_text("let t = [new cloud.Table(), {averageRecordSize: 200}][0];").unwrap();
    let anns = read_annotations(&tree).unwrap();
    assert_eq!(anns.len(), 1);
    assert_eq!(anns[0].entries, entries(&[("averageRecordSize", Scalar::Number(int(200)))]));
    let ctor = find(&tree, NodeKind::ConstructorCall, "cloud.Table");
    assert_eq!(anns[0].target_span, ctor.span);
}

#[test]
fn no_wrappers_no_annotations() {
    let tree = parse_text(LISTING_UPLOAD).unwrap();
    assert!(read_annotations(&tree).unwrap().is_empty());
}

#[test]
fn wrappers_are_reported_in_source_order() {
    let text = "let a = [new cloud.Bucket(), {x: 1}][0];\nlet b = [new cloud.Queue(), {y: \"s\", z: 2m}][0];";
    let tree = parse_text(text).unwrap();
    let anns = read_annotations(&tree).unwrap();
    assert_eq!(anns.len(), 2);
    assert!(anns[0].target_span.start_byte < anns[1].target_span.start_byte);
    assert_eq!(anns[1].entries["z"], Scalar::Duration(120));
    assert_eq!(anns[1].entries["y"], Scalar::Text("s".into()));
}

#[test]
fn malformed_wrappers_are_rejected() {
    for text in [
        "let a = [new cloud.Bucket(), {x: 1}][1];",
        "let a = [new cloud.Bucket(), 5][0];",
        "let a = [new cloud.Bucket(), {x: y}][0];",
        "let a = [new cloud.Bucket(), {x: 1, x: 2}][0];",
        "let a = [new cloud.Bucket()][0];",
    ] {
        let tree = parse_text(text).unwrap();
        assert!(
            matches!(read_annotations(&tree), Err(AnnotationError::MalformedAnnotation { .. })),
            "{text}"
        );
    }
}

#[test]
fn write_wraps_unannotated_expression() {
    let text = "schedule.onTick(inflight () => {\n  if let item = queue.pop() {\n  }\n});\n";
    let source = SourceFile::in_memory(text);
    let tree = parse(&source).unwrap();
    let pop = find(&tree, NodeKind::MethodCall, "pop");
    let written = write_annotation(&source, &pop.span, &entries(&[("avgItems", Scalar::Number(int(1)))])).unwrap();
    assert!(written.text.contains("[queue.pop(), {avgItems: 1}][0]"));
    assert_eq!(written.version, source.version + 1);
    // byte-level diff: only the target region changed
    let prefix = &text[..pop.span.start_byte];
    let suffix = &text[pop.span.end_byte..];
    assert!(written.text.starts_with(prefix));
    assert!(written.text.ends_with(suffix));
}

#[test]
fn write_with_no_entries_is_a_no_op() {
    let source = SourceFile::in_memory("let b = new cloud.Bucket();");
    let tree = parse(&source).unwrap();
    let ctor = find(&tree, NodeKind::ConstructorCall, "cloud.Bucket");
    let out = write_annotation(&source, &ctor.span, &BTreeMap::new()).unwrap();
    assert_eq!(out, source);
}

#[test]
fn rewriting_a_key_merges_into_the_existing_wrapper() {
    let text = "let t = [new cloud.Table(), {averageRecordSize: 200, note: \"x\"}][0];\nlet z = 1;";
    let source = SourceFile::in_memory(text);
    let tree = parse(&source).unwrap();
    let ctor = find(&tree, NodeKind::ConstructorCall, "cloud.Table");
    let out = write_annotation(
        &source,
        &ctor.span,
        &entries(&[("averageRecordSize", Scalar::Number(ratio(1, 2))), ("extra", Scalar::Bool(true))]),
    )
    .unwrap();
    assert_eq!(
        out.text,
        "let t = [new cloud.Table(), {averageRecordSize: 0.5, note: \"x\", extra: true}][0];\nlet z = 1;"
    );
    let anns = read_annotations(&parse(&out).unwrap()).unwrap();
    assert_eq!(anns.len(), 1);
    assert_eq!(anns[0].entries["averageRecordSize"], Scalar::Number(ratio(1, 2)));
}

#[test]
fn write_rejects_non_expression_targets() {
    let source = SourceFile::in_memory("let b = new cloud.Bucket();");
    let tree = parse(&source).unwrap();
    let stmt = &tree.root.children[0];
    let err = write_annotation(&source, &stmt.span, &entries(&[("k", Scalar::Number(int(1)))])).unwrap_err();
    assert!(matches!(err, WriteError::TargetNotAnExpression(_)));
}

#[test]
fn strip_inverts_write() {
    let source = SourceFile::in_memory(LISTING_UPLOAD);
    let tree = parse(&source).unwrap();
    let put = find(&tree, NodeKind::MethodCall, "put");
    let written = write_annotation(&source, &put.span, &entries(&[("payloadBytes", Scalar::Number(int(50_000_000)))])).unwrap();
    let tree = parse(&written).unwrap();
    assert_eq!(strip_annotations(&tree), LISTING_UPLOAD);
}

#[test]
fn child_spans_are_nested_and_ordered() {
    let tree = parse_text(LISTING_POP).unwrap();
    for node in tree.nodes() {
        let mut last = node.span.start_byte;
        for child in &node.children {
            assert!(node.span.contains(&child.span), "{:?} escapes {:?}", child.kind, node.kind);
            assert!(child.span.start_byte >= last);
            last = child.span.end_byte;
        }
    }
}

#[test]
fn expression_spans_reparse_to_the_same_kind() {
    for text in [LISTING_UPLOAD, LISTING_POP] {
        let tree = parse_text(text).unwrap();
        for node in tree.nodes().filter(|n| n.kind.is_expression()) {
            let reparsed = parse_expression(tree.slice(&node.span)).unwrap();
            assert_eq!(reparsed.kind, node.kind, "{}", tree.slice(&node.span));
        }
    }
}

#[test]
fn tree_dump_is_json() {
    let tree = parse_text("bring cloud;").unwrap();
    let json = tree.to_json();
    assert_eq!(json["kind"], "program");
    assert_eq!(json["children"][0]["kind"], "bring");
    assert_eq!(json["children"][0]["span"]["end_byte"], 12);
}
