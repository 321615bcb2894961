use std::collections::{BTreeMap, HashMap, HashSet};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::resources::{annotation_index, key, AnnotationIndex};
use super::{span_id, ExtractError, MethodRole, ResourceCall, ResourceDecl, ResourceType, TriggerEdge, TriggerRule};
use crate::assumptions::{AssumptionSet, Provenance};
use crate::graph::{
    units, CostFactor, CostGraph, CostNode, Diamond, EdgeKind, EntryRate, FactorKind, FlowEdge, NodeClass, Quantity,
};
use crate::num::{int, parse_decimal, Rational, BYTES_PER_GB};
use crate::scalar::{parse_duration, Scalar};
use crate::syntax::{NodeKind, Span, SyntaxNode, SyntaxTree};

/// What an assumption key may hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    /// Number ≥ 0.
    Count,
    /// Number ≥ 0 in the unit named by the key.
    Quantity,
    /// Number > 0.
    Positive,
    /// Number in [0, 1].
    Probability,
    /// USD ≥ 0.
    Money,
    /// An endpoint route such as `/callback`.
    Route,
}

impl ValueType {
    pub fn coerce(self, key: &str, value: &Scalar) -> Result<Scalar, ExtractError> {
        let invalid = |reason: &str| ExtractError::InvalidAssumption { key: key.to_string(), reason: reason.to_string() };
        if self == ValueType::Route {
            return match value {
                Scalar::Text(route) if route.starts_with('/') => Ok(value.clone()),
                _ => Err(invalid("expected a route starting with `/`")),
            };
        }
        let number = match value {
            Scalar::Text(text) => parse_decimal(text).or_else(|| parse_duration(text).map(|s| int(s as i64))),
            other => other.as_number(),
        }
        .ok_or_else(|| invalid("expected a number"))?;
        match self {
            ValueType::Positive if !number.is_positive() => Err(invalid("must be greater than 0")),
            ValueType::Probability if number.is_negative() || number > int(1) => Err(invalid("must lie in [0, 1]")),
            _ if number.is_negative() => Err(invalid("must not be negative")),
            _ => Ok(Scalar::Number(number)),
        }
    }
}

/// A place where an assumption can be supplied: the key, and the expression
/// an annotation for it wraps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub key: String,
    pub subject: String,
    pub annotation_key: String,
    pub target: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    pub value_type: ValueType,
    /// Changes the graph's shape rather than a quantity.
    pub structural: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Extraction {
    pub graph: CostGraph,
    pub slots: Vec<Slot>,
    pub assumptions: AssumptionSet,
}

impl Extraction {
    pub fn slot(&self, key: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.key == key)
    }
}

#[derive(Debug, Clone)]
enum Src {
    Node(String),
    /// Every `put` on the bucket.
    Puts(String),
    /// Every `push` on the queue; `share` is the annotated consumer share.
    Pushes { queue: String, share: Option<Rational> },
}

#[derive(Debug, Clone)]
struct Pred {
    src: Src,
    kind: EdgeKind,
    weight: Rational,
    reason: String,
}

struct PendingEdge {
    src: Src,
    to: String,
    kind: EdgeKind,
    weight: Rational,
    reason: String,
}

const SEQUENCE: &str = "sequence";
const CALLS_ENDPOINT: &str = "callsEndpoint";

struct Builder<'a> {
    resources: HashMap<&'a str, &'a ResourceDecl>,
    function_ctors: HashMap<(usize, usize), &'a ResourceDecl>,
    calls: HashMap<(usize, usize), &'a ResourceCall>,
    rules: &'a [TriggerRule],
    overrides: &'a BTreeMap<String, Scalar>,
    annotations: AnnotationIndex,
    nodes: Vec<CostNode>,
    pending: Vec<PendingEdge>,
    slots: Vec<Slot>,
    slot_index: HashMap<String, usize>,
    assumptions: AssumptionSet,
    subjects: HashSet<String>,
    resource_subjects: HashMap<String, String>,
    diamonds: Vec<(String, String)>,
    writers: HashMap<(String, &'static str), Vec<String>>,
    endpoints: Vec<(String, String)>,
    links: Vec<(String, String, Span)>,
    node_by_call: HashMap<(usize, usize), usize>,
    handled: HashSet<(usize, usize)>,
}

/// Connects resources and calls into a cost graph.
///
/// `overrides` take precedence over annotations in the source. Keys that
/// change the graph's shape (multiplicity, probability, consumerShare,
/// callsEndpoint) are applied here, so a change to any of them requires a
/// rebuild.
pub fn build_graph(
    tree: &SyntaxTree,
    resources: &[ResourceDecl],
    calls: &[ResourceCall],
    rules: &[TriggerRule],
    overrides: &BTreeMap<String, Scalar>,
) -> Result<Extraction, ExtractError> {
    let mut b = Builder {
        resources: resources.iter().map(|d| (d.id.as_str(), d)).collect(),
        function_ctors: resources
            .iter()
            .filter(|d| d.resource_type == ResourceType::Function && !d.implicit)
            .map(|d| ((d.decl_span.start_byte, d.decl_span.end_byte), d))
            .collect(),
        calls: calls.iter().map(|c| ((c.call_span.start_byte, c.call_span.end_byte), c)).collect(),
        rules,
        overrides,
        annotations: annotation_index(tree)?,
        nodes: Vec::new(),
        pending: Vec::new(),
        slots: Vec::new(),
        slot_index: HashMap::new(),
        assumptions: AssumptionSet::new(),
        subjects: HashSet::new(),
        resource_subjects: HashMap::new(),
        diamonds: Vec::new(),
        writers: HashMap::new(),
        endpoints: Vec::new(),
        links: Vec::new(),
        node_by_call: HashMap::new(),
        handled: HashSet::new(),
    };
    for stmt in &tree.root.children {
        b.preflight(stmt)?;
    }
    b.finish()
}

fn route_subject(route: &str) -> String {
    let segments: Vec<String> = route.split('/').map(sanitize).filter(|s| !s.is_empty()).collect();
    if segments.is_empty() {
        "root".into()
    } else {
        segments.join(".")
    }
}

fn sanitize(text: &str) -> String {
    text.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '_' || *c == '-').collect()
}

/// `http.transcribe` for `http://example.com/transcribe`.
fn http_subject(url: Option<&str>) -> String {
    let Some(url) = url else { return "http.call".into() };
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let mut parts = rest.split(['?', '#']).next().unwrap_or("").split('/');
    let host = parts.next().unwrap_or("");
    let segment = parts.map(sanitize).rfind(|s| !s.is_empty());
    let name = segment.unwrap_or_else(|| sanitize(host.split('.').next().unwrap_or("")));
    if name.is_empty() {
        "http.call".into()
    } else {
        format!("http.{name}")
    }
}

fn handler_closure(call: &SyntaxNode) -> Option<&SyntaxNode> {
    call.children[1..].iter().map(SyntaxNode::unwrapped).find(|a| a.kind == NodeKind::Closure)
}

fn body(closure: &SyntaxNode) -> &SyntaxNode {
    closure.children.last().expect("closure has a body")
}

impl<'a> Builder<'a> {
    fn unique_subject(&mut self, base: &str) -> String {
        let mut subject = base.to_string();
        let mut n = 2;
        while !self.subjects.insert(subject.clone()) {
            subject = format!("{base}_{n}");
            n += 1;
        }
        subject
    }

    fn resource_subject(&mut self, decl: &ResourceDecl) -> String {
        if let Some(s) = self.resource_subjects.get(&decl.id) {
            return s.clone();
        }
        let base = decl.binding_name.clone().unwrap_or_else(|| decl.resource_type.name().to_lowercase());
        let subject = self.unique_subject(&base);
        self.resource_subjects.insert(decl.id.clone(), subject.clone());
        subject
    }

    fn rule(&self, ty: ResourceType, method: &str) -> Option<&'a TriggerRule> {
        self.rules.iter().find(|r| r.matches_target(ty, method))
    }

    /// Registers `subject.annotation_key` and returns its resolved value.
    fn slot(
        &mut self,
        subject: &str,
        annotation_key: &str,
        target: Span,
        node: Option<&str>,
        value_type: ValueType,
        structural: bool,
    ) -> Result<(String, Option<Scalar>), ExtractError> {
        let key = format!("{subject}.{annotation_key}");
        if !self.slot_index.contains_key(&key) {
            self.slot_index.insert(key.clone(), self.slots.len());
            self.slots.push(Slot {
                key: key.clone(),
                subject: subject.to_string(),
                annotation_key: annotation_key.to_string(),
                target,
                node: node.map(str::to_string),
                value_type,
                structural,
            });
        }
        let found = match self.overrides.get(&key) {
            Some(v) => Some((v.clone(), Provenance::Override)),
            None => self
                .annotations
                .get(&(target.start_byte, target.end_byte))
                .and_then(|entries| entries.get(annotation_key))
                .map(|v| (v.clone(), Provenance::Annotation)),
        };
        match found {
            Some((raw, provenance)) => {
                let value = value_type.coerce(&key, &raw)?;
                self.assumptions.set(key.clone(), value.clone(), provenance);
                Ok((key, Some(value)))
            }
            None => Ok((key, None)),
        }
    }

    fn push_node(&mut self, node: CostNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn function_node(&mut self, span: Span, subject: String, target: Span, entry_rate: Option<EntryRate>) -> Result<String, ExtractError> {
        let id = span_id("fn", &span);
        let (memory, _) = self.slot(&subject, "memoryGb", target, Some(&id), ValueType::Quantity, false)?;
        let (duration, _) = self.slot(&subject, "durationSeconds", target, Some(&id), ValueType::Quantity, false)?;
        let factor = CostFactor::new(
            &id,
            FactorKind::Invocation,
            units::GB_SECOND,
            Quantity { scale: Rational::one(), inputs: vec![memory, duration] },
        );
        self.push_node(CostNode {
            id: id.clone(),
            label: "fn".into(),
            node_class: NodeClass::Function,
            span,
            subject,
            operation: None,
            resource: None,
            entry_rate,
            factors: vec![factor],
        });
        Ok(id)
    }

    // ---- preflight ----

    fn preflight(&mut self, node: &'a SyntaxNode) -> Result<(), ExtractError> {
        match node.kind {
            NodeKind::Closure => {
                if self.handled.insert(key(node)) {
                    self.walk_block(body(node), Vec::new())?;
                }
                return Ok(());
            }
            NodeKind::MethodCall => {
                if let Some(call) = self.calls.get(&key(node)).copied() {
                    if call.role() == MethodRole::Registration {
                        self.registration(node, call)?;
                    }
                }
            }
            NodeKind::ConstructorCall => {
                if let Some(decl) = self.function_ctors.get(&key(node)).copied() {
                    self.function_resource(node, decl)?;
                }
            }
            _ => {}
        }
        for child in &node.children {
            self.preflight(child)?;
        }
        Ok(())
    }

    fn registration(&mut self, node: &'a SyntaxNode, call: &'a ResourceCall) -> Result<(), ExtractError> {
        let decl = self.resources[call.resource_id.as_str()];
        let ty = decl.resource_type;
        let handler = handler_closure(node).ok_or_else(|| ExtractError::UnsupportedArgument {
            span: node.span,
            method: call.method.clone(),
            expected: "an inline inflight closure as handler".into(),
        })?;
        self.handled.insert(key(handler));
        let rule = self.rule(ty, &call.method);
        let preds = match ty {
            ResourceType::Api => {
                let route = match call.args_summary.get("arg0") {
                    Some(Scalar::Text(route)) => route.clone(),
                    _ => {
                        return Err(ExtractError::UnsupportedArgument {
                            span: node.span,
                            method: call.method.clone(),
                            expected: "a string literal route as first argument".into(),
                        })
                    }
                };
                let subject = self.unique_subject(&route_subject(&route));
                let id = span_id(&route, &call.call_span);
                let (rate_key, _) = self.slot(&subject, "requestsPerMonth", call.call_span, Some(&id), ValueType::Count, false)?;
                let mut factors = vec![CostFactor::new(&id, FactorKind::Invocation, units::REQUEST, Quantity::constant(int(1)))];
                let (egress_key, egress) = self.slot(&subject, "egressBytes", call.call_span, Some(&id), ValueType::Quantity, false)?;
                if egress.is_some() {
                    factors.push(CostFactor::new(
                        &id,
                        FactorKind::Invocation,
                        units::GB,
                        Quantity { scale: Rational::new(1.into(), BYTES_PER_GB.into()), inputs: vec![egress_key] },
                    ));
                }
                self.push_node(CostNode {
                    id: id.clone(),
                    label: route.clone(),
                    node_class: NodeClass::Endpoint,
                    span: call.call_span,
                    subject: subject.clone(),
                    operation: Some(call.method.clone()),
                    resource: Some(decl.id.clone()),
                    entry_rate: Some(EntryRate::PerMonth { key: rate_key }),
                    factors,
                });
                self.endpoints.push((route, id.clone()));
                let fn_subject = self.unique_subject(&format!("{subject}.fn"));
                let fn_id = self.function_node(handler.span, fn_subject, handler.span, None)?;
                if let Some(rule) = rule {
                    self.pending.push(PendingEdge {
                        src: Src::Node(id),
                        to: fn_id.clone(),
                        kind: EdgeKind::Deferred,
                        weight: int(1),
                        reason: rule.describe(),
                    });
                }
                vec![Pred { src: Src::Node(fn_id), kind: EdgeKind::Sync, weight: int(1), reason: SEQUENCE.into() }]
            }
            ResourceType::Bucket => match rule {
                Some(rule) => vec![Pred {
                    src: Src::Puts(decl.id.clone()),
                    kind: EdgeKind::Deferred,
                    weight: int(1),
                    reason: rule.describe(),
                }],
                None => Vec::new(),
            },
            ResourceType::Schedule => {
                let subject = self.resource_subject(decl);
                let id = span_id("Schedule.onTick", &call.call_span);
                let (rate_key, _) = self.slot(&subject, "rateSeconds", decl.decl_span, Some(&id), ValueType::Positive, false)?;
                let seconds = decl.props.get("rate").and_then(Scalar::as_number).filter(|s| s.is_positive());
                self.push_node(CostNode {
                    id: id.clone(),
                    label: "Schedule.onTick".into(),
                    node_class: NodeClass::ScheduleTick,
                    span: call.call_span,
                    subject,
                    operation: Some(call.method.clone()),
                    resource: Some(decl.id.clone()),
                    entry_rate: Some(EntryRate::Interval { key: rate_key, seconds }),
                    factors: Vec::new(),
                });
                match rule {
                    Some(rule) => vec![Pred { src: Src::Node(id), kind: EdgeKind::Deferred, weight: int(1), reason: rule.describe() }],
                    None => Vec::new(),
                }
            }
            _ => Vec::new(),
        };
        self.walk_block(body(handler), preds)?;
        Ok(())
    }

    fn function_resource(&mut self, ctor: &'a SyntaxNode, decl: &'a ResourceDecl) -> Result<(), ExtractError> {
        let Some(closure) = ctor.children.iter().map(SyntaxNode::unwrapped).find(|a| a.kind == NodeKind::Closure) else {
            return Ok(());
        };
        self.handled.insert(key(closure));
        let subject = self.resource_subject(decl);
        let id = span_id("fn", &ctor.span);
        let (rate_key, _) = self.slot(&subject, "invocationsPerMonth", ctor.span, Some(&id), ValueType::Count, false)?;
        let fn_id = self.function_node(ctor.span, subject, ctor.span, Some(EntryRate::PerMonth { key: rate_key }))?;
        let preds = vec![Pred { src: Src::Node(fn_id), kind: EdgeKind::Sync, weight: int(1), reason: SEQUENCE.into() }];
        self.walk_block(body(closure), preds)?;
        Ok(())
    }

    // ---- inflight ----

    fn walk_block(&mut self, block: &'a SyntaxNode, preds: Vec<Pred>) -> Result<Vec<Pred>, ExtractError> {
        let mut preds = preds;
        for stmt in &block.children {
            preds = self.walk_stmt(stmt, preds)?;
        }
        Ok(preds)
    }

    fn walk_stmt(&mut self, stmt: &'a SyntaxNode, preds: Vec<Pred>) -> Result<Vec<Pred>, ExtractError> {
        match stmt.kind {
            NodeKind::IfLet => self.if_let(stmt, preds),
            NodeKind::Block => self.walk_block(stmt, preds),
            NodeKind::Bring => Ok(preds),
            _ => self.walk_children(stmt, preds),
        }
    }

    fn walk_children(&mut self, node: &'a SyntaxNode, preds: Vec<Pred>) -> Result<Vec<Pred>, ExtractError> {
        let mut preds = preds;
        for child in &node.children {
            preds = self.walk_expr(child, preds)?;
        }
        Ok(preds)
    }

    fn walk_expr(&mut self, expr: &'a SyntaxNode, preds: Vec<Pred>) -> Result<Vec<Pred>, ExtractError> {
        match expr.kind {
            NodeKind::Closure => {
                self.handled.insert(key(expr));
                self.walk_block(body(expr), preds)
            }
            NodeKind::MethodCall | NodeKind::Call => {
                let preds = self.walk_children(expr, preds)?;
                match self.calls.get(&key(expr)).copied() {
                    Some(call) if call.role() == MethodRole::Data => self.data_node(call, preds),
                    _ => Ok(preds),
                }
            }
            _ => self.walk_children(expr, preds),
        }
    }

    fn if_let(&mut self, stmt: &'a SyntaxNode, preds: Vec<Pred>) -> Result<Vec<Pred>, ExtractError> {
        let scrutinee = &stmt.children[0];
        let after = self.walk_expr(scrutinee, preds)?;
        let inner = scrutinee.unwrapped();
        let pop = self.node_by_call.get(&key(inner)).copied();
        let subject = match pop {
            Some(i) => self.nodes[i].subject.clone(),
            None => format!("branch.{}.{}", inner.span.start_line, inner.span.start_col),
        };
        let (_, probability) = self.slot(&subject, "probability", inner.span, None, ValueType::Probability, true)?;
        let p = probability.as_ref().and_then(Scalar::as_number);
        let taken = p.clone().unwrap_or_else(|| int(1));
        let scaled = |preds: &[Pred], by: &Rational| -> Vec<Pred> {
            preds.iter().map(|pr| Pred { weight: &pr.weight * by, ..pr.clone() }).collect()
        };

        let guard = pop.and_then(|i| {
            let node = &self.nodes[i];
            let queue = node.resource.clone()?;
            (node.node_class == NodeClass::QueueOp && node.operation.as_deref() == Some("pop")).then_some((i, queue))
        });
        let implicit_rule = self
            .rules
            .iter()
            .find(|r| r.edge_kind == TriggerEdge::Implicit && r.matches_target(ResourceType::Queue, "pop"));
        let then_preds = match (guard, implicit_rule) {
            (Some((i, queue)), Some(rule)) => {
                let (node_id, span, subject) = {
                    let n = &self.nodes[i];
                    (n.id.clone(), n.span, n.subject.clone())
                };
                let (_, share) = self.slot(&subject, "consumerShare", span, Some(&node_id), ValueType::Probability, true)?;
                let mut preds: Vec<Pred> = after
                    .iter()
                    .map(|pr| Pred {
                        src: pr.src.clone(),
                        kind: EdgeKind::ImplicitSecondary,
                        weight: &pr.weight * &taken,
                        reason: rule.describe(),
                    })
                    .collect();
                preds.push(Pred {
                    src: Src::Pushes { queue, share: share.and_then(|s| s.as_number()) },
                    kind: EdgeKind::ImplicitDominant,
                    weight: taken.clone(),
                    reason: rule.describe(),
                });
                preds
            }
            _ => scaled(&after, &taken),
        };
        self.walk_block(&stmt.children[1], then_preds)?;
        if let Some(otherwise) = stmt.children.get(2) {
            let rest = p.map_or_else(|| int(1), |p| int(1) - p);
            self.walk_block(otherwise, scaled(&after, &rest))?;
        }
        Ok(after)
    }

    fn data_node(&mut self, call: &'a ResourceCall, preds: Vec<Pred>) -> Result<Vec<Pred>, ExtractError> {
        let (label, class, subject, decl) = match call.resource_type {
            Some(ty) => {
                let decl = self.resources[call.resource_id.as_str()];
                let class = match ty {
                    ResourceType::Bucket => NodeClass::BucketOp,
                    ResourceType::Queue => NodeClass::QueueOp,
                    ResourceType::Table => NodeClass::TableOp,
                    _ => unreachable!("only storage resources have data methods"),
                };
                let base = format!("{}.{}", self.resource_subject(decl), call.method);
                (format!("{ty}.{}", call.method), class, self.unique_subject(&base), Some(decl))
            }
            None => {
                let url = call.args_summary.get("arg0").and_then(Scalar::as_text);
                let base = http_subject(url);
                (call.method.clone(), NodeClass::ExternalHttpCall, self.unique_subject(&base), None)
            }
        };
        let span = call.call_span;
        let id = span_id(&label, &span);
        let mut factors = Vec::new();
        match class {
            NodeClass::ExternalHttpCall => {
                let (price, _) = self.slot(&subject, "pricePerCallUsd", span, Some(&id), ValueType::Money, false)?;
                factors.push(CostFactor::user_priced(&id, units::CALL, price));
                let (_, target) = self.slot(&subject, CALLS_ENDPOINT, span, Some(&id), ValueType::Route, true)?;
                if let Some(Scalar::Text(route)) = target {
                    self.links.push((id.clone(), route, span));
                }
            }
            _ => {
                factors.push(CostFactor::new(&id, FactorKind::Invocation, units::REQUEST, Quantity::constant(int(1))));
                let per_gb = Rational::new(1.into(), BYTES_PER_GB.into());
                let decl = decl.expect("resource op");
                match (class, call.method.as_str()) {
                    (NodeClass::BucketOp, "put") => {
                        let (bytes, _) = self.slot(&subject, "payloadBytes", span, Some(&id), ValueType::Quantity, false)?;
                        factors.push(CostFactor::new(
                            &id,
                            FactorKind::Accumulating,
                            units::GB_MONTH,
                            Quantity { scale: per_gb, inputs: vec![bytes] },
                        ));
                    }
                    (NodeClass::TableOp, "insert") => {
                        let table = self.resource_subject(decl);
                        let (bytes, _) = self.slot(&table, "averageRecordSize", decl.decl_span, None, ValueType::Quantity, false)?;
                        factors.push(CostFactor::new(
                            &id,
                            FactorKind::Accumulating,
                            units::GB_MONTH,
                            Quantity { scale: per_gb, inputs: vec![bytes] },
                        ));
                    }
                    _ => {}
                }
            }
        }
        let (_, multiplicity) = self.slot(&subject, "multiplicity", span, Some(&id), ValueType::Count, true)?;
        let k = multiplicity.and_then(|m| m.as_number()).unwrap_or_else(|| int(1));

        let index = self.push_node(CostNode {
            id: id.clone(),
            label,
            node_class: class,
            span,
            subject,
            operation: call.resource_type.map(|_| call.method.clone()),
            resource: decl.map(|d| d.id.clone()),
            entry_rate: None,
            factors,
        });
        self.node_by_call.insert((span.start_byte, span.end_byte), index);
        if let Some(decl) = decl {
            let tag: Option<&'static str> = match (decl.resource_type, call.method.as_str()) {
                (ResourceType::Bucket, "put") => Some("put"),
                (ResourceType::Queue, "push") => Some("push"),
                _ => None,
            };
            if let Some(tag) = tag {
                self.writers.entry((decl.id.clone(), tag)).or_default().push(id.clone());
            }
        }
        for pred in &preds {
            if let Src::Pushes { queue, .. } = &pred.src {
                if !self.diamonds.iter().any(|(n, _)| *n == id) {
                    self.diamonds.push((id.clone(), queue.clone()));
                }
            }
            self.pending.push(PendingEdge {
                src: pred.src.clone(),
                to: id.clone(),
                kind: pred.kind,
                weight: &pred.weight * &k,
                reason: pred.reason.clone(),
            });
        }
        if k.is_zero() {
            return Ok(preds);
        }
        Ok(vec![Pred { src: Src::Node(id), kind: EdgeKind::Sync, weight: int(1) / k, reason: SEQUENCE.into() }])
    }

    // ---- assembly ----

    fn finish(mut self) -> Result<Extraction, ExtractError> {
        let mut consumers: HashMap<&str, usize> = HashMap::new();
        for (_, queue) in &self.diamonds {
            *consumers.entry(queue.as_str()).or_default() += 1;
        }
        let mut edges = Vec::new();
        let mut add = |from: String, to: String, kind: EdgeKind, weight: Rational, reason: String| {
            let id = format!("e{}", edges.len() + 1);
            edges.push(FlowEdge { id, from, to, kind, weight, reason });
        };
        for pe in std::mem::take(&mut self.pending) {
            match pe.src {
                Src::Node(from) => add(from, pe.to, pe.kind, pe.weight, pe.reason),
                Src::Puts(bucket) => {
                    for from in self.writers.get(&(bucket, "put")).cloned().unwrap_or_default() {
                        add(from, pe.to.clone(), pe.kind, pe.weight.clone(), pe.reason.clone());
                    }
                }
                Src::Pushes { queue, share } => {
                    let share = share.unwrap_or_else(|| int(1) / int(consumers[queue.as_str()] as i64));
                    let weight = &pe.weight * &share;
                    for from in self.writers.get(&(queue, "push")).cloned().unwrap_or_default() {
                        add(from, pe.to.clone(), pe.kind, weight.clone(), pe.reason.clone());
                    }
                }
            }
        }
        for (from, route, span) in std::mem::take(&mut self.links) {
            let targets: Vec<&String> = self.endpoints.iter().filter(|(r, _)| *r == route).map(|(_, id)| id).collect();
            match targets.as_slice() {
                [] => return Err(ExtractError::UnknownRoute { span, route }),
                [target] => add(from, (*target).clone(), EdgeKind::Deferred, int(1), CALLS_ENDPOINT.into()),
                _ => return Err(ExtractError::AmbiguousRoute { span, route }),
            }
        }
        let diamonds = self
            .diamonds
            .iter()
            .map(|(node, _)| {
                let of = |kind: EdgeKind| edges.iter().filter(|e| e.to == *node && e.kind == kind).map(|e| e.id.clone()).collect();
                Diamond { node: node.clone(), dominant: of(EdgeKind::ImplicitDominant), secondary: of(EdgeKind::ImplicitSecondary) }
            })
            .collect();

        let targeted: HashSet<String> = edges.iter().map(|e| e.to.clone()).collect();
        for i in 0..self.nodes.len() {
            if self.nodes[i].entry_rate.is_none() && !targeted.contains(&self.nodes[i].id) {
                let (subject, span, id) = (self.nodes[i].subject.clone(), self.nodes[i].span, self.nodes[i].id.clone());
                let (key, _) = self.slot(&subject, "invocationsPerMonth", span, Some(&id), ValueType::Count, false)?;
                self.nodes[i].entry_rate = Some(EntryRate::PerMonth { key });
            }
        }
        if let Some(unknown) = self.overrides.keys().find(|k| !self.slot_index.contains_key(*k)) {
            return Err(ExtractError::UnknownAssumption { key: unknown.clone() });
        }
        Ok(Extraction {
            graph: CostGraph { nodes: self.nodes, edges, diamonds },
            slots: self.slots,
            assumptions: self.assumptions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subjects_from_routes_and_urls() {
        assert_eq!(route_subject("/upload"), "upload");
        assert_eq!(route_subject("/users/{id}/files"), "users.id.files");
        assert_eq!(route_subject("/"), "root");
        assert_eq!(http_subject(Some("http://example.com/transcribe")), "http.transcribe");
        assert_eq!(http_subject(Some("https://api.example.com/")), "http.api");
        assert_eq!(http_subject(None), "http.call");
    }

    #[test]
    fn value_types_check_ranges() {
        assert!(ValueType::Probability.coerce("k", &Scalar::Number(int(2))).is_err());
        assert!(ValueType::Count.coerce("k", &Scalar::Number(int(-1))).is_err());
        assert!(ValueType::Positive.coerce("k", &Scalar::Number(int(0))).is_err());
        assert_eq!(ValueType::Count.coerce("k", &Scalar::Text("12".into())).unwrap(), Scalar::Number(int(12)));
        assert_eq!(ValueType::Positive.coerce("k", &Scalar::Duration(60)).unwrap(), Scalar::Number(int(60)));
        assert!(ValueType::Route.coerce("k", &Scalar::Text("callback".into())).is_err());
    }
}
