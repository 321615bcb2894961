//! Seeded random cost graphs, assumption sets and flat-rate catalogs for
//! property and oracle tests.
//!
//! Generated programs have at most ten nodes, one endpoint entry point, unit
//! edge weights, integer monthly counts, and at most one diamond whose push
//! side is fed by that entry point and whose schedule period divides the
//! month.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assumptions::AssumptionSet;
use crate::graph::{units, CostFactor, CostGraph, CostNode, Diamond, EdgeKind, EntryRate, FactorKind, FlowEdge, NodeClass, Quantity};
use crate::num::{int, ratio, Rational, BYTES_PER_GB, SECONDS_PER_MONTH};
use crate::pricing::{AppliesTo, PriceRule, PricingCatalog, Scheme};
use crate::scalar::Scalar;
use crate::syntax::Span;

pub const MAX_NODES: usize = 10;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub graph: CostGraph,
    pub assumptions: AssumptionSet,
    pub catalog: PricingCatalog,
    /// Key of the endpoint's monthly rate.
    pub entry_key: String,
    /// (push node, pop node, diamond node) when a diamond exists.
    pub diamond: Option<(String, String, String)>,
    /// Ticks per month when a diamond exists.
    pub ticks: Option<i64>,
}

impl Scenario {
    pub fn entry_rate(&self) -> i64 {
        self.assumptions.number(&self.entry_key).and_then(|n| n.to_integer().try_into().ok()).expect("integer rate")
    }

    /// Whether every push is popped within the month it happens.
    pub fn push_within_ticks(&self) -> bool {
        self.ticks.is_none_or(|t| self.entry_rate() <= t)
    }
}

struct Gen {
    rng: ChaCha8Rng,
    graph: CostGraph,
    assumptions: AssumptionSet,
}

fn span(i: usize) -> Span {
    Span { start_byte: i, end_byte: i + 1, start_line: 1, start_col: i as u32 + 1, end_line: 1, end_col: i as u32 + 2 }
}

impl Gen {
    fn set(&mut self, key: &str, value: Rational) -> String {
        self.assumptions.set(key, Scalar::Number(value), crate::assumptions::Provenance::Override);
        key.to_string()
    }

    fn node(&mut self, class: NodeClass, operation: Option<&str>) -> String {
        let i = self.graph.nodes.len();
        let id = format!("n{i}");
        let subject = id.clone();
        let mut factors = Vec::new();
        match class {
            NodeClass::Endpoint | NodeClass::QueueOp => {
                factors.push(CostFactor::new(&id, FactorKind::Invocation, units::REQUEST, Quantity::constant(int(1))));
            }
            NodeClass::Function => {
                let memory = ratio(self.rng.gen_range(1..=16), 8);
                let duration = ratio(self.rng.gen_range(1..=1000), 1000);
                let inputs = vec![self.set(&format!("{id}.memoryGb"), memory), self.set(&format!("{id}.durationSeconds"), duration)];
                factors.push(CostFactor::new(&id, FactorKind::Invocation, units::GB_SECOND, Quantity { scale: int(1), inputs }));
            }
            NodeClass::BucketOp | NodeClass::TableOp => {
                factors.push(CostFactor::new(&id, FactorKind::Invocation, units::REQUEST, Quantity::constant(int(1))));
                if matches!(operation, Some("put") | Some("insert")) {
                    let bytes = int(self.rng.gen_range(1..=100_000_000));
                    let key = self.set(&format!("{id}.payloadBytes"), bytes);
                    let scale = ratio(1, BYTES_PER_GB as i64);
                    factors.push(CostFactor::new(&id, FactorKind::Accumulating, units::GB_MONTH, Quantity { scale, inputs: vec![key] }));
                }
            }
            NodeClass::ExternalHttpCall => {
                let usd = ratio(self.rng.gen_range(1..=100), 10_000);
                let key = self.set(&format!("{id}.pricePerCallUsd"), usd);
                factors.push(CostFactor::user_priced(&id, units::CALL, key));
            }
            NodeClass::ScheduleTick | NodeClass::StorageStock => {}
        }
        self.graph.nodes.push(CostNode {
            id: id.clone(),
            label: format!("{class}.{}", operation.unwrap_or("call")),
            node_class: class,
            span: span(i),
            subject,
            operation: operation.map(str::to_string),
            resource: None,
            entry_rate: None,
            factors,
        });
        id
    }

    fn edge(&mut self, from: &str, to: &str, kind: EdgeKind) -> String {
        let id = format!("e{}", self.graph.edges.len() + 1);
        self.graph.edges.push(FlowEdge { id: id.clone(), from: from.into(), to: to.into(), kind, weight: int(1), reason: "generated".into() });
        id
    }

    fn random_worker(&mut self) -> String {
        let choices: [(NodeClass, Option<&str>); 6] = [
            (NodeClass::Function, None),
            (NodeClass::BucketOp, Some("put")),
            (NodeClass::BucketOp, Some("get")),
            (NodeClass::TableOp, Some("insert")),
            (NodeClass::TableOp, Some("list")),
            (NodeClass::ExternalHttpCall, Some("post")),
        ];
        let (class, op) = *choices.choose(&mut self.rng).expect("non-empty");
        self.node(class, op)
    }
}

/// Divisors of the month length between one minute and one day, so every
/// schedule ticks a whole number of times per month.
fn tick_periods() -> Vec<i64> {
    (60..=86_400).filter(|d| SECONDS_PER_MONTH as i64 % d == 0).collect()
}

pub fn random_scenario(seed: u64) -> Scenario {
    build(seed, None)
}

/// A scenario with no schedule and therefore no diamond.
pub fn random_scenario_without_schedule(seed: u64) -> Scenario {
    build(seed, Some(false))
}

/// A scenario that always has a diamond.
pub fn random_scenario_with_diamond(seed: u64) -> Scenario {
    build(seed, Some(true))
}

fn build(seed: u64, diamond: Option<bool>) -> Scenario {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), graph: CostGraph::default(), assumptions: AssumptionSet::new() };
    let entry = g.node(NodeClass::Endpoint, Some("request"));
    let entry_key = format!("{entry}.requestsPerMonth");
    let rate = int(g.rng.gen_range(0..=20_000));
    g.set(&entry_key, rate);
    g.graph.nodes[0].entry_rate = Some(EntryRate::PerMonth { key: entry_key.clone() });

    let coin = g.rng.gen_bool(0.75);
    let with_diamond = diamond.unwrap_or(coin);
    let budget = if with_diamond { MAX_NODES - 4 } else { MAX_NODES - 1 };
    let workers = g.rng.gen_range(0..=budget.min(4));
    // nodes that carry the entry's flow
    let mut flow = vec![entry.clone()];
    for _ in 0..workers {
        let parent = flow.choose(&mut g.rng).expect("non-empty").clone();
        let child = g.random_worker();
        let kind = if g.rng.gen_bool(0.7) { EdgeKind::Sync } else { EdgeKind::Deferred };
        g.edge(&parent, &child, kind);
        flow.push(child);
    }

    let mut diamond = None;
    let mut ticks = None;
    if with_diamond {
        let parent = flow.choose(&mut g.rng).expect("non-empty").clone();
        let push = g.node(NodeClass::QueueOp, Some("push"));
        g.edge(&parent, &push, EdgeKind::Sync);
        let tick = g.node(NodeClass::ScheduleTick, Some("onTick"));
        let period = *tick_periods().choose(&mut g.rng).expect("non-empty");
        let rate_key = format!("{tick}.rateSeconds");
        let seconds = if g.rng.gen_bool(0.5) {
            g.set(&rate_key, int(period));
            None
        } else {
            Some(int(period))
        };
        g.graph.nodes.last_mut().expect("just pushed").entry_rate = Some(EntryRate::Interval { key: rate_key, seconds });
        let pop = g.node(NodeClass::QueueOp, Some("pop"));
        g.edge(&tick, &pop, EdgeKind::Deferred);
        let target = g.random_worker();
        let dominant = g.edge(&push, &target, EdgeKind::ImplicitDominant);
        let secondary = g.edge(&pop, &target, EdgeKind::ImplicitSecondary);
        g.graph.diamonds.push(Diamond { node: target.clone(), dominant: vec![dominant], secondary: vec![secondary] });
        let room = MAX_NODES - g.graph.nodes.len();
        let mut downstream = vec![target.clone()];
        for _ in 0..g.rng.gen_range(0..=room.min(2)) {
            let parent = downstream.choose(&mut g.rng).expect("non-empty").clone();
            let child = g.random_worker();
            g.edge(&parent, &child, EdgeKind::Sync);
            downstream.push(child);
        }
        diamond = Some((push, pop, target));
        ticks = Some(SECONDS_PER_MONTH as i64 / period);
    }

    let catalog = flat_catalog(&g.graph, &mut g.rng);
    Scenario { graph: g.graph, assumptions: g.assumptions, catalog, entry_key, diamond, ticks }
}

/// One per-unit rule for every (class, unit) the graph bills, zero
/// allowances.
fn flat_catalog(graph: &CostGraph, rng: &mut ChaCha8Rng) -> PricingCatalog {
    let mut pairs: Vec<(NodeClass, String)> = graph
        .nodes
        .iter()
        .flat_map(|n| n.factors.iter().filter(|f| f.price_key.is_none()).map(move |f| (n.node_class, f.unit.clone())))
        .collect();
    pairs.sort();
    pairs.dedup();
    let rules = pairs
        .into_iter()
        .map(|(class, unit)| {
            let rate = if rng.gen_bool(0.5) { int(rng.gen_range(0..=100_000)) } else { ratio(rng.gen_range(0..=1_000), 10) };
            PriceRule {
                applies_to: AppliesTo { node_class: class, unit },
                scheme: Scheme::PerUnit { rate },
                free_allowance: int(0),
            }
        })
        .collect();
    PricingCatalog { vendor_id: "flat".into(), version: "test".into(), rules }
}

/// Copy of `assumptions` with the entry rate multiplied by `k`.
pub fn scale_entry_rate(scenario: &Scenario, k: &Rational) -> AssumptionSet {
    let mut scaled = scenario.assumptions.clone();
    let rate = scenario.assumptions.number(&scenario.entry_key).expect("entry rate is set");
    scaled.set(&scenario.entry_key, Scalar::Number(rate * k), crate::assumptions::Provenance::Override);
    scaled
}

/// The transcription service example.
pub const FIXTURE: &str = include_str!("../examples/transcription.w");
/// The bundled flat-rate catalog.
pub const ACME_V1: &str = include_str!("../catalogs/acme-v1.json");
/// The bundled tiered catalog.
pub const GLOBEX_V1: &str = include_str!("../catalogs/globex-v1.json");
/// Assumptions behind the golden report.
pub const GOLDEN_ASSUMPTIONS: &str = include_str!("../tests/golden/assumptions.json");

pub fn golden_overrides() -> std::collections::BTreeMap<String, Scalar> {
    serde_json::from_str(GOLDEN_ASSUMPTIONS).expect("golden assumptions parse")
}

pub fn acme() -> PricingCatalog {
    crate::pricing::parse_catalog(ACME_V1).expect("bundled catalog parses")
}

pub fn globex() -> PricingCatalog {
    crate::pricing::parse_catalog(GLOBEX_V1).expect("bundled catalog parses")
}

/// Id of the first node with `label`.
pub fn node_id(graph: &CostGraph, label: &str) -> String {
    graph.nodes.iter().find(|n| n.label == label).map(|n| n.id.clone()).unwrap_or_else(|| panic!("no node labelled {label}"))
}

/// Id of the handler function node whose keys start with `subject`.
pub fn fn_id(graph: &CostGraph, subject: &str) -> String {
    graph
        .nodes
        .iter()
        .find(|n| n.node_class == NodeClass::Function && n.subject == subject)
        .map(|n| n.id.clone())
        .unwrap_or_else(|| panic!("no function {subject}"))
}
