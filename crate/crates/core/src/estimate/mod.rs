//! Monthly counts, stocks and cost reports over a bound model.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assumptions::AssumptionSet;
use crate::graph::{factor_catalogue, unresolved_keys, CostFactor, CostGraph, EdgeKind, EntryRate, FactorKind, NodeClass};
use crate::num::{int, serde_rational, Micros, Rational, SECONDS_PER_MONTH};
use crate::pricing::{bind, evaluate_exact, marginal_rate, BindError, BoundModel, Price, PricingCatalog, Scheme};
use crate::syntax::Span;

pub const CURRENCY: &str = "USD_micro";

const MICROS_PER_USD: i64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "error")]
pub enum EstimateError {
    #[error("cycle through {}", .nodes.join(", "))]
    CycleDetected { nodes: Vec<String> },
    #[error("unresolved assumptions: {}", .keys.join(", "))]
    UnresolvedAssumption { keys: Vec<String> },
    #[error("month must be at least 1")]
    InvalidMonth,
    #[error("`{node}` is not an entry point")]
    NotAnEntryPoint { node: String },
    #[error("factor `{factor}` has a negative quantity")]
    NegativeQuantity { factor: String },
    #[error(transparent)]
    Unpriced(BindError),
    #[error("simulation would need {events} events (limit {limit})")]
    SimulationTooLarge { events: u128, limit: u128 },
}

impl From<BindError> for EstimateError {
    fn from(e: BindError) -> Self {
        EstimateError::Unpriced(e)
    }
}

/// Per-invocation units of `factor`: `scale × Π inputs`.
pub fn per_invocation(factor: &CostFactor, assumptions: &AssumptionSet) -> Result<Rational, EstimateError> {
    let mut value = factor.quantity.scale.clone();
    let mut missing = Vec::new();
    for key in &factor.quantity.inputs {
        match assumptions.number(key) {
            Some(n) => value *= n,
            None => missing.push(key.clone()),
        }
    }
    if missing.is_empty() {
        Ok(value)
    } else {
        Err(EstimateError::UnresolvedAssumption { keys: missing })
    }
}

fn require_resolved(graph: &CostGraph, assumptions: &AssumptionSet) -> Result<(), EstimateError> {
    let keys = unresolved_keys(&factor_catalogue(graph, assumptions));
    if keys.is_empty() {
        Ok(())
    } else {
        Err(EstimateError::UnresolvedAssumption { keys })
    }
}

/// Node ids in an order where every edge goes forward.
pub fn topological_order(graph: &CostGraph) -> Result<Vec<&str>, EstimateError> {
    let mut indegree: BTreeMap<&str, usize> = graph.nodes.iter().map(|n| (n.id.as_str(), 0)).collect();
    for e in &graph.edges {
        if let Some(d) = indegree.get_mut(e.to.as_str()) {
            *d += 1;
        }
    }
    let mut ready: VecDeque<&str> = graph.nodes.iter().map(|n| n.id.as_str()).filter(|id| indegree[id] == 0).collect();
    let mut order = Vec::with_capacity(graph.nodes.len());
    while let Some(id) = ready.pop_front() {
        order.push(id);
        for e in graph.out_edges(id) {
            if let Some(d) = indegree.get_mut(e.to.as_str()) {
                *d -= 1;
                if *d == 0 {
                    ready.push_back(e.to.as_str());
                }
            }
        }
    }
    if order.len() < graph.nodes.len() {
        let done: BTreeSet<&str> = order.iter().copied().collect();
        let nodes = graph.nodes.iter().map(|n| n.id.clone()).filter(|id| !done.contains(id.as_str())).collect();
        return Err(EstimateError::CycleDetected { nodes });
    }
    Ok(order)
}

/// Invocations per month of an entry point.
pub fn entry_count(rate: &EntryRate, assumptions: &AssumptionSet) -> Result<Rational, EstimateError> {
    let missing = || EstimateError::UnresolvedAssumption { keys: vec![rate.key().to_string()] };
    match rate {
        EntryRate::PerMonth { key } => assumptions.number(key).ok_or_else(missing),
        EntryRate::Interval { key, seconds } => {
            let seconds = assumptions.number(key).or_else(|| seconds.clone()).ok_or_else(missing)?;
            Ok(int(SECONDS_PER_MONTH as i64) / seconds)
        }
    }
}

/// Invocations per month of every node.
///
/// Entry points take their assumed rates; other nodes sum inflow × weight.
/// A diamond passes min(dominant inflow, secondary inflow) plus any ordinary
/// inflow.
pub fn monthly_counts(graph: &CostGraph, assumptions: &AssumptionSet) -> Result<BTreeMap<String, Rational>, EstimateError> {
    let order = topological_order(graph)?;
    let mut counts: BTreeMap<String, Rational> = BTreeMap::new();
    let mut missing = BTreeSet::new();
    for id in order {
        let node = graph.node(id).expect("ordered ids exist");
        let count = if graph.is_entry_point(id) {
            match &node.entry_rate {
                Some(rate) => entry_count(rate, assumptions).unwrap_or_else(|_| {
                    missing.insert(rate.key().to_string());
                    Rational::zero()
                }),
                None => Rational::zero(),
            }
        } else {
            let inflow = |kind: Option<EdgeKind>| -> Rational {
                graph
                    .in_edges(id)
                    .filter(|e| match kind {
                        Some(k) => e.kind == k,
                        None => !e.kind.is_implicit(),
                    })
                    .map(|e| counts.get(&e.from).cloned().unwrap_or_default() * &e.weight)
                    .sum()
            };
            let ordinary = inflow(None);
            if graph.diamond(id).is_some() {
                let dominant = inflow(Some(EdgeKind::ImplicitDominant));
                let secondary = inflow(Some(EdgeKind::ImplicitSecondary));
                ordinary + dominant.min(secondary)
            } else {
                ordinary
            }
        };
        counts.insert(id.to_string(), count);
    }
    if !missing.is_empty() {
        return Err(EstimateError::UnresolvedAssumption { keys: missing.into_iter().collect() });
    }
    Ok(counts)
}

/// Stored units per accumulating factor at the end of `month`, assuming
/// constant monthly inflow.
pub fn stock_at(graph: &CostGraph, assumptions: &AssumptionSet, month: u32) -> Result<BTreeMap<String, Rational>, EstimateError> {
    if month == 0 {
        return Err(EstimateError::InvalidMonth);
    }
    let counts = monthly_counts(graph, assumptions)?;
    let mut stocks = BTreeMap::new();
    for node in &graph.nodes {
        for factor in node.factors.iter().filter(|f| f.kind == FactorKind::Accumulating) {
            let per = per_invocation(factor, assumptions)?;
            stocks.insert(factor.id.clone(), int(month as i64) * &counts[&node.id] * per);
        }
    }
    Ok(stocks)
}

/// Metered usage in one month: node invocations, and billed units per factor.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metering {
    pub counts: BTreeMap<String, Rational>,
    pub quantities: BTreeMap<String, Rational>,
}

/// Usage implied by the analytic model for `month`.
pub fn analytic_metering(model: &BoundModel, assumptions: &AssumptionSet, month: u32) -> Result<Metering, EstimateError> {
    if month == 0 {
        return Err(EstimateError::InvalidMonth);
    }
    require_resolved(&model.graph, assumptions)?;
    let counts = monthly_counts(&model.graph, assumptions)?;
    let cumulative: BTreeMap<String, Rational> = counts.iter().map(|(k, v)| (k.clone(), v * int(month as i64))).collect();
    Ok(Metering { quantities: quantities(&model.graph, assumptions, &counts, &cumulative)?, counts })
}

/// Billed units per factor from invocation counts in the month and since the
/// start of month 1.
pub fn quantities(
    graph: &CostGraph,
    assumptions: &AssumptionSet,
    counts: &BTreeMap<String, Rational>,
    cumulative: &BTreeMap<String, Rational>,
) -> Result<BTreeMap<String, Rational>, EstimateError> {
    let mut out = BTreeMap::new();
    for node in &graph.nodes {
        for factor in &node.factors {
            let per = per_invocation(factor, assumptions)?;
            let basis = match factor.kind {
                FactorKind::Invocation => counts.get(&node.id).cloned().unwrap_or_default(),
                FactorKind::Accumulating => cumulative.get(&node.id).cloned().unwrap_or_default(),
                FactorKind::Fixed => Rational::one(),
            };
            out.insert(factor.id.clone(), basis * per);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorLine {
    pub factor: String,
    pub kind: FactorKind,
    pub unit: String,
    #[serde(with = "serde_rational")]
    pub quantity: Rational,
    /// Micro-USD before rounding.
    #[serde(with = "serde_rational")]
    pub exact: Rational,
    pub amount: Micros,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLine {
    pub node: String,
    pub label: String,
    pub node_class: NodeClass,
    pub span: Span,
    #[serde(with = "serde_rational")]
    pub count: Rational,
    pub factors: Vec<FactorLine>,
    pub subtotal: Micros,
}

/// Costs for one month. Amounts are micro-USD, each rounded once per factor;
/// `total` is the exact sum of the rounded amounts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub currency: String,
    pub vendor_id: String,
    pub catalog_version: String,
    pub month: u32,
    pub nodes: Vec<NodeLine>,
    pub total: Micros,
    pub total_display: String,
    pub unresolved: Vec<String>,
}

impl CostReport {
    pub fn node(&self, id: &str) -> Option<&NodeLine> {
        self.nodes.iter().find(|n| n.node == id)
    }

    pub fn factor(&self, id: &str) -> Option<&FactorLine> {
        self.nodes.iter().flat_map(|n| &n.factors).find(|f| f.factor == id)
    }

    /// Pretty JSON with a trailing newline; the CLI and the service emit
    /// exactly these bytes.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }
}

/// Exact micro-USD for `quantity` units of a factor under `price`.
pub fn exact_amount(factor: &CostFactor, price: &Price, quantity: &Rational, assumptions: &AssumptionSet) -> Result<Rational, EstimateError> {
    match price {
        Price::Rule { rule } => {
            evaluate_exact(rule, quantity).map_err(|_| EstimateError::NegativeQuantity { factor: factor.id.clone() })
        }
        Price::User { key } => {
            let usd = assumptions
                .number(key)
                .ok_or_else(|| EstimateError::UnresolvedAssumption { keys: vec![key.clone()] })?;
            Ok(quantity * usd * int(MICROS_PER_USD))
        }
    }
}

/// Prices metered usage. Shared by the analytic estimator and the simulator.
pub fn price(model: &BoundModel, assumptions: &AssumptionSet, month: u32, metering: &Metering) -> Result<CostReport, EstimateError> {
    let mut nodes = Vec::with_capacity(model.graph.nodes.len());
    for node in &model.graph.nodes {
        let mut factors = Vec::with_capacity(node.factors.len());
        for factor in &node.factors {
            let quantity = metering.quantities.get(&factor.id).cloned().unwrap_or_default();
            let price = model.prices.get(&factor.id).expect("bound models price every factor");
            let exact = exact_amount(factor, price, &quantity, assumptions)?;
            let amount = Micros::round(&exact);
            factors.push(FactorLine {
                factor: factor.id.clone(),
                kind: factor.kind,
                unit: factor.unit.clone(),
                quantity,
                exact,
                amount,
                display: amount.display(),
            });
        }
        nodes.push(NodeLine {
            node: node.id.clone(),
            label: node.label.clone(),
            node_class: node.node_class,
            span: node.span,
            count: metering.counts.get(&node.id).cloned().unwrap_or_default(),
            subtotal: factors.iter().map(|f| f.amount).sum(),
            factors,
        });
    }
    let total: Micros = nodes.iter().map(|n| n.subtotal).sum();
    Ok(CostReport {
        currency: CURRENCY.into(),
        vendor_id: model.vendor_id.clone(),
        catalog_version: model.catalog_version.clone(),
        month,
        nodes,
        total,
        total_display: total.display(),
        unresolved: Vec::new(),
    })
}

/// The analytic cost report for `month` (1-based).
pub fn monthly_cost(model: &BoundModel, assumptions: &AssumptionSet, month: u32) -> Result<CostReport, EstimateError> {
    let metering = analytic_metering(model, assumptions, month)?;
    price(model, assumptions, month, &metering)
}

/// Binds and prices in one step.
pub fn estimate(graph: &CostGraph, catalog: &PricingCatalog, assumptions: &AssumptionSet, month: u32) -> Result<CostReport, EstimateError> {
    monthly_cost(&bind(graph, catalog)?, assumptions, month)
}

/// Cost of one logical invocation of an entry point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationCost {
    pub entry: String,
    #[serde(with = "serde_rational")]
    pub exact: Rational,
    pub amount: Micros,
    pub display: String,
    /// Set when some rule is not flat, so the figure holds only at the
    /// current monthly volume.
    pub marginal: bool,
}

/// Follows sync, deferred and dominant edges from `entry` with unit
/// multiplicity and sums every factor at its marginal rate for the current
/// monthly volume. Storage is valued for one month. Fixed factors are excluded.
pub fn invocation_cost(model: &BoundModel, assumptions: &AssumptionSet, entry: &str) -> Result<InvocationCost, EstimateError> {
    let graph = &model.graph;
    if !graph.is_entry_point(entry) {
        return Err(EstimateError::NotAnEntryPoint { node: entry.to_string() });
    }
    require_resolved(graph, assumptions)?;
    let order = topological_order(graph)?;
    let counts = monthly_counts(graph, assumptions)?;
    let mut reach: BTreeMap<&str, Rational> = BTreeMap::new();
    reach.insert(entry, Rational::one());
    let mut exact = Rational::zero();
    let mut marginal = false;
    for id in order {
        let Some(multiplicity) = reach.get(id).cloned() else { continue };
        let node = graph.node(id).expect("ordered ids exist");
        for factor in node.factors.iter().filter(|f| f.kind != FactorKind::Fixed) {
            let per = per_invocation(factor, assumptions)?;
            let rate = match &model.prices[&factor.id] {
                Price::Rule { rule } => {
                    marginal |= !rule.free_allowance.is_zero() || matches!(rule.scheme, Scheme::Tiered { .. });
                    let volume = &counts[id] * &per;
                    marginal_rate(rule, &volume)
                }
                Price::User { key } => assumptions.number(key).unwrap_or_default() * int(MICROS_PER_USD),
            };
            exact += &multiplicity * per * rate;
        }
        for e in graph.out_edges(id).filter(|e| e.kind.carries_flow()) {
            *reach.entry(e.to.as_str()).or_default() += &multiplicity * &e.weight;
        }
    }
    let amount = Micros::round(&exact);
    Ok(InvocationCost { entry: entry.to_string(), exact, amount, display: amount.display(), marginal })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDelta {
    pub node: String,
    pub subtotal: Micros,
    pub delta: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VendorTotal {
    pub vendor_id: String,
    pub catalog_version: String,
    pub total: Micros,
    pub total_display: String,
    /// Relative to the first catalog.
    pub delta: Micros,
    pub nodes: Vec<NodeDelta>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub month: u32,
    pub vendors: Vec<VendorTotal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(untagged)]
pub enum CompareError {
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Unpriced(Vec<BindError>),
    #[error(transparent)]
    Estimate(EstimateError),
}

/// Prices the same usage under each catalog.
pub fn compare_catalogs(
    graph: &CostGraph,
    assumptions: &AssumptionSet,
    catalogs: &[PricingCatalog],
    month: u32,
) -> Result<Comparison, CompareError> {
    let mut models = Vec::new();
    let mut errors = Vec::new();
    for catalog in catalogs {
        match bind(graph, catalog) {
            Ok(m) => models.push(m),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(CompareError::Unpriced(errors));
    }
    let reports = models
        .iter()
        .map(|m| monthly_cost(m, assumptions, month))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CompareError::Estimate)?;
    let Some(base) = reports.first() else { return Ok(Comparison { month, vendors: Vec::new() }) };
    let vendors = reports
        .iter()
        .map(|r| VendorTotal {
            vendor_id: r.vendor_id.clone(),
            catalog_version: r.catalog_version.clone(),
            total: r.total,
            total_display: r.total_display.clone(),
            delta: r.total - base.total,
            nodes: r
                .nodes
                .iter()
                .map(|n| NodeDelta {
                    node: n.node.clone(),
                    subtotal: n.subtotal,
                    delta: n.subtotal - base.node(&n.node).map_or(Micros::ZERO, |b| b.subtotal),
                })
                .collect(),
        })
        .collect();
    Ok(Comparison { month, vendors })
}
