use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PriceRule, PricingCatalog};
use crate::graph::{CostFactor, CostGraph, FactorKind, NodeClass, Origin, Quantity};
use crate::num::int;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Price {
    Rule { rule: PriceRule },
    /// USD per unit from an assumption.
    User { key: String },
}

/// A graph with every factor matched to a price. Fixed-monthly rules add a
/// fixed factor to every node of their class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundModel {
    pub vendor_id: String,
    pub catalog_version: String,
    pub graph: CostGraph,
    pub prices: BTreeMap<String, Price>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub node: String,
    pub node_class: NodeClass,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("catalog `{vendor_id}` prices no rule for {}", .gaps.iter().map(|g| format!("{}/{} on {}", g.node_class, g.unit, g.node)).collect::<Vec<_>>().join(", "))]
pub struct BindError {
    pub vendor_id: String,
    pub gaps: Vec<Gap>,
}

pub fn bind(graph: &CostGraph, catalog: &PricingCatalog) -> Result<BoundModel, BindError> {
    let mut graph = graph.clone();
    let mut prices = BTreeMap::new();
    let mut gaps = Vec::new();
    for node in &mut graph.nodes {
        for factor in &node.factors {
            if let Some(key) = &factor.price_key {
                prices.insert(factor.id.clone(), Price::User { key: key.clone() });
                continue;
            }
            match catalog.rule(node.node_class, &factor.unit) {
                Some(rule) if !rule.is_fixed() => {
                    prices.insert(factor.id.clone(), Price::Rule { rule: rule.clone() });
                }
                _ => gaps.push(Gap { node: node.id.clone(), node_class: node.node_class, unit: factor.unit.clone() }),
            }
        }
        for rule in catalog.rules.iter().filter(|r| r.is_fixed() && r.applies_to.node_class == node.node_class) {
            let id = format!("{}/fixed:{}", node.id, rule.applies_to.unit);
            node.factors.push(CostFactor {
                id: id.clone(),
                kind: FactorKind::Fixed,
                origin: Origin::Internal,
                unit: rule.applies_to.unit.clone(),
                quantity: Quantity::constant(int(1)),
                price_key: None,
            });
            prices.insert(id, Price::Rule { rule: rule.clone() });
        }
    }
    if !gaps.is_empty() {
        return Err(BindError { vendor_id: catalog.vendor_id.clone(), gaps });
    }
    Ok(BoundModel { vendor_id: catalog.vendor_id.clone(), catalog_version: catalog.version.clone(), graph, prices })
}
