//! Vendor pricing catalogs: loading, rule evaluation and binding to graphs.

mod bind;

use std::collections::BTreeSet;
use std::path::Path;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeClass;
use crate::num::{serde_number, Micros, Rational};

pub use bind::{bind, BindError, BoundModel, Gap, Price};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AppliesTo {
    pub node_class: NodeClass,
    pub unit: String,
}

/// One tier: `rate` micro-USD per unit up to `up_to` units (`None` = unbounded).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier {
    #[serde(with = "crate::num::serde_rational_opt")]
    pub up_to: Option<Rational>,
    #[serde(with = "serde_number")]
    pub rate: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    PerUnit {
        #[serde(with = "serde_number")]
        rate: Rational,
    },
    Tiered {
        tiers: Vec<Tier>,
    },
    FixedMonthly {
        #[serde(with = "serde_number")]
        rate: Rational,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceRule {
    pub applies_to: AppliesTo,
    pub scheme: Scheme,
    #[serde(default = "Rational::zero", with = "serde_number")]
    pub free_allowance: Rational,
}

impl PriceRule {
    pub fn per_unit(node_class: NodeClass, unit: &str, rate: Rational) -> Self {
        PriceRule {
            applies_to: AppliesTo { node_class, unit: unit.into() },
            scheme: Scheme::PerUnit { rate },
            free_allowance: Rational::zero(),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self.scheme, Scheme::FixedMonthly { .. })
    }

    fn check(&self) -> Result<(), CatalogError> {
        let invalid = |reason: &str| CatalogError::InvalidRule {
            node_class: self.applies_to.node_class,
            unit: self.applies_to.unit.clone(),
            reason: reason.into(),
        };
        if self.free_allowance.is_negative() {
            return Err(invalid("free allowance is negative"));
        }
        match &self.scheme {
            Scheme::PerUnit { rate } | Scheme::FixedMonthly { rate } if rate.is_negative() => Err(invalid("rate is negative")),
            Scheme::Tiered { tiers } => {
                if tiers.is_empty() {
                    return Err(invalid("no tiers"));
                }
                if tiers.iter().any(|t| t.rate.is_negative()) {
                    return Err(invalid("rate is negative"));
                }
                let mut last = Rational::zero();
                for (i, tier) in tiers.iter().enumerate() {
                    match &tier.up_to {
                        Some(bound) if *bound > last => last = bound.clone(),
                        None if i + 1 == tiers.len() => {}
                        _ => {
                            return Err(CatalogError::NonIncreasingTiers {
                                node_class: self.applies_to.node_class,
                                unit: self.applies_to.unit.clone(),
                            })
                        }
                    }
                }
                if tiers.last().is_some_and(|t| t.up_to.is_some()) {
                    return Err(invalid("last tier must be unbounded (`up_to: null`)"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricingCatalog {
    pub vendor_id: String,
    pub version: String,
    pub rules: Vec<PriceRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "error")]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {message}")]
    Io { path: String, message: String },
    #[error("catalog does not parse: {message}")]
    CatalogParseError { message: String },
    #[error("more than one rule for {node_class}/{unit}")]
    DuplicateRule { node_class: NodeClass, unit: String },
    #[error("tier bounds for {node_class}/{unit} must strictly increase")]
    NonIncreasingTiers { node_class: NodeClass, unit: String },
    #[error("rule for {node_class}/{unit}: {reason}")]
    InvalidRule { node_class: NodeClass, unit: String, reason: String },
}

impl PricingCatalog {
    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut seen = BTreeSet::new();
        for rule in &self.rules {
            if !seen.insert(&rule.applies_to) {
                return Err(CatalogError::DuplicateRule {
                    node_class: rule.applies_to.node_class,
                    unit: rule.applies_to.unit.clone(),
                });
            }
            rule.check()?;
        }
        Ok(())
    }

    pub fn rule(&self, node_class: NodeClass, unit: &str) -> Option<&PriceRule> {
        self.rules.iter().find(|r| r.applies_to.node_class == node_class && r.applies_to.unit == unit)
    }
}

/// Parses and validates catalog JSON.
pub fn parse_catalog(text: &str) -> Result<PricingCatalog, CatalogError> {
    let catalog: PricingCatalog =
        serde_json::from_str(text).map_err(|e| CatalogError::CatalogParseError { message: e.to_string() })?;
    catalog.validate()?;
    Ok(catalog)
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<PricingCatalog, CatalogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CatalogError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_catalog(&text)
}

/// Catalogs shipped with the crate, keyed by id.
pub const BUNDLED: [(&str, &str); 2] = [
    ("acme-v1", include_str!("../../catalogs/acme-v1.json")),
    ("globex-v1", include_str!("../../catalogs/globex-v1.json")),
];

pub fn bundled_catalogs() -> Vec<(String, PricingCatalog)> {
    BUNDLED.iter().map(|(id, text)| (id.to_string(), parse_catalog(text).expect("bundled catalogs parse"))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("quantity must not be negative")]
pub struct NegativeQuantity;

/// Exact micro-USD for `quantity` units in one month, before rounding.
pub fn evaluate_exact(rule: &PriceRule, quantity: &Rational) -> Result<Rational, NegativeQuantity> {
    if quantity.is_negative() {
        return Err(NegativeQuantity);
    }
    let billable = quantity - &rule.free_allowance;
    let billable = if billable.is_negative() { Rational::zero() } else { billable };
    Ok(match &rule.scheme {
        Scheme::PerUnit { rate } => rate * billable,
        Scheme::FixedMonthly { rate } => rate.clone(),
        Scheme::Tiered { tiers } => {
            let mut total = Rational::zero();
            let mut lower = Rational::zero();
            for tier in tiers {
                if billable <= lower {
                    break;
                }
                let upper = match &tier.up_to {
                    Some(bound) if *bound < billable => bound.clone(),
                    _ => billable.clone(),
                };
                total += &tier.rate * (&upper - &lower);
                lower = upper;
            }
            total
        }
    })
}

/// Micro-USD for `quantity` units in one month, rounded half to even.
pub fn evaluate_rule(rule: &PriceRule, quantity: &Rational) -> Result<Micros, NegativeQuantity> {
    Ok(Micros::round(&evaluate_exact(rule, quantity)?))
}

/// Price of the next unit once `volume` units have been used this month.
pub fn marginal_rate(rule: &PriceRule, volume: &Rational) -> Rational {
    let billable = volume - &rule.free_allowance;
    if billable.is_negative() {
        return Rational::zero();
    }
    match &rule.scheme {
        Scheme::PerUnit { rate } => rate.clone(),
        Scheme::FixedMonthly { .. } => Rational::zero(),
        Scheme::Tiered { tiers } => tiers
            .iter()
            .find(|t| t.up_to.as_ref().is_none_or(|bound| billable < *bound))
            .map(|t| t.rate.clone())
            .unwrap_or_else(Rational::zero),
    }
}

#[cfg(test)]
mod tests;
