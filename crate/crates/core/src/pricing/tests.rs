use proptest::prelude::*;

use super::*;
use crate::graph::units;
use crate::num::{int, ratio};

const ACME: &str = include_str!("../../catalogs/acme-v1.json");
const GLOBEX: &str = include_str!("../../catalogs/globex-v1.json");

fn tiered(tiers: &[(Option<i64>, i64)], allowance: i64) -> PriceRule {
    PriceRule {
        applies_to: AppliesTo { node_class: NodeClass::QueueOp, unit: units::REQUEST.into() },
        scheme: Scheme::Tiered { tiers: tiers.iter().map(|(b, r)| Tier { up_to: b.map(int), rate: int(*r) }).collect() },
        free_allowance: int(allowance),
    }
}

#[test]
fn bundled_catalogs_load() {
    let acme = parse_catalog(ACME).unwrap();
    assert_eq!(acme.vendor_id, "acme");
    for (class, unit) in [
        (NodeClass::Endpoint, units::REQUEST),
        (NodeClass::Function, units::GB_SECOND),
        (NodeClass::BucketOp, units::REQUEST),
        (NodeClass::BucketOp, units::GB_MONTH),
        (NodeClass::QueueOp, units::REQUEST),
        (NodeClass::TableOp, units::REQUEST),
        (NodeClass::TableOp, units::GB_MONTH),
    ] {
        assert!(acme.rule(class, unit).is_some(), "{class}/{unit}");
    }
    assert_eq!(acme.rule(NodeClass::QueueOp, units::REQUEST).unwrap().scheme, Scheme::PerUnit { rate: ratio(2, 5) });
    parse_catalog(GLOBEX).unwrap();
}

#[test]
fn empty_catalog_is_valid() {
    let c = parse_catalog(r#"{"vendor_id": "x", "version": "0", "rules": []}"#).unwrap();
    assert!(c.rules.is_empty());
}

#[test]
fn catalog_errors() {
    let bad_tiers = r#"{"vendor_id": "x", "version": "0", "rules": [
        {"applies_to": {"node_class": "QueueOp", "unit": "request"},
         "scheme": {"kind": "tiered", "tiers": [{"up_to": 1000000, "rate": "0.4"}, {"up_to": 100000, "rate": "0.3"}, {"up_to": null, "rate": "0.2"}]}}]}"#;
    assert!(matches!(parse_catalog(bad_tiers), Err(CatalogError::NonIncreasingTiers { .. })));
    let rule = r#"{"applies_to": {"node_class": "QueueOp", "unit": "request"}, "scheme": {"kind": "per_unit", "rate": 1}}"#;
    let dup = format!(r#"{{"vendor_id": "x", "version": "0", "rules": [{rule}, {rule}]}}"#);
    assert!(matches!(parse_catalog(&dup), Err(CatalogError::DuplicateRule { .. })));
    assert!(matches!(parse_catalog("{"), Err(CatalogError::CatalogParseError { .. })));
    let negative = r#"{"vendor_id": "x", "version": "0", "rules": [
        {"applies_to": {"node_class": "QueueOp", "unit": "request"}, "scheme": {"kind": "per_unit", "rate": -1}}]}"#;
    assert!(matches!(parse_catalog(negative), Err(CatalogError::InvalidRule { .. })));
    assert!(matches!(load_catalog("/nonexistent/catalog.json"), Err(CatalogError::Io { .. })));
}

#[test]
fn per_unit_pop_price() {
    let rule = PriceRule::per_unit(NodeClass::QueueOp, units::REQUEST, ratio(2, 5));
    assert_eq!(evaluate_rule(&rule, &int(2_592_000)), Ok(Micros(1_036_800)));
}

#[test]
fn zero_quantity_costs_nothing() {
    let per_unit = PriceRule::per_unit(NodeClass::QueueOp, units::REQUEST, int(7));
    assert_eq!(evaluate_rule(&per_unit, &int(0)), Ok(Micros(0)));
    assert_eq!(evaluate_rule(&tiered(&[(Some(10), 5), (None, 1)], 0), &int(0)), Ok(Micros(0)));
}

#[test]
fn two_tier_example() {
    // $0.10 and $0.05 per unit
    let rule = tiered(&[(Some(1000), 100_000), (None, 50_000)], 0);
    assert_eq!(evaluate_rule(&rule, &int(1500)), Ok(Micros(125_000_000)));
}

#[test]
fn allowance_applies_before_tiers() {
    let rule = tiered(&[(Some(10), 5), (None, 1)], 4);
    // 20 units, 16 billable: 10 × 5 + 6 × 1
    assert_eq!(evaluate_exact(&rule, &int(20)), Ok(int(56)));
    assert_eq!(evaluate_exact(&rule, &int(3)), Ok(int(0)));
}

#[test]
fn fixed_ignores_quantity() {
    let rule = PriceRule {
        applies_to: AppliesTo { node_class: NodeClass::Endpoint, unit: "subscription".into() },
        scheme: Scheme::FixedMonthly { rate: int(50_000) },
        free_allowance: int(0),
    };
    assert_eq!(evaluate_rule(&rule, &int(0)), Ok(Micros(50_000)));
    assert_eq!(evaluate_rule(&rule, &int(1_000_000)), Ok(Micros(50_000)));
}

#[test]
fn negative_quantity_is_rejected() {
    let rule = PriceRule::per_unit(NodeClass::QueueOp, units::REQUEST, int(1));
    assert_eq!(evaluate_rule(&rule, &int(-1)), Err(NegativeQuantity));
}

#[test]
fn rounding_is_half_even() {
    let rule = PriceRule::per_unit(NodeClass::QueueOp, units::REQUEST, ratio(1, 2));
    assert_eq!(evaluate_rule(&rule, &int(1)), Ok(Micros(0)));
    assert_eq!(evaluate_rule(&rule, &int(3)), Ok(Micros(2)));
}

#[test]
fn marginal_rates() {
    let rule = tiered(&[(Some(10), 5), (None, 1)], 2);
    assert_eq!(marginal_rate(&rule, &int(1)), int(0));
    assert_eq!(marginal_rate(&rule, &int(5)), int(5));
    assert_eq!(marginal_rate(&rule, &int(12)), int(1));
}

#[test]
fn catalog_round_trips() {
    let c = parse_catalog(GLOBEX).unwrap();
    let text = serde_json::to_string(&c).unwrap();
    assert_eq!(parse_catalog(&text).unwrap(), c);
}

/// Unit-by-unit price sum for integer tier bounds.
pub(crate) fn brute_force(tiers: &[(Option<i64>, i64)], allowance: i64, quantity: i64) -> i64 {
    (1..=quantity - allowance.min(quantity))
        .map(|u| tiers.iter().find(|(b, _)| b.is_none_or(|b| u <= b)).unwrap().1)
        .sum()
}

fn tier_table() -> impl Strategy<Value = (Vec<(Option<i64>, i64)>, i64)> {
    (prop::collection::btree_set(1i64..5_000, 0..5), prop::collection::vec(0i64..1_000, 5), 0i64..100).prop_map(
        |(bounds, rates, allowance)| {
            let mut tiers: Vec<_> = bounds.into_iter().zip(&rates).map(|(b, r)| (Some(b), *r)).collect();
            tiers.push((None, rates[tiers.len()]));
            (tiers, allowance)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn tiered_equals_brute_force((tiers, allowance) in tier_table(), q in 0i64..6_000) {
        let rule = tiered(&tiers, allowance);
        prop_assert_eq!(evaluate_exact(&rule, &int(q)).unwrap(), int(brute_force(&tiers, allowance, q)));
    }

    #[test]
    fn evaluation_is_monotone((tiers, allowance) in tier_table(), a in 0i64..10_000, b in 0i64..10_000) {
        let rule = tiered(&tiers, allowance);
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(evaluate_exact(&rule, &int(lo)).unwrap() <= evaluate_exact(&rule, &int(hi)).unwrap());
    }

    #[test]
    fn single_tier_is_per_unit(rate in 0i64..10_000, q in 0i64..1_000_000) {
        let one = tiered(&[(None, rate)], 0);
        let flat = PriceRule::per_unit(NodeClass::QueueOp, units::REQUEST, int(rate));
        prop_assert_eq!(evaluate_rule(&one, &int(q)), evaluate_rule(&flat, &int(q)));
    }
}
