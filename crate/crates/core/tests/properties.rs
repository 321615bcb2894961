//! Randomized invariants of the analytic estimator.

use num_traits::Zero;
use proptest::prelude::*;

use penny_core::estimate::{monthly_cost, monthly_counts};
use penny_core::graph::{FactorKind, NodeClass};
use penny_core::num::{int, ratio, Micros, Rational};
use penny_core::pricing::{bind, AppliesTo, PriceRule, Scheme};
use penny_core::testkit::{random_scenario, random_scenario_with_diamond, random_scenario_without_schedule, scale_entry_rate};

const CASES: u32 = 1000;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    /// Per-unit rules with no allowance: scaling the entry rate by k scales
    /// every component by k.
    #[test]
    fn linear_in_entry_rate(seed in any::<u64>(), num in 0i64..50, den in 1i64..8, month in 1u32..6) {
        let s = random_scenario_without_schedule(seed);
        let k = ratio(num, den);
        let model = bind(&s.graph, &s.catalog).unwrap();
        let base = monthly_cost(&model, &s.assumptions, month).unwrap();
        let scaled = monthly_cost(&model, &scale_entry_rate(&s, &k), month).unwrap();
        for (a, b) in base.nodes.iter().flat_map(|n| &n.factors).zip(scaled.nodes.iter().flat_map(|n| &n.factors)) {
            prop_assert_eq!(&b.exact, &(&a.exact * &k), "{}", a.factor);
        }
    }

    /// Storage components never shrink as months pass; usage components do
    /// not change.
    #[test]
    fn storage_grows_with_month(seed in any::<u64>(), m1 in 1u32..36, gap in 0u32..36) {
        let s = random_scenario(seed);
        let model = bind(&s.graph, &s.catalog).unwrap();
        let early = monthly_cost(&model, &s.assumptions, m1).unwrap();
        let late = monthly_cost(&model, &s.assumptions, m1 + gap).unwrap();
        for (a, b) in early.nodes.iter().flat_map(|n| &n.factors).zip(late.nodes.iter().flat_map(|n| &n.factors)) {
            match a.kind {
                FactorKind::Accumulating => prop_assert!(a.amount <= b.amount && a.exact <= b.exact, "{}", a.factor),
                _ => prop_assert_eq!(a.amount, b.amount, "{}", a.factor),
            }
        }
    }

    /// No traffic and no schedule: only fixed fees remain.
    #[test]
    fn zero_traffic_costs_fixed_fees(seed in any::<u64>(), fees in prop::collection::vec((0usize..6, 0i64..1_000_000), 0..4)) {
        let s = random_scenario_without_schedule(seed);
        let mut catalog = s.catalog.clone();
        for (i, (class, fee)) in fees.iter().enumerate() {
            let node_class = [NodeClass::Endpoint, NodeClass::Function, NodeClass::BucketOp, NodeClass::QueueOp, NodeClass::TableOp, NodeClass::ExternalHttpCall][*class];
            catalog.rules.push(PriceRule {
                applies_to: AppliesTo { node_class, unit: format!("plan-{i}") },
                scheme: Scheme::FixedMonthly { rate: int(*fee) },
                free_allowance: int(0),
            });
        }
        let model = bind(&s.graph, &catalog).unwrap();
        let idle = scale_entry_rate(&s, &Rational::zero());
        let report = monthly_cost(&model, &idle, 1).unwrap();
        let fixed: Micros = report.nodes.iter().flat_map(|n| &n.factors).filter(|f| f.kind == FactorKind::Fixed).map(|f| f.amount).sum();
        let expected: i64 = model
            .graph
            .nodes
            .iter()
            .map(|n| fees.iter().filter(|(c, _)| [NodeClass::Endpoint, NodeClass::Function, NodeClass::BucketOp, NodeClass::QueueOp, NodeClass::TableOp, NodeClass::ExternalHttpCall][*c] == n.node_class).map(|(_, f)| f).sum::<i64>())
            .sum();
        prop_assert_eq!(report.total, fixed);
        prop_assert_eq!(report.total, Micros(expected));
    }

    /// A diamond never passes more than either of its inflows.
    #[test]
    fn diamond_outflow_is_bounded(seed in any::<u64>(), rate in 0i64..10_000_000) {
        let s = random_scenario_with_diamond(seed);
        let assumptions = scale_entry_rate(&s, &ratio(rate, s.entry_rate().max(1)));
        let counts = monthly_counts(&s.graph, &assumptions).unwrap();
        for d in &s.graph.diamonds {
            let inflow = |edges: &[String]| -> Rational {
                edges.iter().map(|id| {
                    let e = s.graph.edge(id).unwrap();
                    &counts[&e.from] * &e.weight
                }).sum()
            };
            let (dominant, secondary) = (inflow(&d.dominant), inflow(&d.secondary));
            prop_assert!(counts[&d.node] <= dominant);
            prop_assert!(counts[&d.node] <= secondary);
            prop_assert_eq!(&counts[&d.node], &dominant.min(secondary));
        }
    }
}
