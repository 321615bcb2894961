//! The simulator agrees with the analytic estimator on random programs.

use num_traits::ToPrimitive;

use penny_core::estimate::{invocation_cost, monthly_cost};
use penny_core::graph::EntryRate;
use penny_core::num::Micros;
use penny_core::pricing::bind;
use penny_core::sim::simulate_month;
use penny_core::testkit::random_scenario;

pub const GRAPHS: u64 = 150;

#[test]
fn simulation_matches_analytic_totals() {
    let (mut exact, mut bounded) = (0, 0);
    for seed in 0..GRAPHS {
        let s = random_scenario(seed);
        let model = bind(&s.graph, &s.catalog).unwrap();
        let month = 1 + (seed % 3) as u32;
        let sim = simulate_month(&model, &s.assumptions, month, seed).unwrap();
        let analytic = monthly_cost(&model, &s.assumptions, month).unwrap();
        if s.push_within_ticks() {
            assert_eq!(sim, analytic, "seed {seed}");
            exact += 1;
        } else {
            // one diamond event, priced along everything downstream of the
            // diamond, plus half a micro-dollar of rounding per factor
            let (_, _, diamond) = s.diamond.clone().unwrap();
            let mut probe = model.clone();
            probe.graph.edges.retain(|e| e.to != diamond);
            probe.graph.diamonds.clear();
            probe.graph.nodes.iter_mut().find(|n| n.id == diamond).unwrap().entry_rate =
                Some(EntryRate::PerMonth { key: s.entry_key.clone() });
            let event = invocation_cost(&probe, &s.assumptions, &diamond).unwrap();
            let factors = sim.nodes.iter().map(|n| n.factors.len()).sum::<usize>() as i64;
            let tolerance = event.exact.ceil().to_integer().to_i64().unwrap() + factors;
            assert!((sim.total - analytic.total).0.abs() <= tolerance, "seed {seed}: {} vs {}", sim.total, analytic.total);
            bounded += 1;
        }
        assert!(sim.total >= Micros(0));
    }
    assert!(exact >= 20 && bounded >= 10, "exact {exact}, bounded {bounded}");
}
