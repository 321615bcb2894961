//! Acceptance suite. Each criterion prints one `PASS` or `FAIL` line; the
//! process fails if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tower::ServiceExt;

use penny_core::estimate::{invocation_cost, monthly_cost, monthly_counts};
use penny_core::graph::{CostGraph, EdgeKind, EntryRate, FactorKind, NodeClass};
use penny_core::num::{int, ratio, Micros, Rational};
use penny_core::pipeline::{analyze, analyze_text};
use penny_core::pricing::{bind, bundled_catalogs, evaluate_exact, AppliesTo, PriceRule, Scheme, Tier};
use penny_core::scalar::Scalar;
use penny_core::sim::simulate_month;
use penny_core::syntax::{parse_text, read_annotations, strip_annotations, write_annotation, SourceFile};
use penny_core::testkit::{
    acme, golden_overrides, random_scenario, random_scenario_with_diamond, random_scenario_without_schedule,
    scale_entry_rate, FIXTURE,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
/// Vendor, month and extra assumptions.
type Variant = (&'static str, u32, &'static [(&'static str, &'static str)]);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn core_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core")
}

/// Node labels with each handler named after the route that triggers it.
fn describe(graph: &CostGraph, id: &str) -> String {
    let node = graph.node(id).unwrap();
    if node.node_class == NodeClass::Function {
        let route = graph.edges.iter().find(|e| e.to == id).map(|e| graph.node(&e.from).unwrap().label.clone());
        return format!("fn<{}>", route.unwrap_or_default());
    }
    node.label.clone()
}

fn fixture_graph() -> Outcome {
    let a = analyze_text(FIXTURE, &BTreeMap::new()).map_err(|e| e.to_string())?;
    let g = &a.extraction.graph;
    let nodes: BTreeSet<String> = g.nodes.iter().map(|n| describe(g, &n.id)).collect();
    let expected: BTreeSet<String> = [
        "/upload", "/search", "/callback", "fn</upload>", "fn</search>", "fn</callback>", "Bucket.put", "Queue.push",
        "Schedule.onTick", "Queue.pop", "httpPost", "Table.insert", "Table.list",
    ]
    .map(String::from)
    .into();
    ensure(g.nodes.len() == 13 && nodes == expected, || format!("nodes {nodes:?}"))?;
    let storage: BTreeSet<&str> = g
        .nodes
        .iter()
        .filter(|n| n.factors.iter().any(|f| f.kind == FactorKind::Accumulating))
        .map(|n| n.label.as_str())
        .collect();
    ensure(storage == BTreeSet::from(["Bucket.put", "Table.insert"]), || format!("storage on {storage:?}"))?;

    use EdgeKind::*;
    let edges: BTreeSet<(String, EdgeKind, String)> =
        g.edges.iter().map(|e| (describe(g, &e.from), e.kind, describe(g, &e.to))).collect();
    let expected: BTreeSet<(String, EdgeKind, String)> = [
        ("/upload", Deferred, "fn</upload>"),
        ("fn</upload>", Sync, "Bucket.put"),
        ("Bucket.put", Deferred, "Queue.push"),
        ("Queue.push", ImplicitDominant, "httpPost"),
        ("Schedule.onTick", Deferred, "Queue.pop"),
        ("Queue.pop", ImplicitSecondary, "httpPost"),
        ("/callback", Deferred, "fn</callback>"),
        ("fn</callback>", Sync, "Table.insert"),
        ("/search", Deferred, "fn</search>"),
        ("fn</search>", Sync, "Table.list"),
    ]
    .into_iter()
    .map(|(a, k, b)| (a.to_string(), k, b.to_string()))
    .collect();
    ensure(g.edges.len() == 10 && edges == expected, || format!("edges {edges:?}"))?;
    ensure(g.diamonds.len() == 1, || format!("{} diamonds", g.diamonds.len()))?;
    let d = &g.diamonds[0];
    let from = |ids: &[String]| ids.iter().map(|id| describe(g, &g.edge(id).unwrap().from)).collect::<Vec<_>>();
    ensure(
        describe(g, &d.node) == "httpPost" && from(&d.dominant) == ["Queue.push"] && from(&d.secondary) == ["Queue.pop"],
        || format!("diamond {d:?}"),
    )?;
    Ok("13 nodes, 10 edges, 1 diamond".into())
}

fn penny(args: &[&str]) -> (i32, Vec<u8>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_penny")).args(args).output().expect("penny runs");
    (out.status.code().unwrap_or(-1), out.stdout, String::from_utf8_lossy(&out.stderr).into_owned())
}

fn golden_report() -> Outcome {
    let golden = core_dir().join("tests/golden");
    let fixture = core_dir().join("examples/transcription.w");
    let assumptions = golden.join("assumptions.json");
    let (code, stdout, stderr) = penny(&[
        "cost",
        fixture.to_str().unwrap(),
        "--catalog",
        "acme-v1",
        "--month",
        "1",
        "--assumptions",
        assumptions.to_str().unwrap(),
        "--json",
    ]);
    ensure(code == 0, || format!("exit {code}: {stderr}"))?;
    let committed = std::fs::read(golden.join("transcription-acme-v1-m1.json")).unwrap();
    ensure(stdout == committed, || "output differs from the committed golden report".into())?;
    let report: serde_json::Value = serde_json::from_slice(&stdout).unwrap();
    let csv = std::fs::read_to_string(golden.join("transcription-acme-v1-m1.oracle.csv")).unwrap();
    let oracle_total: i64 = csv.lines().find_map(|l| l.strip_prefix("TOTAL,")).and_then(|l| l.rsplit(',').next()).unwrap().parse().unwrap();
    ensure(report["total"] == oracle_total, || format!("total {} vs spreadsheet {oracle_total}", report["total"]))?;
    let amount = |label: &str, unit: &str| -> i64 {
        report["nodes"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|n| n["label"] == label)
            .flat_map(|n| n["factors"].as_array().unwrap())
            .find(|f| f["unit"] == unit)
            .and_then(|f| f["amount"].as_i64())
            .unwrap_or(-1)
    };
    let spots = [
        (amount("Bucket.put", "GB-month"), 115_000_000),
        (amount("Queue.pop", "request"), 1_036_800),
        (amount("Bucket.put", "request"), 500_000),
    ];
    ensure(spots.iter().all(|(got, want)| got == want), || format!("spot components {spots:?}"))?;
    Ok(format!("total {}", Micros(oracle_total)))
}

fn oracle_equivalence() -> Outcome {
    const GRAPHS: u64 = 120;
    let (mut exact, mut bounded) = (0, 0);
    for seed in 0..GRAPHS {
        let s = random_scenario(seed);
        let model = bind(&s.graph, &s.catalog).map_err(|e| e.to_string())?;
        let month = 1 + (seed % 3) as u32;
        let sim = simulate_month(&model, &s.assumptions, month, seed).map_err(|e| e.to_string())?;
        let analytic = monthly_cost(&model, &s.assumptions, month).map_err(|e| e.to_string())?;
        if s.push_within_ticks() {
            ensure(sim == analytic, || format!("seed {seed}: {} vs {}", sim.total, analytic.total))?;
            exact += 1;
        } else {
            let (_, _, diamond) = s.diamond.clone().unwrap();
            let mut probe = model.clone();
            probe.graph.edges.retain(|e| e.to != diamond);
            probe.graph.diamonds.clear();
            probe.graph.nodes.iter_mut().find(|n| n.id == diamond).unwrap().entry_rate =
                Some(EntryRate::PerMonth { key: s.entry_key.clone() });
            let event = invocation_cost(&probe, &s.assumptions, &diamond).map_err(|e| e.to_string())?;
            let factors = sim.nodes.iter().map(|n| n.factors.len()).sum::<usize>() as i64;
            let tolerance: i64 = event.exact.ceil().to_integer().try_into().unwrap();
            let gap = (sim.total - analytic.total).0.abs();
            ensure(gap <= tolerance + factors, || format!("seed {seed}: off by {gap}, allowed {}", tolerance + factors))?;
            bounded += 1;
        }
    }
    ensure(exact > 0 && bounded > 0, || format!("exact {exact}, bounded {bounded}"))?;
    Ok(format!("{GRAPHS} graphs: {exact} exact, {bounded} within one diamond event"))
}

fn tiered_pricing() -> Outcome {
    const MAX_Q: i64 = 100_000;
    const TABLES: u64 = 6;
    for seed in 0..TABLES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // rates in hundredths of a micro-dollar
        let n = rng.gen_range(1..=4);
        let mut bounds: Vec<i64> = (0..n - 1).map(|_| rng.gen_range(1..MAX_Q)).collect();
        bounds.sort_unstable();
        bounds.dedup();
        let rates: Vec<i64> = (0..=bounds.len()).map(|_| rng.gen_range(0..500)).collect();
        let allowance: i64 = if rng.gen_bool(0.5) { rng.gen_range(0..1000) } else { 0 };
        let tiers = rates
            .iter()
            .enumerate()
            .map(|(i, r)| Tier { up_to: bounds.get(i).map(|b| int(*b)), rate: ratio(*r, 100) })
            .collect();
        let rule = PriceRule {
            applies_to: AppliesTo { node_class: NodeClass::QueueOp, unit: "request".into() },
            scheme: Scheme::Tiered { tiers },
            free_allowance: int(allowance),
        };
        // unit k (1-based, after the allowance) costs the rate of the first
        // tier whose bound reaches k
        let mut hundredths: i64 = 0;
        for q in 0..=MAX_Q {
            if q > allowance {
                let k = q - allowance;
                let tier = bounds.iter().position(|b| k <= *b).unwrap_or(bounds.len());
                hundredths += rates[tier];
            }
            let got = evaluate_exact(&rule, &int(q)).unwrap();
            ensure(got == Rational::new(hundredths.into(), 100.into()), || format!("table {seed}, q {q}: {got}"))?;
        }
    }
    Ok(format!("{TABLES} tables, every quantity 0..={MAX_Q}"))
}

fn property_suite() -> Outcome {
    const CASES: u64 = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..CASES {
        let seed = rng.gen();
        // linearity
        let s = random_scenario_without_schedule(seed);
        let model = bind(&s.graph, &s.catalog).unwrap();
        let month = rng.gen_range(1..6);
        let k = ratio(rng.gen_range(0..50), rng.gen_range(1..8));
        let base = monthly_cost(&model, &s.assumptions, month).unwrap();
        let scaled = monthly_cost(&model, &scale_entry_rate(&s, &k), month).unwrap();
        for (a, b) in base.nodes.iter().flat_map(|n| &n.factors).zip(scaled.nodes.iter().flat_map(|n| &n.factors)) {
            ensure(b.exact == &a.exact * &k, || format!("linearity case {case}: {}", a.factor))?;
        }
        // zero traffic leaves only fixed fees
        let mut catalog = s.catalog.clone();
        let fee = rng.gen_range(0..1_000_000);
        catalog.rules.push(PriceRule {
            applies_to: AppliesTo { node_class: NodeClass::Endpoint, unit: "plan".into() },
            scheme: Scheme::FixedMonthly { rate: int(fee) },
            free_allowance: int(0),
        });
        let with_fee = bind(&s.graph, &catalog).unwrap();
        let idle = monthly_cost(&with_fee, &scale_entry_rate(&s, &int(0)), month).unwrap();
        let endpoints = s.graph.nodes.iter().filter(|n| n.node_class == NodeClass::Endpoint).count() as i64;
        ensure(idle.total == Micros(fee * endpoints), || format!("zero traffic case {case}: {}", idle.total))?;

        // accumulating components never shrink
        let s = random_scenario(seed);
        let model = bind(&s.graph, &s.catalog).unwrap();
        let m1 = rng.gen_range(1..36);
        let early = monthly_cost(&model, &s.assumptions, m1).unwrap();
        let late = monthly_cost(&model, &s.assumptions, m1 + rng.gen_range(0..36)).unwrap();
        for (a, b) in early.nodes.iter().flat_map(|n| &n.factors).zip(late.nodes.iter().flat_map(|n| &n.factors)) {
            let ok = match a.kind {
                FactorKind::Accumulating => a.exact <= b.exact,
                _ => a.exact == b.exact,
            };
            ensure(ok, || format!("month monotonicity case {case}: {}", a.factor))?;
        }

        // diamond outflow is bounded by each inflow
        let s = random_scenario_with_diamond(seed);
        let assumptions = scale_entry_rate(&s, &ratio(rng.gen_range(0..10_000_000), s.entry_rate().max(1)));
        let counts = monthly_counts(&s.graph, &assumptions).unwrap();
        for d in &s.graph.diamonds {
            let inflow = |edges: &[String]| -> Rational {
                edges.iter().map(|id| {
                    let e = s.graph.edge(id).unwrap();
                    &counts[&e.from] * &e.weight
                }).sum()
            };
            let out = &counts[&d.node];
            ensure(*out <= inflow(&d.dominant) && *out <= inflow(&d.secondary), || format!("diamond case {case}"))?;
        }
    }
    Ok(format!("4 properties x {CASES} cases"))
}

fn annotation_roundtrip() -> Outcome {
    let dir = core_dir().join("tests/corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "w")).collect();
    files.sort();
    ensure(files.len() == 20, || format!("{} corpus files", files.len()))?;
    let mut writes = 0;
    for path in &files {
        let text = std::fs::read_to_string(path).unwrap();
        let source = SourceFile::new(path, text.clone());
        let original = parse_text(&text).map_err(|e| e.to_string())?;
        let fresh = read_annotations(&original).unwrap().is_empty();
        let a = analyze(&source, &BTreeMap::new()).map_err(|e| format!("{}: {e}", path.display()))?;
        for slot in &a.extraction.slots {
            let value = match serde_json::to_value(slot.value_type).unwrap().as_str() {
                Some("route") => Scalar::Text("/health".into()),
                Some("probability") => Scalar::Number(ratio(1, 2)),
                _ => Scalar::Number(int(3)),
            };
            let entries = BTreeMap::from([(slot.annotation_key.clone(), value)]);
            let written = write_annotation(&source, &slot.target, &entries).map_err(|e| e.to_string())?;
            let tree = parse_text(&written.text).map_err(|e| format!("{}: {e}", path.display()))?;
            let found = read_annotations(&tree).unwrap();
            ensure(found.iter().any(|ann| entries.iter().all(|(k, v)| ann.entries.get(k) == Some(v))), || {
                format!("{}: {} not read back", path.display(), slot.key)
            })?;
            let stripped = strip_annotations(&tree);
            let expected = if fresh { text.clone() } else { strip_annotations(&original) };
            ensure(stripped == expected, || format!("{}: {} does not strip back", path.display(), slot.key))?;
            writes += 1;
        }
    }
    Ok(format!("{} files, {writes} writes", files.len()))
}

fn cli_service_parity() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = core_dir().join("examples/transcription.w");
    let golden = golden_overrides();
    let variants: [Variant; 10] = [
        ("acme-v1", 1, &[]),
        ("acme-v1", 2, &[]),
        ("acme-v1", 12, &[]),
        ("globex-v1", 1, &[]),
        ("globex-v1", 3, &[]),
        ("acme-v1", 1, &[("upload.requestsPerMonth", "250000")]),
        ("globex-v1", 2, &[("search.requestsPerMonth", "0")]),
        ("acme-v1", 1, &[("http.transcribe.callsEndpoint", "/callback")]),
        ("globex-v1", 6, &[("videoStorage.put.payloadBytes", "1234567"), ("upload.fn.memoryGb", "1.5")]),
        ("acme-v1", 4, &[("transcripts.averageRecordSize", "1e3"), ("search.fn.durationSeconds", "0.05")]),
    ];
    let app = penny_service::router(Arc::new(penny_service::AppState::new(bundled_catalogs())));
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    for (i, (vendor, month, extra)) in variants.iter().enumerate() {
        let mut assumptions = golden.clone();
        for (k, v) in extra.iter() {
            assumptions.insert(k.to_string(), Scalar::parse_cli(v));
        }
        let file = tmp.path().join(format!("assumptions-{i}.json"));
        std::fs::write(&file, serde_json::to_string(&assumptions).unwrap()).unwrap();
        let (code, cli, stderr) = penny(&[
            "cost",
            fixture.to_str().unwrap(),
            "--catalog",
            vendor,
            "--month",
            &month.to_string(),
            "--assumptions",
            file.to_str().unwrap(),
            "--json",
        ]);
        ensure(code == 0, || format!("case {i}: exit {code}: {stderr}"))?;
        let api = runtime.block_on(async {
            let open = Request::post("/sessions")
                .header("content-type", "application/json")
                .body(Body::from(json!({ "source": FIXTURE, "assumptions": assumptions, "catalogs": [vendor] }).to_string()))
                .unwrap();
            let res = app.clone().oneshot(open).await.unwrap();
            assert_eq!(res.status(), StatusCode::CREATED);
            let body: serde_json::Value = serde_json::from_slice(&to_bytes(res.into_body(), usize::MAX).await.unwrap()).unwrap();
            let id = body["session_id"].as_str().unwrap().to_string();
            let get = Request::get(format!("/sessions/{id}/cost?month={month}&vendor={vendor}")).body(Body::empty()).unwrap();
            let res = app.clone().oneshot(get).await.unwrap();
            assert_eq!(res.status(), StatusCode::OK);
            to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec()
        });
        ensure(cli == api, || format!("case {i} ({vendor}, month {month}): outputs differ"))?;
    }
    // a sanity anchor independent of both front ends
    let a = analyze_text(FIXTURE, &golden).unwrap();
    let direct = monthly_cost(&bind(&a.extraction.graph, &acme()).unwrap(), &a.extraction.assumptions, 1).unwrap();
    ensure(direct.total == Micros(718_015_135), || format!("direct total {}", direct.total))?;
    Ok(format!("{} combinations byte-identical", variants.len()))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("fixture graph reproduction", fixture_graph),
        ("golden cost report", golden_report),
        ("oracle equivalence", oracle_equivalence),
        ("tiered pricing", tiered_pricing),
        ("property suite", property_suite),
        ("annotation round-trip", annotation_roundtrip),
        ("cli/service parity", cli_service_parity),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
