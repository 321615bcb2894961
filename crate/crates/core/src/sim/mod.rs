//! Discrete-event simulation of one month, used to check the analytic
//! estimator.
//!
//! Entry points fire at evenly spaced instants, schedules tick exactly, and
//! every diamond owns a FIFO queue: dominant inflow enqueues, secondary inflow
//! dequeues up to its own mass and fires the diamond with what it took. Events
//! run in time order; the seed only breaks ties between simultaneous events.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assumptions::AssumptionSet;
use crate::estimate::{entry_count, price, quantities, topological_order, CostReport, EstimateError, Metering};
use crate::graph::{CostGraph, EdgeKind, EntryRate};
use crate::num::{Rational, SECONDS_PER_MONTH};
use crate::pricing::BoundModel;

/// Upper bound on events in one run.
pub const EVENT_LIMIT: u128 = 100_000_000;

type Time = Ratio<i128>;

#[derive(Debug, Clone)]
enum Stream {
    /// `per_month` evenly spaced events per month, each carrying `mass`.
    Spaced { per_month: i128, mass: Mass },
    /// One event every `period` seconds.
    Ticks { period: Time },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Head {
    time: Time,
    tiebreak: u64,
    stream: usize,
    index: i128,
}

impl Ord for Head {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.time, self.tiebreak, self.stream).cmp(&(&other.time, other.tiebreak, other.stream))
    }
}

impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn to_time(value: &Rational) -> Option<Time> {
    Some(Time::new(value.numer().to_i128()?, value.denom().to_i128()?))
}

fn ceil_i128(value: &Rational) -> Option<i128> {
    let (q, r) = value.numer().div_rem(value.denom());
    let q = if r.is_zero() { q } else { q + BigInt::one() };
    q.to_i128()
}

/// Event mass; most events carry exactly one invocation.
#[derive(Debug, Clone)]
enum Mass {
    One,
    Exact(Rational),
}

impl Mass {
    fn of(value: Rational) -> Mass {
        if value.is_one() {
            Mass::One
        } else {
            Mass::Exact(value)
        }
    }

    fn scaled(&self, weight: &Rational) -> Mass {
        match self {
            _ if weight.is_one() => self.clone(),
            Mass::One => Mass::Exact(weight.clone()),
            Mass::Exact(m) => Mass::Exact(m * weight),
        }
    }

    fn value(&self) -> Rational {
        match self {
            Mass::One => Rational::one(),
            Mass::Exact(m) => m.clone(),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Mass::Exact(m) if m.is_zero())
    }
}

/// Per-node tally; unit events are counted separately to keep the common
/// case allocation free.
#[derive(Debug, Clone, Default)]
struct Tally {
    units: u64,
    rest: Rational,
}

impl Tally {
    fn add(&mut self, mass: &Mass) {
        match mass {
            Mass::One => self.units += 1,
            Mass::Exact(m) => self.rest += m,
        }
    }

    fn total(&self) -> Rational {
        Rational::from_integer(self.units.into()) + &self.rest
    }
}

struct Edge {
    to: usize,
    kind: EdgeKind,
    weight: Rational,
    /// Fan-out count for small integer weights.
    repeat: Option<u32>,
}

struct World {
    out: Vec<Vec<Edge>>,
    queues: Vec<VecDeque<Rational>>,
    counts: Vec<Tally>,
    cumulative: Vec<Tally>,
    tally: bool,
}

impl World {
    fn new(graph: &CostGraph) -> World {
        let index: BTreeMap<&str, usize> = graph.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let mut out: Vec<Vec<Edge>> = graph.nodes.iter().map(|_| Vec::new()).collect();
        for e in &graph.edges {
            let (Some(&from), Some(&to)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) else { continue };
            let repeat = if e.weight.is_integer() { e.weight.to_integer().to_u32().filter(|k| *k <= 64) } else { None };
            out[from].push(Edge { to, kind: e.kind, weight: e.weight.clone(), repeat });
        }
        let n = graph.nodes.len();
        World {
            out,
            queues: vec![VecDeque::new(); n],
            counts: vec![Tally::default(); n],
            cumulative: vec![Tally::default(); n],
            tally: false,
        }
    }

    fn fire(&mut self, node: usize, mass: &Mass) {
        if mass.is_zero() {
            return;
        }
        self.cumulative[node].add(mass);
        if self.tally {
            self.counts[node].add(mass);
        }
        for i in 0..self.out[node].len() {
            let edge = &self.out[node][i];
            let to = edge.to;
            match edge.kind {
                EdgeKind::Sync | EdgeKind::Deferred => match edge.repeat {
                    // integer weights fan out as separate invocations
                    Some(k) => {
                        for _ in 0..k {
                            self.fire(to, mass);
                        }
                    }
                    None => {
                        let carried = mass.scaled(&edge.weight);
                        self.fire(to, &carried);
                    }
                },
                EdgeKind::ImplicitDominant => {
                    let carried = mass.scaled(&edge.weight).value();
                    if !carried.is_zero() {
                        self.queues[to].push_back(carried);
                    }
                }
                EdgeKind::ImplicitSecondary => {
                    if self.queues[to].is_empty() {
                        continue;
                    }
                    let mut room = mass.scaled(&edge.weight).value();
                    let queue = &mut self.queues[to];
                    let mut taken = Rational::zero();
                    while !room.is_zero() {
                        let Some(front) = queue.front_mut() else { break };
                        if *front <= room {
                            room -= &*front;
                            taken += queue.pop_front().expect("front exists");
                        } else {
                            *front -= &room;
                            taken += std::mem::take(&mut room);
                        }
                    }
                    self.fire(to, &Mass::of(taken));
                }
            }
        }
    }
}

/// Simulates months `1..=month` and prices the usage of the last one with the
/// same rules as [`crate::estimate::monthly_cost`].
pub fn simulate_month(model: &BoundModel, assumptions: &AssumptionSet, month: u32, seed: u64) -> Result<CostReport, EstimateError> {
    let metering = simulate_metering(model, assumptions, month, seed)?;
    price(model, assumptions, month, &metering)
}

pub fn simulate_metering(model: &BoundModel, assumptions: &AssumptionSet, month: u32, seed: u64) -> Result<Metering, EstimateError> {
    if month == 0 {
        return Err(EstimateError::InvalidMonth);
    }
    let graph = &model.graph;
    // the analytic pass checks cycles and unresolved keys
    crate::estimate::analytic_metering(model, assumptions, month)?;
    topological_order(graph)?;

    let too_large = |events: u128| EstimateError::SimulationTooLarge { events, limit: EVENT_LIMIT };
    let month_len = SECONDS_PER_MONTH as i128;
    let horizon = Time::from_integer(month_len * month as i128);
    let index: BTreeMap<&str, usize> = graph.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let mut streams: Vec<(usize, Stream)> = Vec::new();
    let mut events: u128 = 0;
    for node in graph.entry_points() {
        let Some(rate) = &node.entry_rate else { continue };
        let stream = match rate {
            EntryRate::PerMonth { .. } => {
                let count = entry_count(rate, assumptions)?;
                if count.is_zero() {
                    continue;
                }
                let n = ceil_i128(&count).ok_or(too_large(u128::MAX))?;
                events = events.saturating_add((n as u128).saturating_mul(month as u128));
                Stream::Spaced { per_month: n, mass: Mass::of(count / Rational::from_integer(n.into())) }
            }
            EntryRate::Interval { key, seconds } => {
                let seconds = assumptions.number(key).or_else(|| seconds.clone()).expect("resolved above");
                let period = to_time(&seconds).ok_or(too_large(u128::MAX))?;
                let ticks = (horizon / period).to_integer();
                events = events.saturating_add(ticks.max(0) as u128);
                Stream::Ticks { period }
            }
        };
        if events > EVENT_LIMIT {
            return Err(too_large(events));
        }
        streams.push((index[node.id.as_str()], stream));
    }

    let mut world = World::new(graph);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let time_of = |stream: &Stream, index: i128| -> Time {
        match stream {
            Stream::Spaced { per_month, .. } => {
                let (m, i) = (index / per_month, index % per_month);
                Time::from_integer(m * month_len) + Time::new((2 * i + 1) * month_len, 2 * per_month)
            }
            Stream::Ticks { period } => period * (index + 1),
        }
    };
    let mut heap = BinaryHeap::new();
    for (s, (_, stream)) in streams.iter().enumerate() {
        let time = time_of(stream, 0);
        if time <= horizon {
            heap.push(Reverse(Head { time, tiebreak: rng.gen(), stream: s, index: 0 }));
        }
    }
    let window_start = Time::from_integer(month_len * (month as i128 - 1));
    while let Some(Reverse(head)) = heap.pop() {
        let (node, stream) = &streams[head.stream];
        world.tally = head.time > window_start;
        match stream {
            Stream::Spaced { mass, .. } => world.fire(*node, mass),
            Stream::Ticks { .. } => world.fire(*node, &Mass::One),
        }
        let next = time_of(stream, head.index + 1);
        if next <= horizon {
            heap.push(Reverse(Head { time: next, tiebreak: rng.gen(), stream: head.stream, index: head.index + 1 }));
        }
    }
    let counts: BTreeMap<String, Rational> =
        graph.nodes.iter().zip(&world.counts).map(|(n, t)| (n.id.clone(), t.total())).collect();
    let cumulative: BTreeMap<String, Rational> =
        graph.nodes.iter().zip(&world.cumulative).map(|(n, t)| (n.id.clone(), t.total())).collect();
    let quantities = quantities(graph, assumptions, &counts, &cumulative)?;
    Ok(Metering { counts, quantities })
}
