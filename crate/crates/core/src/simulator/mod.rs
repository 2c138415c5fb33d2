//! Discrete-event simulation of the finite-N network.
//!
//! All clocks except multi-rate service times are exponential, so the next
//! event is drawn from aggregate competing rates and resampled after every
//! transition.

mod replicate;
mod state;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ActivitySpace;
use crate::meanfield::stability_condition;
use crate::params::{NetworkParams, ServiceMode, Variant};
use crate::population::PopulationState;

pub use replicate::{
    pool, replica_seed, replicate, Pooled, PooledClass, PooledSummary, Replication,
};
pub use state::{population_snapshot, InFlight, SimState};

pub const DEFAULT_MAX_EVENTS: u64 = 1_000_000_000;
const BATCHES: usize = 32;

/// Statistics are collected after this warm-up period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurnIn {
    /// Fraction of `t_end`.
    Fraction(f64),
    /// Absolute simulated time.
    Time(f64),
}

impl Default for BurnIn {
    fn default() -> Self {
        BurnIn::Fraction(0.2)
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: NetworkParams,
    pub space: ActivitySpace,
    /// Total node count N, split over classes by [`node_counts`].
    pub nodes: usize,
    pub seed: u64,
    pub t_end: f64,
    pub burn_in: BurnIn,
    /// Spacing of stored population snapshots; `None` stores none.
    pub sample_interval: Option<f64>,
    /// Levels at or above `n_max` are pooled in the empirical distribution.
    pub n_max: usize,
    pub max_events: u64,
}

impl SimConfig {
    pub fn new(
        params: NetworkParams,
        space: ActivitySpace,
        nodes: usize,
        seed: u64,
        t_end: f64,
    ) -> Self {
        Self {
            params,
            space,
            nodes,
            seed,
            t_end,
            burn_in: BurnIn::default(),
            sample_interval: None,
            n_max: 64,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }

    pub fn burn_in_time(&self) -> f64 {
        match self.burn_in {
            BurnIn::Fraction(f) => f * self.t_end,
            BurnIn::Time(t) => t,
        }
    }

    pub fn validate(&self) -> Result<Vec<usize>> {
        self.params.validate()?;
        if self.params.num_classes() != self.space.num_classes() {
            return Err(Error::DimensionMismatch {
                what: "network parameters",
                expected: self.space.num_classes(),
                got: self.params.num_classes(),
            });
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_end {} must be > 0",
                self.t_end
            )));
        }
        let b = self.burn_in_time();
        if !(b >= 0.0 && b < self.t_end) {
            return Err(Error::InvalidParameter(format!(
                "burn-in {b} must lie in [0, t_end = {})",
                self.t_end
            )));
        }
        if let Some(dt) = self.sample_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "sample interval {dt} must be > 0"
                )));
            }
        }
        node_counts(&self.params.proportions, self.nodes)
    }
}

/// Splits `n` nodes over classes by the largest-remainder method on `p_c n`.
pub fn node_counts(proportions: &[f64], n: usize) -> Result<Vec<usize>> {
    let quotas: Vec<f64> = proportions.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // Ties go to the lower class index.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().take(n.saturating_sub(assigned)) {
        counts[c] += 1;
    }
    if let Some(c) = counts.iter().position(|&k| k == 0) {
        return Err(Error::InvalidParameter(format!(
            "class {c} receives no nodes with N = {n}"
        )));
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EventCounts {
    pub arrivals: Vec<u64>,
    pub backoffs: Vec<u64>,
    pub transmissions: Vec<u64>,
    /// Events at which the class held packets but a neighbor (or its own
    /// ongoing transmission) kept it from backing off.
    pub blocked: Vec<u64>,
    pub dropped: Vec<u64>,
    pub total: u64,
}

impl EventCounts {
    fn new(c: usize) -> Self {
        Self {
            arrivals: vec![0; c],
            backoffs: vec![0; c],
            transmissions: vec![0; c],
            blocked: vec![0; c],
            dropped: vec![0; c],
            total: 0,
        }
    }
}

/// Results of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub seed: u64,
    pub node_counts: Vec<usize>,
    pub t_end: f64,
    pub burn_in: f64,
    /// Time-averaged empirical population distribution after burn-in.
    pub population: PopulationState,
    /// Waiting times (arrival to transmission start) of packets that arrived
    /// after burn-in, in order of transmission start.
    pub waiting: Vec<Vec<f64>>,
    /// Sojourn times (arrival to transmission end), same selection rule.
    pub sojourn: Vec<Vec<f64>>,
    /// Whole-run event counters.
    pub events: EventCounts,
    /// Packets still buffered / in flight at the end of the run.
    pub queued_at_end: Vec<u64>,
    pub in_flight_at_end: Vec<u64>,
    /// Time-average fraction of time each class transmits.
    pub activity_fraction: Vec<f64>,
    /// Time-average packets per node (buffered plus in flight).
    pub mean_in_system: Vec<f64>,
    /// Arrivals per unit time after burn-in (class totals, dropped included).
    pub arrival_rate: Vec<f64>,
    /// Accepted arrivals per unit time after burn-in.
    pub accepted_rate: Vec<f64>,
    /// Whether the parameters satisfy the stability condition; `None` when
    /// that could not be decided.
    pub stable: Option<bool>,
    #[serde(skip)]
    pub snapshots: Vec<(f64, PopulationState)>,
}

/// Mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: Option<f64>,
    pub samples: usize,
}

/// Mean of `samples` with a standard error from 32 consecutive batches
/// (absent with fewer than 64 samples).
pub fn batch_estimate(samples: &[f64]) -> Option<Estimate> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std_error = (n >= 2 * BATCHES).then(|| {
        let size = n / BATCHES;
        let means: Vec<f64> = (0..BATCHES)
            .map(|b| samples[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
            .collect();
        let m = means.iter().sum::<f64>() / BATCHES as f64;
        let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
        (var / BATCHES as f64).sqrt()
    });
    Some(Estimate {
        mean,
        std_error,
        samples: n,
    })
}

impl SimStats {
    pub fn num_classes(&self) -> usize {
        self.node_counts.len()
    }

    pub fn mean_wait(&self, c: usize) -> Option<Estimate> {
        batch_estimate(&self.waiting[c])
    }

    pub fn mean_sojourn(&self, c: usize) -> Option<Estimate> {
        batch_estimate(&self.sojourn[c])
    }

    /// Packets accepted = transmitted + buffered + in flight, for every class.
    pub fn is_conserved(&self) -> bool {
        (0..self.num_classes()).all(|c| {
            self.events.arrivals[c]
                == self.events.transmissions[c]
                    + self.queued_at_end[c]
                    + self.in_flight_at_end[c]
                    + self.events.dropped[c]
        })
    }
}

/// Piecewise-constant integrals restricted to `[burn, ∞)`.
struct Accumulator {
    burn: f64,
    level_time: Vec<Vec<f64>>,
    level_count: Vec<Vec<usize>>,
    level_stamp: Vec<Vec<f64>>,
    active_time: Vec<f64>,
    active_stamp: Vec<f64>,
    packets_time: Vec<f64>,
    packets_stamp: Vec<f64>,
    packets: Vec<u64>,
    n_max: usize,
}

impl Accumulator {
    fn new(counts: &[usize], n_max: usize, burn: f64) -> Self {
        let c = counts.len();
        Self {
            burn,
            level_time: vec![vec![0.0; n_max + 1]; c],
            level_count: counts
                .iter()
                .map(|&k| {
                    let mut v = vec![0; n_max + 1];
                    v[0] = k;
                    v
                })
                .collect(),
            level_stamp: vec![vec![0.0; n_max + 1]; c],
            active_time: vec![0.0; c],
            active_stamp: vec![0.0; c],
            packets_time: vec![0.0; c],
            packets_stamp: vec![0.0; c],
            packets: vec![0; c],
            n_max,
        }
    }

    fn span(&self, from: f64, to: f64) -> f64 {
        to.max(self.burn) - from.max(self.burn)
    }

    fn move_node(&mut self, c: usize, from: u32, to: u32, t: f64) {
        let (a, b) = (
            (from as usize).min(self.n_max),
            (to as usize).min(self.n_max),
        );
        if a == b {
            return;
        }
        for lvl in [a, b] {
            let s = self.span(self.level_stamp[c][lvl], t);
            self.level_time[c][lvl] += self.level_count[c][lvl] as f64 * s;
            self.level_stamp[c][lvl] = t;
        }
        self.level_count[c][a] -= 1;
        self.level_count[c][b] += 1;
    }

    fn set_active(&mut self, c: usize, was_active: bool, t: f64) {
        if was_active {
            self.active_time[c] += self.span(self.active_stamp[c], t);
        }
        self.active_stamp[c] = t;
    }

    fn change_packets(&mut self, c: usize, delta: i64, t: f64) {
        self.packets_time[c] += self.packets[c] as f64 * self.span(self.packets_stamp[c], t);
        self.packets_stamp[c] = t;
        self.packets[c] = (self.packets[c] as i64 + delta) as u64;
    }

    fn finish(&mut self, state: &SimState, space: &ActivitySpace, t: f64) {
        let y = state.activity_state(space);
        for c in 0..self.level_time.len() {
            for lvl in 0..=self.n_max {
                let s = self.span(self.level_stamp[c][lvl], t);
                self.level_time[c][lvl] += self.level_count[c][lvl] as f64 * s;
                self.level_stamp[c][lvl] = t;
            }
            self.set_active(c, y.is_active(c), t);
            self.change_packets(c, 0, t);
        }
    }
}

enum Event {
    Arrival(usize),
    Backoff(usize),
    Completion(usize),
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    // Inverse transform; 1 − U lies in (0, 1].
    -(1.0 - rng.random::<f64>()).ln() / rate
}

fn service_sample(rng: &mut ChaCha8Rng, modes: &[ServiceMode]) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = &modes[modes.len() - 1];
    for m in modes {
        acc += m.prob;
        if u < acc {
            chosen = m;
            break;
        }
    }
    let rate = chosen.phases as f64 / chosen.mean;
    (0..chosen.phases).map(|_| exponential(rng, rate)).sum()
}

struct Run<'a> {
    cfg: &'a SimConfig,
    counts: Vec<usize>,
    rng: ChaCha8Rng,
    state: SimState,
    acc: Accumulator,
    events: EventCounts,
    waiting: Vec<Vec<f64>>,
    sojourn: Vec<Vec<f64>>,
    snapshots: Vec<(f64, PopulationState)>,
    next_snapshot: f64,
    post_burn_arrivals: Vec<u64>,
    post_burn_accepted: Vec<u64>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a SimConfig, counts: Vec<usize>) -> Self {
        let c = counts.len();
        let burn = cfg.burn_in_time();
        Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            state: SimState::idle(&cfg.space, &counts),
            acc: Accumulator::new(&counts, cfg.n_max, burn),
            events: EventCounts::new(c),
            waiting: vec![Vec::new(); c],
            sojourn: vec![Vec::new(); c],
            snapshots: Vec::new(),
            next_snapshot: burn,
            post_burn_arrivals: vec![0; c],
            post_burn_accepted: vec![0; c],
            counts,
            cfg,
        }
    }

    fn backoff_rate(&self, c: usize) -> f64 {
        let p = &self.cfg.params;
        let n_c = self.counts[c] as f64;
        match p.variant {
            Variant::QueueBased { .. } => {
                self.state.queues[c]
                    .iter()
                    .filter(|&&q| q > 0)
                    .map(|&q| p.backoff_rate(c, q as usize))
                    .sum::<f64>()
                    / n_c
            }
            _ => p.nu[c] * self.state.nonempty[c] as f64 / n_c,
        }
    }

    fn multi_rate(&self) -> Option<&'a [Vec<ServiceMode>]> {
        match &self.cfg.params.variant {
            Variant::MultiRate { modes } => Some(modes),
            _ => None,
        }
    }

    fn advance(&mut self, to: f64) {
        if let Some(dt) = self.cfg.sample_interval {
            while self.next_snapshot <= to && self.next_snapshot <= self.cfg.t_end {
                self.snapshots.push((
                    self.next_snapshot,
                    population_snapshot(&self.state, self.cfg.n_max),
                ));
                self.next_snapshot += dt;
            }
        }
        self.state.clock = to;
    }

    fn set_queue(&mut self, c: usize, k: usize, q: u32) {
        let old = self.state.queues[c][k];
        self.acc.move_node(c, old, q, self.state.clock);
        if old == 0 && q > 0 {
            self.state.nonempty[c] += 1;
        } else if old > 0 && q == 0 {
            self.state.nonempty[c] -= 1;
        }
        self.state.queues[c][k] = q;
    }

    fn pick_node(&mut self, c: usize) -> usize {
        let queues = &self.state.queues[c];
        match self.cfg.params.variant {
            Variant::QueueBased { .. } => {
                let p = &self.cfg.params;
                let total: f64 = queues.iter().map(|&q| p.backoff_rate(c, q as usize)).sum();
                let target = self.rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut last = 0;
                for (k, &q) in queues.iter().enumerate() {
                    if q == 0 {
                        continue;
                    }
                    last = k;
                    acc += p.backoff_rate(c, q as usize);
                    if target < acc {
                        return k;
                    }
                }
                last
            }
            _ => {
                let j = self.rng.random_range(0..self.state.nonempty[c]);
                queues
                    .iter()
                    .enumerate()
                    .filter(|(_, &q)| q > 0)
                    .nth(j)
                    .map(|(k, _)| k)
                    .expect("nonempty count matches buffers")
            }
        }
    }

    fn apply(&mut self, ev: Event) {
        let t = self.state.clock;
        let cfg: &'a SimConfig = self.cfg;
        let space = &cfg.space;
        let after_burn = t >= self.acc.burn;
        let y = self.state.activity_state(space);
        for c in 0..self.counts.len() {
            if self.state.nonempty[c] > 0 && !space.can_back_off(y, c) {
                self.events.blocked[c] += 1;
            }
        }
        match ev {
            Event::Arrival(c) => {
                let k = self.rng.random_range(0..self.counts[c]);
                self.events.arrivals[c] += 1;
                if after_burn {
                    self.post_burn_arrivals[c] += 1;
                }
                let q = self.state.queues[c][k];
                if self
                    .cfg
                    .params
                    .buffer_capacity(c)
                    .is_some_and(|cap| q as usize >= cap)
                {
                    self.events.dropped[c] += 1;
                    return;
                }
                if after_burn {
                    self.post_burn_accepted[c] += 1;
                }
                self.state.fifo[c][k].push_back(t);
                self.set_queue(c, k, q + 1);
                self.acc.change_packets(c, 1, t);
            }
            Event::Backoff(c) => {
                let k = self.pick_node(c);
                let arrived = self.state.fifo[c][k]
                    .pop_front()
                    .expect("buffer is nonempty");
                let q = self.state.queues[c][k];
                self.set_queue(c, k, q - 1);
                let completes_at = self
                    .multi_rate()
                    .map(|modes| t + service_sample(&mut self.rng, &modes[c]));
                self.state.in_flight[c] = Some(InFlight {
                    node: k,
                    arrived,
                    completes_at,
                });
                self.acc.set_active(c, false, t);
                self.state.activity = space
                    .index_of(y.with(c))
                    .expect("back-off keeps Y feasible");
                self.events.backoffs[c] += 1;
                if arrived >= self.acc.burn {
                    self.waiting[c].push(t - arrived);
                }
            }
            Event::Completion(c) => {
                let pkt = self.state.in_flight[c]
                    .take()
                    .expect("class is transmitting");
                self.acc.set_active(c, true, t);
                self.acc.change_packets(c, -1, t);
                self.state.activity = space.index_of(y.without(c)).expect("subsets stay feasible");
                self.events.transmissions[c] += 1;
                if pkt.arrived >= self.acc.burn {
                    self.sojourn[c].push(t - pkt.arrived);
                }
            }
        }
        self.events.total += 1;
        debug_assert!(self.state.activity_state(space).is_feasible(space.graph()));
    }

    /// Advances to the next event, or to `t_end`. Returns false once done.
    fn step(&mut self) -> bool {
        let cfg: &'a SimConfig = self.cfg;
        let space = &cfg.space;
        let params = &cfg.params;
        let c_count = self.counts.len();
        let y = self.state.activity_state(space);
        let multi = self.multi_rate().is_some();

        let mut rates = Vec::with_capacity(3 * c_count);
        for c in 0..c_count {
            rates.push(params.lambda[c]);
        }
        for c in 0..c_count {
            rates.push(if space.can_back_off(y, c) {
                self.backoff_rate(c)
            } else {
                0.0
            });
        }
        for c in 0..c_count {
            rates.push(if !multi && y.is_active(c) {
                params.mu[c]
            } else {
                0.0
            });
        }
        let total: f64 = rates.iter().sum();
        let scheduled = self
            .state
            .in_flight
            .iter()
            .enumerate()
            .filter_map(|(c, f)| f.as_ref().and_then(|f| f.completes_at).map(|s| (s, c)))
            .min_by(|a, b| a.0.total_cmp(&b.0));

        let t = self.state.clock;
        let t_exp = if total > 0.0 {
            t + exponential(&mut self.rng, total)
        } else {
            f64::INFINITY
        };
        let (t_next, ev) = match scheduled {
            Some((s, c)) if s <= t_exp => (s, Some(Event::Completion(c))),
            _ => (t_exp, None),
        };
        if t_next > self.cfg.t_end {
            self.advance(self.cfg.t_end);
            return false;
        }
        self.advance(t_next);
        let ev = ev.unwrap_or_else(|| {
            let target = self.rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = rates
                .iter()
                .rposition(|&r| r > 0.0)
                .expect("positive total rate");
            for (i, r) in rates.iter().enumerate() {
                acc += r;
                if target < acc && *r > 0.0 {
                    idx = i;
                    break;
                }
            }
            match idx / c_count {
                0 => Event::Arrival(idx % c_count),
                1 => Event::Backoff(idx % c_count),
                _ => Event::Completion(idx % c_count),
            }
        });
        self.apply(ev);
        true
    }

    fn finish(mut self) -> SimStats {
        let t = self.state.clock;
        self.acc.finish(&self.state, &self.cfg.space, t);
        let duration = t - self.acc.burn;
        let c_count = self.counts.len();
        let rows = (0..c_count)
            .map(|c| {
                let total: f64 = self.acc.level_time[c].iter().sum();
                if total > 0.0 {
                    self.acc.level_time[c].iter().map(|v| v / total).collect()
                } else {
                    let mut r = vec![0.0; self.cfg.n_max + 1];
                    r[0] = 1.0;
                    r
                }
            })
            .collect();
        let per_time = |v: f64| if duration > 0.0 { v / duration } else { 0.0 };
        SimStats {
            seed: self.cfg.seed,
            t_end: self.cfg.t_end,
            burn_in: self.acc.burn,
            population: PopulationState::from_rows(rows).expect("consistent shape"),
            activity_fraction: self.acc.active_time.iter().map(|&v| per_time(v)).collect(),
            mean_in_system: (0..c_count)
                .map(|c| per_time(self.acc.packets_time[c]) / self.counts[c] as f64)
                .collect(),
            arrival_rate: self
                .post_burn_arrivals
                .iter()
                .map(|&a| per_time(a as f64))
                .collect(),
            accepted_rate: self
                .post_burn_accepted
                .iter()
                .map(|&a| per_time(a as f64))
                .collect(),
            queued_at_end: self
                .state
                .queues
                .iter()
                .map(|q| q.iter().map(|&v| v as u64).sum())
                .collect(),
            in_flight_at_end: self
                .state
                .in_flight
                .iter()
                .map(|f| f.is_some() as u64)
                .collect(),
            stable: stability_condition(&self.cfg.params, &self.cfg.space)
                .ok()
                .map(|r| r.stable),
            node_counts: self.counts,
            waiting: self.waiting,
            sojourn: self.sojourn,
            events: self.events,
            snapshots: self.snapshots,
        }
    }
}

/// Simulates one seeded run up to `t_end`.
pub fn run(config: &SimConfig) -> Result<SimStats> {
    let counts = config.validate()?;
    let mut sim = Run::new(config, counts);
    while sim.step() {
        if sim.events.total >= config.max_events {
            let events = sim.events.total;
            return Err(Error::EventCapExceeded {
                events,
                partial: Box::new(sim.finish()),
            });
        }
    }
    debug_assert!(sim.state.is_consistent(&config.space));
    Ok(sim.finish())
}
