use std::collections::VecDeque;

use crate::graph::{ActivitySpace, ActivityState};
use crate::population::PopulationState;

/// A packet currently being transmitted.
#[derive(Debug, Clone, PartialEq)]
pub struct InFlight {
    pub node: usize,
    pub arrived: f64,
    /// Scheduled completion (multi-rate variant only).
    pub completes_at: Option<f64>,
}

/// State of the N-node process.
///
/// `queues[c][k]` counts the packets buffered at node `k` of class `c`,
/// excluding a packet in transmission. `fifo[c][k]` holds their arrival times
/// in service order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub queues: Vec<Vec<u32>>,
    pub fifo: Vec<Vec<VecDeque<f64>>>,
    /// Index of the activity state Y in the activity space.
    pub activity: usize,
    pub in_flight: Vec<Option<InFlight>>,
    pub clock: f64,
    /// Number of nodes with a nonempty buffer, per class.
    pub nonempty: Vec<usize>,
}

impl SimState {
    /// Every buffer empty, nobody transmitting.
    pub fn idle(space: &ActivitySpace, node_counts: &[usize]) -> Self {
        Self {
            queues: node_counts.iter().map(|&n| vec![0; n]).collect(),
            fifo: node_counts
                .iter()
                .map(|&n| vec![VecDeque::new(); n])
                .collect(),
            activity: space.idle_index(),
            in_flight: vec![None; node_counts.len()],
            clock: 0.0,
            nonempty: vec![0; node_counts.len()],
        }
    }

    pub fn activity_state(&self, space: &ActivitySpace) -> ActivityState {
        space.states()[self.activity]
    }

    /// Packets at class `c` nodes, buffered or in transmission.
    pub fn packets_in_class(&self, c: usize) -> u64 {
        let queued: u64 = self.queues[c].iter().map(|&q| q as u64).sum();
        queued + self.in_flight[c].is_some() as u64
    }

    /// Structural checks: Y feasible, a class is active exactly when one of
    /// its packets is in flight, FIFOs match the buffer counts.
    pub fn is_consistent(&self, space: &ActivitySpace) -> bool {
        let y = self.activity_state(space);
        if !y.is_feasible(space.graph()) {
            return false;
        }
        (0..self.queues.len()).all(|c| {
            y.is_active(c) == self.in_flight[c].is_some()
                && self.queues[c]
                    .iter()
                    .zip(&self.fifo[c])
                    .all(|(&q, f)| q as usize == f.len())
                && self.nonempty[c] == self.queues[c].iter().filter(|&&q| q > 0).count()
        })
    }
}

/// Fraction of class-`c` nodes holding `n` packets; levels `≥ n_max` are
/// pooled into the top bin.
pub fn population_snapshot(state: &SimState, n_max: usize) -> PopulationState {
    let rows = state
        .queues
        .iter()
        .map(|nodes| {
            let mut counts = vec![0usize; n_max + 1];
            for &q in nodes {
                counts[(q as usize).min(n_max)] += 1;
            }
            let total = nodes.len() as f64;
            counts.iter().map(|&k| k as f64 / total).collect()
        })
        .collect();
    PopulationState::from_rows(rows).expect("every class has at least one node")
}
