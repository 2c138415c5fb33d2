//! Class interference graphs and their feasible activity states.
//!
//! Classes are 0-indexed everywhere. An activity state is a binary vector over
//! classes; it is feasible when no two adjacent classes are active at once,
//! i.e. when it is an independent set of the graph.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{self, LpOutcome};

/// Default upper bound on the number of classes accepted by enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Bitmask representation limits the hard maximum.
const HARD_CLASS_LIMIT: usize = 63;

/// Tolerance separating interior, boundary and outside of the capacity region.
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct InterferenceGraph {
    num_classes: usize,
    /// `neighbors[c]` has bit `d` set iff `(c, d)` is an edge.
    neighbors: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    classes: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for InterferenceGraph {
    type Error = Error;
    fn try_from(r: GraphRepr) -> Result<Self> {
        InterferenceGraph::new(r.classes, &r.edges)
    }
}

impl From<InterferenceGraph> for GraphRepr {
    fn from(g: InterferenceGraph) -> Self {
        GraphRepr {
            classes: g.num_classes,
            edges: g.edges(),
        }
    }
}

impl InterferenceGraph {
    /// Builds a graph on `num_classes` classes. Edges are unordered; duplicates
    /// and reversed duplicates are merged.
    pub fn new(num_classes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidGraph("at least one class is required".into()));
        }
        if num_classes > HARD_CLASS_LIMIT {
            return Err(Error::StateSpaceTooLarge {
                classes: num_classes,
                cap: HARD_CLASS_LIMIT,
            });
        }
        let mut neighbors = vec![0u64; num_classes];
        for &(c, d) in edges {
            if c == d {
                return Err(Error::InvalidGraph(format!("self-loop on class {c}")));
            }
            if c >= num_classes || d >= num_classes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({c}, {d}) references a class outside 0..{num_classes}"
                )));
            }
            neighbors[c] |= 1 << d;
            neighbors[d] |= 1 << c;
        }
        Ok(Self {
            num_classes,
            neighbors,
        })
    }

    pub fn complete(num_classes: usize) -> Result<Self> {
        let edges: Vec<_> = (0..num_classes)
            .flat_map(|c| (c + 1..num_classes).map(move |d| (c, d)))
            .collect();
        Self::new(num_classes, &edges)
    }

    pub fn edgeless(num_classes: usize) -> Result<Self> {
        Self::new(num_classes, &[])
    }

    /// The four-class cycle 0-1-3-2-0.
    pub fn square() -> Self {
        Self::new(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).expect("valid square graph")
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn are_adjacent(&self, c: usize, d: usize) -> bool {
        self.neighbors[c] >> d & 1 == 1
    }

    pub fn neighbors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let mask = self.neighbors[c];
        (0..self.num_classes).filter(move |d| mask >> d & 1 == 1)
    }

    /// Edges as sorted pairs `(c, d)` with `c < d`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = BTreeSet::new();
        for c in 0..self.num_classes {
            for d in self.neighbors(c) {
                if c < d {
                    out.insert((c, d));
                }
            }
        }
        out.into_iter().collect()
    }

    /// True when every pair of distinct classes interferes.
    pub fn is_complete(&self) -> bool {
        let all = if self.num_classes == 64 {
            u64::MAX
        } else {
            (1u64 << self.num_classes) - 1
        };
        (0..self.num_classes).all(|c| self.neighbors[c] == all & !(1 << c))
    }

    fn neighbor_mask(&self, c: usize) -> u64 {
        self.neighbors[c]
    }
}

/// A class activity state ω, stored as a bitmask (bit `c` is ω_c).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActivityState(u64);

impl ActivityState {
    pub const IDLE: ActivityState = ActivityState(0);

    pub fn from_mask(mask: u64) -> Self {
        Self(mask)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn is_active(self, c: usize) -> bool {
        self.0 >> c & 1 == 1
    }

    pub fn with(self, c: usize) -> Self {
        Self(self.0 | 1 << c)
    }

    pub fn without(self, c: usize) -> Self {
        Self(self.0 & !(1 << c))
    }

    pub fn active_classes(self) -> impl Iterator<Item = usize> {
        let m = self.0;
        (0..64).filter(move |c| m >> c & 1 == 1)
    }

    /// The occupancy vector (ω_0, …, ω_{C-1}).
    pub fn occupancy(self, num_classes: usize) -> Vec<u8> {
        (0..num_classes).map(|c| self.is_active(c) as u8).collect()
    }

    pub fn to_bit_string(self, num_classes: usize) -> String {
        (0..num_classes)
            .map(|c| if self.is_active(c) { '1' } else { '0' })
            .collect()
    }

    pub fn is_feasible(self, graph: &InterferenceGraph) -> bool {
        self.active_classes()
            .all(|c| c < graph.num_classes() && graph.neighbor_mask(c) & self.0 == 0)
    }
}

/// The enumerated feasible activity states Ω together with, per class, the
/// indices of the states in which the class may back off (Ω₋c) and in which it
/// is transmitting (Ω₊c).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivitySpace {
    graph: InterferenceGraph,
    states: Vec<ActivityState>,
    omega_minus: Vec<Vec<usize>>,
    omega_plus: Vec<Vec<usize>>,
    idle_index: usize,
}

impl ActivitySpace {
    pub fn graph(&self) -> &InterferenceGraph {
        &self.graph
    }

    pub fn num_classes(&self) -> usize {
        self.graph.num_classes()
    }

    pub fn states(&self) -> &[ActivityState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn omega_minus(&self, c: usize) -> &[usize] {
        &self.omega_minus[c]
    }

    pub fn omega_plus(&self, c: usize) -> &[usize] {
        &self.omega_plus[c]
    }

    /// Index of the all-zero state.
    pub fn idle_index(&self) -> usize {
        self.idle_index
    }

    pub fn index_of(&self, state: ActivityState) -> Option<usize> {
        let key = lex_key(state, self.num_classes());
        self.states
            .binary_search_by_key(&key, |s| lex_key(*s, self.num_classes()))
            .ok()
    }

    /// Whether class `c` may start a back-off in `state` (state ∈ Ω₋c).
    pub fn can_back_off(&self, state: ActivityState, c: usize) -> bool {
        !state.is_active(c) && state.mask() & self.graph.neighbor_mask(c) == 0
    }
}

/// Lexicographic key with class 0 as the most significant position.
fn lex_key(state: ActivityState, num_classes: usize) -> u64 {
    (0..num_classes).fold(0, |acc, c| acc << 1 | state.is_active(c) as u64)
}

/// Enumerates Ω with the default class cap.
pub fn enumerate_feasible_states(graph: &InterferenceGraph) -> Result<ActivitySpace> {
    enumerate_feasible_states_capped(graph, DEFAULT_ENUMERATION_CAP)
}

/// Enumerates every independent set of `graph` exactly once, in lexicographic
/// order of the occupancy vector.
pub fn enumerate_feasible_states_capped(
    graph: &InterferenceGraph,
    cap: usize,
) -> Result<ActivitySpace> {
    let classes = graph.num_classes();
    if classes > cap.min(HARD_CLASS_LIMIT) {
        return Err(Error::StateSpaceTooLarge {
            classes,
            cap: cap.min(HARD_CLASS_LIMIT),
        });
    }

    let mut states = Vec::new();
    // Depth-first over classes, trying "inactive" before "active" so that the
    // output is already lexicographically sorted.
    fn backtrack(
        graph: &InterferenceGraph,
        c: usize,
        current: u64,
        blocked: u64,
        out: &mut Vec<ActivityState>,
    ) {
        if c == graph.num_classes() {
            out.push(ActivityState(current));
            return;
        }
        backtrack(graph, c + 1, current, blocked, out);
        if blocked >> c & 1 == 0 {
            backtrack(
                graph,
                c + 1,
                current | 1 << c,
                blocked | graph.neighbor_mask(c),
                out,
            );
        }
    }
    backtrack(graph, 0, 0, 0, &mut states);

    let mut omega_minus = vec![Vec::new(); classes];
    let mut omega_plus = vec![Vec::new(); classes];
    for (i, s) in states.iter().enumerate() {
        for c in 0..classes {
            if s.is_active(c) {
                omega_plus[c].push(i);
            } else if s.mask() & graph.neighbor_mask(c) == 0 {
                omega_minus[c].push(i);
            }
        }
    }
    Ok(ActivitySpace {
        graph: graph.clone(),
        states,
        omega_minus,
        omega_plus,
        idle_index: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMembership {
    InsideInterior,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityCheck {
    pub membership: RegionMembership,
    /// `1 − Σ a_ω` at a schedule minimizing total airtime; negative outside.
    pub margin: f64,
    /// Optimal schedule weights indexed like the activity space, if one exists.
    pub schedule: Option<Vec<f64>>,
}

impl CapacityCheck {
    pub fn is_interior(&self) -> bool {
        self.membership == RegionMembership::InsideInterior
    }
}

/// Decides whether `gamma` lies in the class-capacity region Γ, i.e. whether
/// it is a sub-convex combination of feasible activity states.
///
/// The airtime `Σ a_ω` needed to realise `gamma` is minimized with the dense
/// simplex solver; the margin is one minus that minimum.
pub fn capacity_region_contains(space: &ActivitySpace, gamma: &[f64]) -> Result<CapacityCheck> {
    let classes = space.num_classes();
    if gamma.len() != classes {
        return Err(Error::DimensionMismatch {
            what: "throughput target",
            expected: classes,
            got: gamma.len(),
        });
    }
    if let Some(g) = gamma.iter().find(|g| !g.is_finite() || **g < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "throughput targets must be finite and nonnegative, got {g}"
        )));
    }

    // Only non-idle states carry throughput; the idle state absorbs the slack.
    let columns: Vec<usize> = (0..space.len())
        .filter(|&i| i != space.idle_index())
        .collect();
    let a: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            columns
                .iter()
                .map(|&i| space.states()[i].is_active(c) as u8 as f64)
                .collect()
        })
        .collect();
    let cost = vec![1.0; columns.len()];

    match simplex::minimize(&cost, &a, gamma, 1e-12)? {
        LpOutcome::Optimal { x, objective } => {
            let margin = 1.0 - objective;
            let membership = if margin > CAPACITY_TOLERANCE {
                RegionMembership::InsideInterior
            } else if margin >= -CAPACITY_TOLERANCE {
                RegionMembership::Boundary
            } else {
                RegionMembership::Outside
            };
            let mut schedule = vec![0.0; space.len()];
            for (&i, v) in columns.iter().zip(&x) {
                schedule[i] = *v;
            }
            schedule[space.idle_index()] = margin.max(0.0);
            Ok(CapacityCheck {
                membership,
                margin,
                schedule: Some(schedule),
            })
        }
        LpOutcome::Infeasible { .. } => Ok(CapacityCheck {
            membership: RegionMembership::Outside,
            margin: f64::NEG_INFINITY,
            schedule: None,
        }),
        LpOutcome::Unbounded => Err(Error::LpFailure(
            "airtime minimization reported unbounded".into(),
        )),
    }
}

impl fmt::Display for ActivitySpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.num_classes();
        let listed: Vec<String> = self.states.iter().map(|s| s.to_bit_string(c)).collect();
        write!(f, "{{{}}}", listed.join(","))
    }
}
