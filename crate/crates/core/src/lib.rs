//! Buffer dynamics of unsaturated CSMA networks on class interference graphs.
//!
//! The crate covers the activity-state space and capacity region of an
//! interference graph, the saturated product-form distribution and its
//! throughput inversion, the mean-field drift, integrator and equilibria for
//! the base model and its multi-rate, queue-based and finite-buffer variants,
//! an exact discrete-event simulator of the N-node process, and the limit
//! laws used to compare the two.
//!
//! Classes are indexed from 0 everywhere.

pub mod error;
pub mod graph;
pub mod meanfield;
pub mod metrics;
pub mod params;
pub mod population;
pub mod simplex;
pub mod simulator;
pub mod stationary;

pub use error::{Error, ErrorKind, Result};
pub use graph::{
    capacity_region_contains, enumerate_feasible_states, enumerate_feasible_states_capped,
    ActivitySpace, ActivityState, CapacityCheck, InterferenceGraph, RegionMembership,
};
pub use params::{NetworkParams, QueueRates, ServiceMode, TailRule, Variant};
pub use population::PopulationState;
