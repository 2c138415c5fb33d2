//! Mean-field limit: drift, integration, equilibria and mass analytics.

pub mod analytics;
pub mod drift;
pub mod fixed_point;
pub mod ode;

pub use analytics::{
    dominance_gap, mass, mass_drift, stochastically_dominated, stochastically_dominated_within,
};
pub use drift::{activity_weights, backoff_availability, drift, sup_norm};
pub use fixed_point::{
    complete_graph_activity_factors, finite_buffer_balance, fixed_point, fixed_point_with,
    stability_condition, varrho, Diagnostics, FixedPointMethod, FixedPointOptions,
    FixedPointResult, StabilityReport, Truncation,
};
pub use ode::{integrate, rk4_step, IntegrationOptions, Trajectory};
