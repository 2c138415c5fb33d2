//! Limiting performance laws and their comparison with simulation output.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::ActivitySpace;
use crate::meanfield::{mass, FixedPointResult};
use crate::params::{NetworkParams, Variant};
use crate::population::PopulationState;
use crate::simulator::{Replication, SimStats};

/// Tail bins with ξ^n below this are left out of tail comparisons.
pub const TAIL_FLOOR: f64 = 1e-6;

/// Large-N laws per class: queue length Geo(ξ), scaled waiting and sojourn
/// times Exp((1 − ξ)/ξ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitLaws {
    pub xi: Vec<f64>,
    /// Exponential rate (1 − ξ)/ξ; infinite for ξ = 0.
    pub rate: Vec<f64>,
    /// ξ/(1 − ξ).
    pub mean_scaled_wait: Vec<f64>,
}

/// Builds the limit laws; ξ = 0 is accepted as the degenerate no-traffic law.
pub fn limit_laws(fp: &FixedPointResult) -> Result<LimitLaws> {
    if let Some((c, x)) = fp
        .xi
        .iter()
        .enumerate()
        .find(|(_, &x)| !(0.0..1.0).contains(&x))
    {
        return Err(Error::Unstable(format!(
            "activity factor of class {c} is {x}; limit laws need values in [0, 1)"
        )));
    }
    Ok(LimitLaws {
        rate: fp.xi.iter().map(|x| (1.0 - x) / x).collect(),
        mean_scaled_wait: fp.xi.iter().map(|x| x / (1.0 - x)).collect(),
        xi: fp.xi.clone(),
    })
}

impl LimitLaws {
    pub fn queue_pmf(&self, c: usize, n: usize) -> f64 {
        geometric_pmf(self.xi[c], n)
    }

    /// P(Q ≥ n) = ξ^n.
    pub fn queue_tail(&self, c: usize, n: usize) -> f64 {
        self.xi[c].powi(n as i32)
    }

    /// P(scaled wait > t).
    pub fn wait_tail(&self, c: usize, t: f64) -> f64 {
        (-self.rate[c] * t).exp()
    }
}

pub fn geometric_pmf(xi: f64, n: usize) -> f64 {
    (1.0 - xi) * xi.powi(n as i32)
}

/// E[z^Q] for Q ~ Geo(ξ).
pub fn geometric_pgf(xi: f64, z: f64) -> f64 {
    (1.0 - xi) / (1.0 - xi * z)
}

/// E[e^{−sW}] for W ~ Exp(rate).
pub fn exponential_lst(rate: f64, s: f64) -> f64 {
    rate / (rate + s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassComparison {
    /// Euclidean distance between the empirical and the limiting distribution.
    pub distance: f64,
    /// max_n |P̂(Q ≥ n) − ξ^n| over 1 ≤ n with ξ^n ≥ 1e-6.
    pub tail_gap: f64,
    pub tail_levels: usize,
    /// (λ_c/N_c) times the mean tagged waiting time.
    pub scaled_wait: f64,
    pub scaled_wait_std_error: Option<f64>,
    /// Mean buffer content of the empirical distribution, which equals the
    /// scaled wait by Little's law.
    pub scaled_wait_little: f64,
    pub predicted_wait: f64,
    pub relative_error: f64,
    pub relative_error_little: f64,
    /// The two estimators differ by more than three standard errors.
    pub estimators_disagree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub nodes: usize,
    pub classes: Vec<ClassComparison>,
    /// Relative residual of the pseudo-conservation law (complete graphs only).
    pub pseudo_conservation: Option<f64>,
}

/// Distance between two rows of possibly different length (missing levels
/// count as zero).
fn padded_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn tail_gap(row: &[f64], xi: f64) -> (f64, usize) {
    let mut gap: f64 = 0.0;
    let mut levels = 0;
    let mut tail: f64 = row.iter().sum();
    for (n, v) in row.iter().enumerate() {
        if n >= 1 {
            let limit = xi.powi(n as i32);
            if limit < TAIL_FLOOR {
                break;
            }
            gap = gap.max((tail - limit).abs());
            levels += 1;
        }
        tail -= v;
    }
    (gap, levels)
}

struct WaitEstimate {
    mean: f64,
    std_error: Option<f64>,
}

fn build_report(
    population: &PopulationState,
    waits: Vec<WaitEstimate>,
    node_counts: &[usize],
    laws: &LimitLaws,
    fp: &FixedPointResult,
    pseudo: Option<f64>,
) -> Result<ComparisonReport> {
    let x_star = fp
        .x_star
        .as_ref()
        .ok_or_else(|| Error::Unstable("the fixed point has no equilibrium in E1".into()))?;
    let little = mass(population);
    let classes = waits
        .into_iter()
        .enumerate()
        .map(|(c, w)| {
            let (gap, levels) = tail_gap(population.row(c), laws.xi[c]);
            let predicted = laws.mean_scaled_wait[c];
            let rel = |v: f64| (v - predicted).abs() / predicted;
            ClassComparison {
                distance: padded_distance(population.row(c), x_star.row(c)),
                tail_gap: gap,
                tail_levels: levels,
                scaled_wait: w.mean,
                scaled_wait_std_error: w.std_error,
                scaled_wait_little: little[c],
                predicted_wait: predicted,
                relative_error: rel(w.mean),
                relative_error_little: rel(little[c]),
                estimators_disagree: w
                    .std_error
                    .is_some_and(|se| (w.mean - little[c]).abs() > 3.0 * se),
            }
        })
        .collect();
    Ok(ComparisonReport {
        nodes: node_counts.iter().sum(),
        classes,
        pseudo_conservation: pseudo,
    })
}

fn is_complete_base(params: &NetworkParams, space: &ActivitySpace) -> bool {
    space.graph().is_complete() && matches!(params.variant, Variant::Base)
}

/// Compares one run against the limit laws.
pub fn compare(
    stats: &SimStats,
    laws: &LimitLaws,
    fp: &FixedPointResult,
    params: &NetworkParams,
    space: &ActivitySpace,
) -> Result<ComparisonReport> {
    let mut waits = Vec::with_capacity(stats.num_classes());
    for c in 0..stats.num_classes() {
        let est = stats.mean_wait(c).ok_or_else(|| {
            Error::InsufficientData(format!("class {c} has no waiting-time samples"))
        })?;
        let scale = params.lambda[c] / stats.node_counts[c] as f64;
        waits.push(WaitEstimate {
            mean: scale * est.mean,
            std_error: est.std_error.map(|s| scale * s),
        });
    }
    let pseudo = if is_complete_base(params, space) {
        Some(pseudo_conservation_residual(stats, params, space)?)
    } else {
        None
    };
    build_report(
        &stats.population,
        waits,
        &stats.node_counts,
        laws,
        fp,
        pseudo,
    )
}

/// Compares pooled replicas: the averaged empirical distribution and the
/// across-replica mean wait with its standard error.
pub fn compare_replication(
    rep: &Replication,
    laws: &LimitLaws,
    fp: &FixedPointResult,
    params: &NetworkParams,
    space: &ActivitySpace,
) -> Result<ComparisonReport> {
    let node_counts = &rep.runs[0].node_counts;
    let mut waits = Vec::new();
    for (c, pc) in rep.pooled.classes.iter().enumerate() {
        let w = pc.scaled_wait.ok_or_else(|| {
            Error::InsufficientData(format!("class {c} has no waiting-time samples"))
        })?;
        waits.push(WaitEstimate {
            mean: w.mean,
            std_error: w.std_error,
        });
    }
    let pseudo = if is_complete_base(params, space) {
        let mean_waits: Vec<f64> = rep
            .pooled
            .classes
            .iter()
            .map(|pc| pc.mean_wait.map(|w| w.mean).unwrap_or(0.0))
            .collect();
        Some(pseudo_conservation_from_waits(
            params,
            node_counts,
            &mean_waits,
        )?)
    } else {
        None
    };
    build_report(&rep.pooled.population, waits, node_counts, laws, fp, pseudo)
}

/// Both sides of the pseudo-conservation law for the equivalent 1-limited
/// polling system, given raw mean waiting times per class.
///
/// LHS = Σ_c ρ_c (1 − λ_c/(ν_c(1 − ρ))) E[W_c] and
/// RHS = ρ/(1 − ρ) Σ_c λ_c/μ_c² + (1/(1 − ρ)) Σ_c N_c λ_c/(μ_c ν_c)
/// − Σ_c λ_c/(ν μ_c) + ρ/ν, with ρ the total load and ν = Σ_c ν_c.
pub fn pseudo_conservation_sides(
    params: &NetworkParams,
    node_counts: &[usize],
    mean_waits: &[f64],
) -> Result<(f64, f64)> {
    let c_count = params.num_classes();
    let rho: f64 = params.loads().iter().sum();
    if rho >= 1.0 {
        return Err(Error::Unstable(format!("total load {rho} is not below 1")));
    }
    let nu_total: f64 = params.nu.iter().sum();
    let (l, n, nu, mu) = (&params.lambda, node_counts, &params.nu, &params.mu);
    let lhs: f64 = (0..c_count)
        .map(|c| l[c] / mu[c] * (1.0 - l[c] / (nu[c] * (1.0 - rho))) * mean_waits[c])
        .sum();
    let rhs = rho / (1.0 - rho) * (0..c_count).map(|c| l[c] / mu[c].powi(2)).sum::<f64>()
        + (0..c_count)
            .map(|c| n[c] as f64 * l[c] / (mu[c] * nu[c]))
            .sum::<f64>()
            / (1.0 - rho)
        - (0..c_count).map(|c| l[c] / (nu_total * mu[c])).sum::<f64>()
        + rho / nu_total;
    Ok((lhs, rhs))
}

pub fn pseudo_conservation_from_waits(
    params: &NetworkParams,
    node_counts: &[usize],
    mean_waits: &[f64],
) -> Result<f64> {
    let (lhs, rhs) = pseudo_conservation_sides(params, node_counts, mean_waits)?;
    Ok((lhs - rhs).abs() / rhs.abs())
}

/// |LHS − RHS| / |RHS| of the pseudo-conservation law with the empirical
/// mean waiting times of `stats`.
pub fn pseudo_conservation_residual(
    stats: &SimStats,
    params: &NetworkParams,
    space: &ActivitySpace,
) -> Result<f64> {
    if !is_complete_base(params, space) {
        return Err(Error::Unsupported(
            "the pseudo-conservation law applies to the base model on complete graphs".into(),
        ));
    }
    let mut waits = Vec::new();
    for c in 0..stats.num_classes() {
        waits.push(
            stats
                .mean_wait(c)
                .ok_or_else(|| {
                    Error::InsufficientData(format!("class {c} has no waiting-time samples"))
                })?
                .mean,
        );
    }
    pseudo_conservation_from_waits(params, &stats.node_counts, &waits)
}
