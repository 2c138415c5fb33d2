//! Equilibria of the mean-field system for every model variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{capacity_region_contains, ActivitySpace};
use crate::params::{NetworkParams, TailRule, Variant};
use crate::population::PopulationState;
use crate::stationary::{
    distribution_from_weights, invert_throughput_with, invert_weights, throughput_of, Inversion,
    InversionMethod, InversionOptions,
};

/// Upper bound on automatically chosen truncation levels.
const MAX_AUTO_LEVELS: usize = 100_000;
const AUTO_TAIL: f64 = 1e-12;

/// How many buffer levels to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    Fixed(usize),
    /// Smallest level at which the equilibrium tail drops below 1e-12.
    Auto,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Fixed(64)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointOptions {
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub inversion: InversionOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointMethod {
    ClosedForm,
    FixedPointIteration,
    Newton,
    Bisection,
}

impl From<InversionMethod> for FixedPointMethod {
    fn from(m: InversionMethod) -> Self {
        match m {
            InversionMethod::FixedPoint => FixedPointMethod::FixedPointIteration,
            InversionMethod::Newton => FixedPointMethod::Newton,
            InversionMethod::ClosedForm => FixedPointMethod::ClosedForm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Sup-norm residual of the defining equation (θ(ξ) = ρ, or θ̃ = ρ̃).
    pub residual: f64,
    pub method: FixedPointMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    /// Activity factors: the stationary fraction of non-empty nodes per class.
    /// For finite buffers this is the geometric ratio of the truncated law.
    pub xi: Vec<f64>,
    /// The equilibrium; `None` when it does not lie in E¹.
    pub x_star: Option<PopulationState>,
    pub stable: bool,
    /// Σ ρ_d + max λ_c/ν_c on complete graphs; `None` elsewhere.
    pub varrho: Option<f64>,
    /// Effective class back-off rates ν̃ (queue-based variant only).
    pub effective_backoff: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub varrho: Option<f64>,
    pub stable: bool,
    /// ρ ∈ int(Γ) and ξ = η(ρ) < e.
    pub xi_feasible: bool,
}

fn check_dims(params: &NetworkParams, space: &ActivitySpace) -> Result<()> {
    params.validate()?;
    if params.num_classes() != space.num_classes() {
        return Err(Error::DimensionMismatch {
            what: "network parameters",
            expected: space.num_classes(),
            got: params.num_classes(),
        });
    }
    Ok(())
}

/// ϱ = Σ_d λ_d U_d + max_c λ_c/ν_c (complete interference only).
pub fn varrho(params: &NetworkParams) -> f64 {
    let load: f64 = params.loads().iter().sum();
    let worst = (0..params.num_classes())
        .map(|c| params.lambda[c] / params.nu[c])
        .fold(0.0, f64::max);
    load + worst
}

/// Closed-form activity factors on a complete graph:
/// ξ_c = λ_c / (ν_c (1 − Σ_d ρ_d)).
pub fn complete_graph_activity_factors(params: &NetworkParams) -> Result<Vec<f64>> {
    let load: f64 = params.loads().iter().sum();
    if load >= 1.0 - crate::graph::CAPACITY_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "total load {load} is not below 1"
        )));
    }
    Ok((0..params.num_classes())
        .map(|c| params.lambda[c] / (params.nu[c] * (1.0 - load)))
        .collect())
}

fn auto_levels(xi_max: f64) -> usize {
    if xi_max <= 0.0 {
        return 1;
    }
    let n = (AUTO_TAIL.ln() / xi_max.ln()).floor() as usize + 1;
    n.clamp(1, MAX_AUTO_LEVELS)
}

pub fn fixed_point(params: &NetworkParams, space: &ActivitySpace) -> Result<FixedPointResult> {
    fixed_point_with(params, space, &FixedPointOptions::default())
}

pub fn fixed_point_with(
    params: &NetworkParams,
    space: &ActivitySpace,
    opts: &FixedPointOptions,
) -> Result<FixedPointResult> {
    check_dims(params, space)?;
    match &params.variant {
        Variant::Base | Variant::MultiRate { .. } => geometric_fixed_point(params, space, opts),
        Variant::QueueBased { .. } => queue_based_fixed_point(params, space, opts),
        Variant::FiniteBuffer { capacity } => finite_buffer_fixed_point(params, capacity, opts),
    }
}

fn load_residual(space: &ActivitySpace, weights: &[f64], rho: &[f64]) -> f64 {
    let theta = throughput_of(space, &distribution_from_weights(space, weights));
    theta
        .iter()
        .zip(rho)
        .map(|(t, r)| (t - r).abs())
        .fold(0.0, f64::max)
}

fn geometric_fixed_point(
    params: &NetworkParams,
    space: &ActivitySpace,
    opts: &FixedPointOptions,
) -> Result<FixedPointResult> {
    let rho = params.loads();
    let complete = space.graph().is_complete();
    let (xi, iterations, method) = if complete {
        (
            complete_graph_activity_factors(params)?,
            0,
            FixedPointMethod::ClosedForm,
        )
    } else {
        let inv = invert_throughput_with(space, params, &rho, &opts.inversion)?;
        (inv.eta, inv.iterations, inv.method.into())
    };
    let weights: Vec<f64> = xi
        .iter()
        .enumerate()
        .map(|(c, x)| x * params.sigma(c))
        .collect();
    let residual = load_residual(space, &weights, &rho);
    let stable = xi.iter().all(|&x| x < 1.0);
    let x_star = stable.then(|| {
        let n_max = match opts.truncation {
            Truncation::Fixed(n) => n,
            Truncation::Auto => auto_levels(xi.iter().copied().fold(0.0, f64::max)),
        };
        PopulationState::geometric(&xi, n_max)
    });
    Ok(FixedPointResult {
        xi,
        x_star,
        stable,
        varrho: complete.then(|| varrho(params)),
        effective_backoff: None,
        diagnostics: Diagnostics {
            iterations,
            residual,
            method,
        },
    })
}

/// Unnormalized equilibrium profile `t_m = Π_{n≤m} ν̃/ν(n)` of one class,
/// extended until the tail is negligible. Fails if the series diverges.
fn queue_profile(
    params: &NetworkParams,
    c: usize,
    effective: f64,
    truncation: Truncation,
) -> Result<Vec<f64>> {
    let Variant::QueueBased { rates } = &params.variant else {
        unreachable!("queue profile requested for a non queue-based model");
    };
    let r = &rates[c];
    if effective == 0.0 {
        let len = match truncation {
            Truncation::Fixed(n) => n + 1,
            Truncation::Auto => 2,
        };
        let mut t = vec![0.0; len];
        t[0] = 1.0;
        return Ok(t);
    }
    if r.tail == TailRule::Constant {
        let tail_rate = r.table.last().copied().unwrap_or(params.nu[c]);
        if effective >= tail_rate {
            return Err(Error::Unstable(format!(
                "class {c}: normalizing series diverges (effective back-off {effective} >= tail rate {tail_rate})"
            )));
        }
    }
    let limit = match truncation {
        Truncation::Fixed(n) => n,
        Truncation::Auto => MAX_AUTO_LEVELS,
    };
    let mut t = vec![1.0];
    let mut sum = 1.0;
    for m in 1..=limit {
        let term = t[m - 1] * effective / params.backoff_rate(c, m);
        t.push(term);
        sum += term;
        // The ratio is below one for good once past the table and ν(m) > ν̃.
        let in_tail = m >= r.table.len() && params.backoff_rate(c, m + 1) > effective;
        if truncation == Truncation::Auto && in_tail && term < AUTO_TAIL * sum {
            break;
        }
    }
    Ok(t)
}

fn queue_based_fixed_point(
    params: &NetworkParams,
    space: &ActivitySpace,
    opts: &FixedPointOptions,
) -> Result<FixedPointResult> {
    let rho = params.loads();
    let check = capacity_region_contains(space, &rho)?;
    if !check.is_interior() {
        return Err(Error::Infeasible(format!(
            "load {rho:?} is not inside the capacity region (margin {:e})",
            check.margin
        )));
    }
    // θ(w) = ρ with w_c = ν̃_c / μ_c; explicit on complete graphs.
    let inv = if space.graph().is_complete() {
        let free = 1.0 - rho.iter().sum::<f64>();
        let w: Vec<f64> = rho.iter().map(|r| r / free).collect();
        Inversion {
            residual: load_residual(space, &w, &rho),
            eta: w,
            iterations: 0,
            method: InversionMethod::ClosedForm,
        }
    } else {
        invert_weights(space, &rho, &opts.inversion)?
    };
    let effective: Vec<f64> = inv.eta.iter().zip(&params.mu).map(|(w, m)| w * m).collect();

    let mut profiles = Vec::with_capacity(space.num_classes());
    for (c, &e) in effective.iter().enumerate() {
        profiles.push(queue_profile(params, c, e, opts.truncation)?);
    }
    let width = profiles.iter().map(Vec::len).max().unwrap_or(1);
    let rows: Vec<Vec<f64>> = profiles
        .into_iter()
        .map(|mut t| {
            t.resize(width, 0.0);
            let l: f64 = t.iter().sum();
            t.iter().map(|v| v / l).collect()
        })
        .collect();
    let x_star = PopulationState::from_rows(rows)?;
    let xi: Vec<f64> = x_star.empty_fractions().iter().map(|x0| 1.0 - x0).collect();
    Ok(FixedPointResult {
        xi,
        x_star: Some(x_star),
        stable: true,
        varrho: None,
        effective_backoff: Some(effective),
        diagnostics: Diagnostics {
            iterations: inv.iterations,
            residual: inv.residual,
            method: inv.method.into(),
        },
    })
}

/// Returns `(x_0, x_K)` of the truncated geometric law with ratio `xi` on
/// levels `0..=k`, computed without overflow for large ratios.
pub(crate) fn truncated_geometric_ends(xi: f64, k: usize) -> (f64, f64) {
    if xi <= 1.0 {
        let s: f64 = (0..=k).map(|n| xi.powi(n as i32)).sum();
        (1.0 / s, xi.powi(k as i32) / s)
    } else {
        let y = 1.0 / xi;
        let s: f64 = (0..=k).map(|j| y.powi(j as i32)).sum();
        (y.powi(k as i32) / s, 1.0 / s)
    }
}

/// θ̃(ξ) − ρ̃(ξ) for a single class with buffer capacity `k`.
pub fn finite_buffer_balance(params: &NetworkParams, k: usize, xi: f64) -> (f64, f64) {
    let s = params.sigma(0);
    let (x0, xk) = truncated_geometric_ends(xi, k);
    let busy = s * (1.0 - x0);
    let theta = busy / (1.0 + busy);
    let rho = params.load(0) * (1.0 - xk);
    (theta, rho)
}

fn finite_buffer_fixed_point(
    params: &NetworkParams,
    capacity: &[usize],
    opts: &FixedPointOptions,
) -> Result<FixedPointResult> {
    if capacity.len() != 1 {
        return Err(Error::Unsupported(
            "finite-buffer equilibria are only available for a single class".into(),
        ));
    }
    let k = capacity[0];
    let f = |xi: f64| {
        let (t, r) = finite_buffer_balance(params, k, xi);
        t - r
    };

    let (xi, iterations) = if params.lambda[0] == 0.0 {
        (0.0, 0)
    } else {
        let mut hi = 1.0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::NoConvergence {
                    iterations: 0,
                    residual: f(hi).abs(),
                });
            }
        }
        let mut lo = 0.0;
        let mut it = 0;
        while hi - lo > 1e-15 * hi.max(1.0) && it < 200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            it += 1;
        }
        let root = if f(lo).abs() < f(hi).abs() { lo } else { hi };
        (root, it)
    };

    let n_max = match opts.truncation {
        Truncation::Fixed(n) => n.max(k),
        Truncation::Auto => k,
    };
    let (x0, _) = truncated_geometric_ends(xi, k);
    let mut row = vec![0.0; n_max + 1];
    if xi <= 1.0 {
        for (n, v) in row.iter_mut().enumerate().take(k + 1) {
            *v = x0 * xi.powi(n as i32);
        }
    } else {
        let (_, xk) = truncated_geometric_ends(xi, k);
        for (n, v) in row.iter_mut().enumerate().take(k + 1) {
            *v = xk * (1.0 / xi).powi((k - n) as i32);
        }
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
    Ok(FixedPointResult {
        xi: vec![xi],
        x_star: Some(PopulationState::from_rows(vec![row])?),
        stable: true,
        varrho: None,
        effective_backoff: None,
        diagnostics: Diagnostics {
            iterations,
            residual: f(xi).abs(),
            method: FixedPointMethod::Bisection,
        },
    })
}

/// Stability of the finite-N queueing dynamics.
///
/// On complete graphs this is the explicit condition ϱ < 1; elsewhere it is
/// the (equivalent on complete graphs) requirement ρ ∈ int(Γ) with η(ρ) < e.
pub fn stability_condition(
    params: &NetworkParams,
    space: &ActivitySpace,
) -> Result<StabilityReport> {
    check_dims(params, space)?;
    if let Variant::FiniteBuffer { .. } = params.variant {
        return Ok(StabilityReport {
            varrho: None,
            stable: true,
            xi_feasible: true,
        });
    }
    let complete = space.graph().is_complete()
        && matches!(params.variant, Variant::Base | Variant::MultiRate { .. });
    if complete {
        let v = varrho(params);
        return Ok(StabilityReport {
            varrho: Some(v),
            stable: v < 1.0,
            xi_feasible: v < 1.0,
        });
    }
    let feasible = match fixed_point(params, space) {
        Ok(fp) => fp.stable,
        Err(Error::Infeasible(_)) | Err(Error::Unstable(_)) => false,
        Err(e) => return Err(e),
    };
    Ok(StabilityReport {
        varrho: None,
        stable: feasible,
        xi_feasible: feasible,
    })
}
