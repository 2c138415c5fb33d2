//! Saturated-network activity distribution and the throughput map.
//!
//! In the saturated network every class always competes and backs off at rate
//! `η_c ν_c`. Its activity process has the product-form stationary law
//! `π(ω; η) ∝ Π_c (η_c σ_c)^{ω_c}`. Most routines here work directly with the
//! per-class weights `w_c = η_c σ_c`, which is also what the model variants
//! need (they only change how the weights are formed).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{capacity_region_contains, ActivitySpace, RegionMembership};
use crate::params::NetworkParams;

/// Weights above this switch normalization to the log domain.
const LOG_DOMAIN_THRESHOLD: f64 = 1e8;

/// Back-off factors η, one per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BackoffFactors(pub Vec<f64>);

impl BackoffFactors {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if let Some((c, v)) = eta
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "back-off factor {c} = {v} must be finite and >= 0"
            )));
        }
        Ok(Self(eta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Stationary probabilities over an [`ActivitySpace`], in its state order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityDistribution {
    probs: Vec<f64>,
    log_partition: f64,
}

impl ActivityDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// ln Z of the unnormalized weights.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn partition(&self) -> f64 {
        self.log_partition.exp()
    }

    pub fn mass(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.probs[i]).sum()
    }

    /// π(Ω₋c): probability that class `c` may back off.
    pub fn backoff_probability(&self, space: &ActivitySpace, c: usize) -> f64 {
        self.mass(space.omega_minus(c))
    }

    /// π(Ω₊c): probability that class `c` is transmitting.
    pub fn active_probability(&self, space: &ActivitySpace, c: usize) -> f64 {
        self.mass(space.omega_plus(c))
    }
}

/// Product-form distribution for arbitrary nonnegative per-class weights.
pub fn distribution_from_weights(space: &ActivitySpace, weights: &[f64]) -> ActivityDistribution {
    debug_assert_eq!(weights.len(), space.num_classes());
    let use_log = weights.iter().any(|&w| w > LOG_DOMAIN_THRESHOLD);
    if use_log {
        let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let lw: Vec<f64> = space
            .states()
            .iter()
            .map(|s| s.active_classes().map(|c| logs[c]).sum())
            .collect();
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = lw.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = unnorm.iter().sum();
        ActivityDistribution {
            probs: unnorm.iter().map(|u| u / sum).collect(),
            log_partition: max + sum.ln(),
        }
    } else {
        let unnorm: Vec<f64> = space
            .states()
            .iter()
            .map(|s| s.active_classes().map(|c| weights[c]).product())
            .collect();
        let z: f64 = unnorm.iter().sum();
        ActivityDistribution {
            probs: unnorm.iter().map(|u| u / z).collect(),
            log_partition: z.ln(),
        }
    }
}

fn check_eta(space: &ActivitySpace, params: &NetworkParams, eta: &[f64]) -> Result<()> {
    let c = space.num_classes();
    if eta.len() != c {
        return Err(Error::DimensionMismatch {
            what: "back-off factors",
            expected: c,
            got: eta.len(),
        });
    }
    if params.num_classes() != c {
        return Err(Error::DimensionMismatch {
            what: "network parameters",
            expected: c,
            got: params.num_classes(),
        });
    }
    BackoffFactors::new(eta.to_vec())?;
    if let Some(i) = params.mu.iter().position(|m| m.is_nan() || *m <= 0.0) {
        return Err(Error::InvalidParameter(format!("mu[{i}] must be > 0")));
    }
    Ok(())
}

fn weights(params: &NetworkParams, eta: &[f64]) -> Vec<f64> {
    eta.iter()
        .enumerate()
        .map(|(c, e)| e * params.sigma(c))
        .collect()
}

/// π(·; η) with σ_c taken from `params`.
pub fn product_form_distribution(
    space: &ActivitySpace,
    params: &NetworkParams,
    eta: &[f64],
) -> Result<ActivityDistribution> {
    check_eta(space, params, eta)?;
    Ok(distribution_from_weights(space, &weights(params, eta)))
}

/// Throughput map θ_c(η) = π(Ω₊c; η).
pub fn throughput(space: &ActivitySpace, params: &NetworkParams, eta: &[f64]) -> Result<Vec<f64>> {
    let dist = product_form_distribution(space, params, eta)?;
    Ok(throughput_of(space, &dist))
}

pub fn throughput_of(space: &ActivitySpace, dist: &ActivityDistribution) -> Vec<f64> {
    (0..space.num_classes())
        .map(|c| dist.active_probability(space, c))
        .collect()
}

/// Largest violation of π(Ω₊c) = w_c π(Ω₋c) over all classes.
pub fn detailed_balance_gap(space: &ActivitySpace, weights: &[f64]) -> f64 {
    let dist = distribution_from_weights(space, weights);
    (0..space.num_classes())
        .map(|c| {
            (dist.active_probability(space, c) - weights[c] * dist.backoff_probability(space, c))
                .abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionOptions {
    pub damping: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Polish with Newton's method on the convex dual if the damped iteration
    /// has not met the tolerance within `max_iterations`.
    pub newton_fallback: bool,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iterations: 100_000,
            tolerance: 1e-13,
            newton_fallback: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionMethod {
    FixedPoint,
    Newton,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inversion {
    pub eta: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub method: InversionMethod,
}

/// Solves θ(η) = γ for η, given γ strictly inside the capacity region.
pub fn invert_throughput(
    space: &ActivitySpace,
    params: &NetworkParams,
    gamma: &[f64],
) -> Result<Inversion> {
    invert_throughput_with(space, params, gamma, &InversionOptions::default())
}

pub fn invert_throughput_with(
    space: &ActivitySpace,
    params: &NetworkParams,
    gamma: &[f64],
    opts: &InversionOptions,
) -> Result<Inversion> {
    check_eta(space, params, &vec![0.0; gamma.len()])?;
    let sig = params.sigmas();
    let start: Vec<f64> = gamma.iter().zip(&sig).map(|(g, s)| g * s).collect();
    let inv = invert_weights_from(space, gamma, start, opts)?;
    Ok(Inversion {
        eta: inv.eta.iter().zip(&sig).map(|(w, s)| w / s).collect(),
        ..inv
    })
}

/// Solves θ(w) = γ in the weight parametrization (σ ≡ 1); the `eta` field of
/// the result holds the weights. Starts from w = γ.
pub fn invert_weights(
    space: &ActivitySpace,
    gamma: &[f64],
    opts: &InversionOptions,
) -> Result<Inversion> {
    invert_weights_from(space, gamma, gamma.to_vec(), opts)
}

fn invert_weights_from(
    space: &ActivitySpace,
    gamma: &[f64],
    start: Vec<f64>,
    opts: &InversionOptions,
) -> Result<Inversion> {
    let check = capacity_region_contains(space, gamma)?;
    match check.membership {
        RegionMembership::InsideInterior => {}
        other => {
            return Err(Error::Infeasible(format!(
                "target {gamma:?} is {} of the capacity region (margin {:e})",
                match other {
                    RegionMembership::Boundary => "on the boundary",
                    _ => "outside",
                },
                check.margin
            )))
        }
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping {} must lie in (0, 1]",
            opts.damping
        )));
    }

    let residual_of = |w: &[f64]| -> (f64, ActivityDistribution) {
        let dist = distribution_from_weights(space, w);
        let r = (0..space.num_classes())
            .map(|c| (dist.active_probability(space, c) - gamma[c]).abs())
            .fold(0.0, f64::max);
        (r, dist)
    };

    let mut w = start;
    let mut last_good = w.clone();
    let mut iterations = 0;
    let (mut residual, mut dist) = residual_of(&w);
    while residual > opts.tolerance && iterations < opts.max_iterations {
        let d = opts.damping;
        let next: Vec<f64> = (0..space.num_classes())
            .map(|c| {
                let target = gamma[c] / dist.backoff_probability(space, c);
                (1.0 - d) * w[c] + d * target
            })
            .collect();
        iterations += 1;
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        w = next;
        (residual, dist) = residual_of(&w);
        if residual.is_finite() {
            last_good.clone_from(&w);
        }
    }
    if residual <= opts.tolerance {
        return Ok(Inversion {
            eta: w,
            residual,
            iterations,
            method: InversionMethod::FixedPoint,
        });
    }
    if opts.newton_fallback {
        let (w, it, res) = newton(space, gamma, last_good, opts.tolerance)?;
        return Ok(Inversion {
            eta: w,
            residual: res,
            iterations: iterations + it,
            method: InversionMethod::Newton,
        });
    }
    Err(Error::NoConvergence {
        iterations,
        residual,
    })
}

/// Newton's method on f(r) = ln Z(e^r) − γ·r, whose gradient is θ − γ and
/// whose Hessian is the covariance matrix of ω under π. Classes with a zero
/// target are pinned at weight zero.
fn newton(
    space: &ActivitySpace,
    gamma: &[f64],
    start: Vec<f64>,
    tol: f64,
) -> Result<(Vec<f64>, usize, f64)> {
    let free: Vec<usize> = (0..gamma.len()).filter(|&c| gamma[c] > 0.0).collect();
    let k = free.len();
    let mut r: Vec<f64> = free
        .iter()
        .map(|&c| {
            if start[c] > 0.0 {
                start[c].ln()
            } else {
                gamma[c].ln()
            }
        })
        .collect();
    let to_weights = |r: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; gamma.len()];
        for (i, &c) in free.iter().enumerate() {
            w[c] = r[i].exp();
        }
        w
    };
    let objective = |r: &[f64]| -> f64 {
        let dist = distribution_from_weights(space, &to_weights(r));
        dist.log_partition()
            - free
                .iter()
                .zip(r)
                .map(|(&c, ri)| gamma[c] * ri)
                .sum::<f64>()
    };

    let max_iter = 200;
    for it in 0..max_iter {
        let w = to_weights(&r);
        let dist = distribution_from_weights(space, &w);
        let theta = throughput_of(space, &dist);
        let residual = (0..gamma.len())
            .map(|c| (theta[c] - gamma[c]).abs())
            .fold(0.0, f64::max);
        if residual <= tol {
            return Ok((w, it, residual));
        }
        let grad: Vec<f64> = free.iter().map(|&c| theta[c] - gamma[c]).collect();
        let mut hess = vec![vec![0.0; k]; k];
        for (s, p) in space.states().iter().zip(dist.probs()) {
            for (i, &ci) in free.iter().enumerate() {
                if !s.is_active(ci) {
                    continue;
                }
                for (j, &cj) in free.iter().enumerate() {
                    if s.is_active(cj) {
                        hess[i][j] += p;
                    }
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                hess[i][j] -= theta[free[i]] * theta[free[j]];
            }
        }
        let step =
            solve_dense(hess, grad.iter().map(|g| -g).collect()).ok_or(Error::NoConvergence {
                iterations: it,
                residual,
            })?;
        let f0 = objective(&r);
        let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = r.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            if objective(&trial) <= f0 + 1e-4 * t * slope || t < 1e-12 {
                r = trial;
                break;
            }
            t *= 0.5;
        }
    }
    let w = to_weights(&r);
    let theta = throughput_of(space, &distribution_from_weights(space, &w));
    let residual = (0..gamma.len())
        .map(|c| (theta[c] - gamma[c]).abs())
        .fold(0.0, f64::max);
    if residual <= tol {
        Ok((w, max_iter, residual))
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual,
        })
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}
