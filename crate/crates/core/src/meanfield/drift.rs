//! The mean-field drift H(x).

use crate::error::{Error, Result};
use crate::graph::ActivitySpace;
use crate::params::{NetworkParams, Variant};
use crate::population::{PopulationState, E1_TOLERANCE};
use crate::stationary::distribution_from_weights;

/// Per-class weights of the instantaneous activity measure induced by `x`.
///
/// Base and finite-buffer models use `σ_c (1 − x_{c,0})`, the multi-rate
/// model the same with σ_c = ν_c U_c, and the queue-based model
/// `Σ_n ν_c(n) x_{c,n} / μ_c`.
pub fn activity_weights(x: &PopulationState, params: &NetworkParams) -> Vec<f64> {
    (0..params.num_classes())
        .map(|c| match &params.variant {
            Variant::QueueBased { .. } => {
                let row = x.row(c);
                let effective: f64 = row
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(n, v)| params.backoff_rate(c, n) * v)
                    .sum();
                effective / params.mu[c]
            }
            _ => params.sigma(c) * (1.0 - x.get(c, 0)).max(0.0),
        })
        .collect()
}

/// π_x(Ω₋c) for every class.
pub fn backoff_availability(
    x: &PopulationState,
    params: &NetworkParams,
    space: &ActivitySpace,
) -> Vec<f64> {
    let dist = distribution_from_weights(space, &activity_weights(x, params));
    (0..space.num_classes())
        .map(|c| dist.backoff_probability(space, c))
        .collect()
}

fn check_shapes(x: &PopulationState, params: &NetworkParams, space: &ActivitySpace) -> Result<()> {
    let c = space.num_classes();
    if params.num_classes() != c {
        return Err(Error::DimensionMismatch {
            what: "network parameters",
            expected: c,
            got: params.num_classes(),
        });
    }
    if x.num_classes() != c {
        return Err(Error::DimensionMismatch {
            what: "population classes",
            expected: c,
            got: x.num_classes(),
        });
    }
    if let Variant::FiniteBuffer { capacity } = &params.variant {
        if let Some((cl, k)) = capacity.iter().enumerate().find(|(_, &k)| k > x.n_max()) {
            return Err(Error::InvalidState(format!(
                "buffer capacity {k} of class {cl} exceeds truncation level {}",
                x.n_max()
            )));
        }
    }
    Ok(())
}

/// H(x) as a matrix shaped like `x`. Fails if `x` is not in E¹.
pub fn drift(
    x: &PopulationState,
    params: &NetworkParams,
    space: &ActivitySpace,
) -> Result<Vec<Vec<f64>>> {
    check_shapes(x, params, space)?;
    x.check_e1(E1_TOLERANCE)?;
    Ok(drift_unchecked(x, params, space))
}

/// H(x) without validation; used inside the integrator's stages.
///
/// Level `n_max` (or `K_c` for finite buffers) receives arrivals but emits
/// none, so each row of the result sums to zero.
pub(crate) fn drift_unchecked(
    x: &PopulationState,
    params: &NetworkParams,
    space: &ActivitySpace,
) -> Vec<Vec<f64>> {
    let avail = backoff_availability(x, params, space);
    let n_max = x.n_max();
    (0..x.num_classes())
        .map(|c| {
            let row = x.row(c);
            let top = params.buffer_capacity(c).unwrap_or(n_max).min(n_max);
            let lambda = params.lambda[c];
            let scale = 1.0 / params.proportions[c];
            let mut out = vec![0.0; n_max + 1];
            for n in 0..=top {
                // Flow up by arrivals, flow down by completed back-offs.
                let up_in = if n > 0 { lambda * row[n - 1] } else { 0.0 };
                let up_out = if n < top { lambda * row[n] } else { 0.0 };
                let down_in = if n < top {
                    avail[c] * params.backoff_rate(c, n + 1) * row[n + 1]
                } else {
                    0.0
                };
                let down_out = avail[c] * params.backoff_rate(c, n) * row[n];
                out[n] = scale * (up_in - up_out + down_in - down_out);
            }
            out
        })
        .collect()
}

pub fn sup_norm(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}
