//! Fixed-step RK4 integration of dx/dt = H(x).

use serde::{Deserialize, Serialize};

use super::drift::{drift_unchecked, sup_norm};
use crate::error::{Error, Result};
use crate::graph::ActivitySpace;
use crate::params::NetworkParams;
use crate::population::{PopulationState, E1_TOLERANCE};

/// Entries below this after a step are reported as a step-size failure.
const NEGATIVITY_LIMIT: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationOptions {
    /// Final time T in fluid time units.
    pub horizon: f64,
    /// Step size h.
    pub step: f64,
    /// Store every `store_every`-th step (the initial and final states are
    /// always stored).
    pub store_every: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            horizon: 200.0,
            step: 0.01,
            store_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PopulationState>,
    /// Sup-norm of H at each stored state.
    pub drift_norms: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &PopulationState {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn axpy(x: &PopulationState, k: &[Vec<f64>], a: f64) -> PopulationState {
    let rows = x
        .rows()
        .iter()
        .zip(k)
        .map(|(r, kr)| r.iter().zip(kr).map(|(v, d)| v + a * d).collect())
        .collect();
    PopulationState::from_rows(rows).expect("shape preserved")
}

/// One classical RK4 step followed by clamping of round-off negatives and row
/// renormalization.
pub fn rk4_step(
    x: &PopulationState,
    params: &NetworkParams,
    space: &ActivitySpace,
    h: f64,
) -> PopulationState {
    let k1 = drift_unchecked(x, params, space);
    let k2 = drift_unchecked(&axpy(x, &k1, h / 2.0), params, space);
    let k3 = drift_unchecked(&axpy(x, &k2, h / 2.0), params, space);
    let k4 = drift_unchecked(&axpy(x, &k3, h), params, space);
    let rows = x
        .rows()
        .iter()
        .enumerate()
        .map(|(c, r)| {
            r.iter()
                .enumerate()
                .map(|(n, v)| v + h / 6.0 * (k1[c][n] + 2.0 * k2[c][n] + 2.0 * k3[c][n] + k4[c][n]))
                .collect()
        })
        .collect();
    PopulationState::from_rows(rows).expect("shape preserved")
}

/// Integrates the mean-field initial-value problem from `x0` up to
/// `opts.horizon`.
pub fn integrate(
    x0: &PopulationState,
    params: &NetworkParams,
    space: &ActivitySpace,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step {} must be > 0",
            opts.step
        )));
    }
    if !(opts.horizon >= 0.0 && opts.horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon {} must be >= 0",
            opts.horizon
        )));
    }
    if opts.store_every == 0 {
        return Err(Error::InvalidParameter("store_every must be >= 1".into()));
    }
    // Validates shapes and E¹ membership.
    let h0 = super::drift::drift(x0, params, space)?;

    let steps = (opts.horizon / opts.step).round() as usize;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        drift_norms: vec![sup_norm(&h0)],
    };
    let mut x = x0.clone();
    for i in 1..=steps {
        let mut next = rk4_step(&x, params, space, opts.step);
        let t = i as f64 * opts.step;
        for (c, row) in next.rows_mut().iter_mut().enumerate() {
            for (n, v) in row.iter_mut().enumerate() {
                if *v < NEGATIVITY_LIMIT || !v.is_finite() {
                    return Err(Error::StepTooLarge {
                        class: c,
                        level: n,
                        value: *v,
                        time: t,
                    });
                }
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        next.renormalize();
        debug_assert!(next.check_e1(E1_TOLERANCE).is_ok());
        x = next;
        if i % opts.store_every == 0 || i == steps {
            traj.times.push(t);
            traj.drift_norms
                .push(sup_norm(&drift_unchecked(&x, params, space)));
            traj.states.push(x.clone());
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_feasible_states, InterferenceGraph};

    #[test]
    fn zero_arrivals_drain_to_level_zero() {
        let space = enumerate_feasible_states(&InterferenceGraph::complete(2).unwrap()).unwrap();
        let params =
            NetworkParams::uniform(vec![0.0, 0.0], vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let x0 =
            PopulationState::from_rows(vec![vec![0.2, 0.3, 0.5, 0.0], vec![0.0, 0.0, 0.0, 1.0]])
                .unwrap();
        let traj = integrate(
            &x0,
            &params,
            &space,
            &IntegrationOptions {
                horizon: 200.0,
                step: 0.05,
                store_every: 100,
            },
        )
        .unwrap();
        let last = traj.last();
        assert!(last.get(0, 0) > 1.0 - 1e-9 && last.get(1, 0) > 1.0 - 1e-9);
        for s in &traj.states {
            s.check_e1(1e-12).unwrap();
        }
    }

    #[test]
    fn rejects_bad_options() {
        let space = enumerate_feasible_states(&InterferenceGraph::complete(1).unwrap()).unwrap();
        let params = NetworkParams::uniform(vec![0.2], vec![1.0], vec![1.0]).unwrap();
        let x0 = PopulationState::empty(1, 5);
        let bad = IntegrationOptions {
            step: 0.0,
            ..Default::default()
        };
        assert!(integrate(&x0, &params, &space, &bad).is_err());
        let bad = IntegrationOptions {
            store_every: 0,
            ..Default::default()
        };
        assert!(integrate(&x0, &params, &space, &bad).is_err());
    }

    #[test]
    fn huge_step_is_reported() {
        let space = enumerate_feasible_states(&InterferenceGraph::complete(1).unwrap()).unwrap();
        let params = NetworkParams::uniform(vec![5.0], vec![50.0], vec![100.0]).unwrap();
        let x0 = PopulationState::empty(1, 5);
        let opts = IntegrationOptions {
            horizon: 10.0,
            step: 2.0,
            store_every: 1,
        };
        assert!(matches!(
            integrate(&x0, &params, &space, &opts),
            Err(Error::StepTooLarge { .. })
        ));
    }
}
