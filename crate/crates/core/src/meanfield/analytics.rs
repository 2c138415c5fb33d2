//! Mass dynamics and stochastic ordering of population states.

use crate::error::{Error, Result};
use crate::graph::ActivitySpace;
use crate::params::{NetworkParams, Variant};
use crate::population::{PopulationState, E1_TOLERANCE};

/// Default slack on partial-sum comparisons.
pub const DOMINANCE_TOLERANCE: f64 = 1e-12;

/// Mean buffer level per class, m_c = Σ n x_{c,n}.
pub fn mass(x: &PopulationState) -> Vec<f64> {
    x.rows()
        .iter()
        .map(|r| r.iter().enumerate().map(|(n, v)| n as f64 * v).sum())
        .collect()
}

/// dm_c/dt = (1/p_c)(λ_c − ν_c (1 − x_{c,0}) π^b) on a complete graph, with
/// π^b = 1 / (1 + Σ_d σ_d (1 − x_{d,0})).
pub fn mass_drift(
    x: &PopulationState,
    params: &NetworkParams,
    space: &ActivitySpace,
) -> Result<Vec<f64>> {
    if !space.graph().is_complete() {
        return Err(Error::Unsupported(
            "the mass derivative formula holds on complete interference graphs only".into(),
        ));
    }
    if !matches!(params.variant, Variant::Base | Variant::MultiRate { .. }) {
        return Err(Error::Unsupported(
            "the mass derivative formula covers the base and multi-rate models".into(),
        ));
    }
    if x.num_classes() != params.num_classes() {
        return Err(Error::DimensionMismatch {
            what: "population classes",
            expected: params.num_classes(),
            got: x.num_classes(),
        });
    }
    x.check_e1(E1_TOLERANCE)?;
    let busy: Vec<f64> = x.empty_fractions().iter().map(|x0| 1.0 - x0).collect();
    let pib = 1.0
        / (1.0
            + busy
                .iter()
                .enumerate()
                .map(|(d, b)| params.sigma(d) * b)
                .sum::<f64>());
    Ok((0..params.num_classes())
        .map(|c| (params.lambda[c] - params.nu[c] * busy[c] * pib) / params.proportions[c])
        .collect())
}

/// `xl ≤_s xu`: every partial sum of `xl` is at least the matching one of
/// `xu`, up to [`DOMINANCE_TOLERANCE`].
pub fn stochastically_dominated(xl: &PopulationState, xu: &PopulationState) -> Result<bool> {
    stochastically_dominated_within(xl, xu, DOMINANCE_TOLERANCE)
}

pub fn stochastically_dominated_within(
    xl: &PopulationState,
    xu: &PopulationState,
    tol: f64,
) -> Result<bool> {
    if !xl.same_shape(xu) {
        return Err(Error::DimensionMismatch {
            what: "population shape",
            expected: xl.num_classes() * (xl.n_max() + 1),
            got: xu.num_classes() * (xu.n_max() + 1),
        });
    }
    Ok(dominance_gap(xl, xu) <= tol)
}

/// Largest violation max_{c,m} (Σ_{n≤m} xu − Σ_{n≤m} xl); nonpositive iff
/// `xl ≤_s xu` exactly.
pub fn dominance_gap(xl: &PopulationState, xu: &PopulationState) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (rl, ru) in xl.rows().iter().zip(xu.rows()) {
        let (mut sl, mut su) = (0.0, 0.0);
        for (a, b) in rl.iter().zip(ru) {
            sl += a;
            su += b;
            worst = worst.max(su - sl);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_feasible_states, InterferenceGraph};
    use crate::meanfield::fixed_point::fixed_point;

    #[test]
    fn mass_of_simple_states() {
        assert_eq!(mass(&PopulationState::empty(2, 4)), vec![0.0, 0.0]);
        let x = PopulationState::from_rows(vec![vec![0.5, 0.0, 0.0, 0.5]]).unwrap();
        assert_eq!(mass(&x), vec![1.5]);
    }

    #[test]
    fn mass_drift_vanishes_at_equilibrium_empty_fractions() {
        let space = enumerate_feasible_states(&InterferenceGraph::complete(2).unwrap()).unwrap();
        let params = NetworkParams::new(
            vec![0.1, 0.2],
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            vec![0.3, 0.7],
        )
        .unwrap();
        let fp = fixed_point(&params, &space).unwrap();
        // Any state sharing x₀ with x* has zero mass drift.
        let rows = fp
            .xi
            .iter()
            .map(|xi| vec![1.0 - xi, 0.0, 0.0, *xi])
            .collect();
        let x = PopulationState::from_rows(rows).unwrap();
        for v in mass_drift(&x, &params, &space).unwrap() {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn mass_drift_refuses_general_graphs() {
        let space = enumerate_feasible_states(&InterferenceGraph::square()).unwrap();
        let params = NetworkParams::uniform(vec![0.1; 4], vec![1.0; 4], vec![1.0; 4]).unwrap();
        let x = PopulationState::empty(4, 3);
        assert!(matches!(
            mass_drift(&x, &params, &space),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn dominance_basics() {
        let x = PopulationState::from_rows(vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.0, 0.4]]).unwrap();
        let e = PopulationState::empty(2, 2);
        assert!(stochastically_dominated(&x, &x).unwrap());
        assert!(stochastically_dominated(&e, &x).unwrap());
        assert!(!stochastically_dominated(&x, &e).unwrap());
        assert!(stochastically_dominated(&e, &PopulationState::empty(2, 3)).is_err());
    }
}
