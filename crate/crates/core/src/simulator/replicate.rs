use rayon::prelude::*;
use serde::Serialize;

use super::{run, SimConfig, SimStats};
use crate::error::{Error, Result};
use crate::population::PopulationState;

/// Seed of replica `i`: the base seed offset by the replica index.
pub fn replica_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// Across-replica mean of one per-run statistic, with its standard error
/// (absent for a single run).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pooled {
    pub mean: f64,
    pub std_error: Option<f64>,
}

impl Pooled {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_error = (values.len() > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Self { mean, std_error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledClass {
    /// Runs without waiting samples for this class are left out.
    pub mean_wait: Option<Pooled>,
    /// (λ_c/N_c) times the mean wait.
    pub scaled_wait: Option<Pooled>,
    pub mean_sojourn: Option<Pooled>,
    pub activity_fraction: Pooled,
    pub mean_in_system: Pooled,
    pub accepted_rate: Pooled,
    pub dropped: Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledSummary {
    pub runs: usize,
    pub classes: Vec<PooledClass>,
    /// Entrywise mean of the per-run empirical population distributions.
    pub population: PopulationState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub runs: Vec<SimStats>,
    pub pooled: PooledSummary,
}

fn pooled_opt(values: Vec<Option<f64>>) -> Option<Pooled> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    (!v.is_empty()).then(|| Pooled::of(&v))
}

pub fn pool(runs: &[SimStats], lambda: &[f64]) -> PooledSummary {
    let c_count = runs[0].num_classes();
    let classes = (0..c_count)
        .map(|c| {
            let n_c = runs[0].node_counts[c] as f64;
            let waits: Vec<Option<f64>> = runs
                .iter()
                .map(|r| r.mean_wait(c).map(|e| e.mean))
                .collect();
            PooledClass {
                scaled_wait: pooled_opt(
                    waits
                        .iter()
                        .map(|w| w.map(|w| lambda[c] / n_c * w))
                        .collect(),
                ),
                mean_wait: pooled_opt(waits),
                mean_sojourn: pooled_opt(
                    runs.iter()
                        .map(|r| r.mean_sojourn(c).map(|e| e.mean))
                        .collect(),
                ),
                activity_fraction: Pooled::of(
                    &runs
                        .iter()
                        .map(|r| r.activity_fraction[c])
                        .collect::<Vec<_>>(),
                ),
                mean_in_system: Pooled::of(
                    &runs.iter().map(|r| r.mean_in_system[c]).collect::<Vec<_>>(),
                ),
                accepted_rate: Pooled::of(
                    &runs.iter().map(|r| r.accepted_rate[c]).collect::<Vec<_>>(),
                ),
                dropped: Pooled::of(
                    &runs
                        .iter()
                        .map(|r| r.events.dropped[c] as f64)
                        .collect::<Vec<_>>(),
                ),
            }
        })
        .collect();
    let n = runs.len() as f64;
    let first = &runs[0].population;
    let rows = (0..c_count)
        .map(|c| {
            (0..=first.n_max())
                .map(|l| runs.iter().map(|r| r.population.get(c, l)).sum::<f64>() / n)
                .collect()
        })
        .collect();
    PooledSummary {
        runs: runs.len(),
        classes,
        population: PopulationState::from_rows(rows).expect("runs share one shape"),
    }
}

/// Runs `runs` independent replicas with seeds `seed, seed + 1, …` in
/// parallel. Results are ordered by replica index, so they do not depend on
/// scheduling.
pub fn replicate(config: &SimConfig, runs: usize) -> Result<Replication> {
    if runs == 0 {
        return Err(Error::InvalidParameter(
            "at least one replica is required".into(),
        ));
    }
    let stats: Vec<SimStats> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.clone();
            cfg.seed = replica_seed(config.seed, i);
            run(&cfg)
        })
        .collect::<Result<_>>()?;
    let pooled = pool(&stats, &config.params.lambda);
    Ok(Replication {
        runs: stats,
        pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_feasible_states, InterferenceGraph};
    use crate::params::NetworkParams;

    fn config() -> SimConfig {
        let space = enumerate_feasible_states(&InterferenceGraph::complete(2).unwrap()).unwrap();
        let params =
            NetworkParams::uniform(vec![0.1, 0.15], vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        SimConfig::new(params, space, 4, 11, 5_000.0)
    }

    #[test]
    fn single_replica_pools_to_itself() {
        let cfg = config();
        let rep = replicate(&cfg, 1).unwrap();
        let single = run(&cfg).unwrap();
        assert_eq!(rep.runs[0], single);
        assert_eq!(rep.pooled.population, single.population);
        let w = rep.pooled.classes[0].mean_wait.unwrap();
        assert_eq!(w.mean, single.mean_wait(0).unwrap().mean);
        assert!(w.std_error.is_none());
    }

    #[test]
    fn replicas_use_consecutive_seeds() {
        let cfg = config();
        let rep = replicate(&cfg, 3).unwrap();
        for (i, r) in rep.runs.iter().enumerate() {
            assert_eq!(r.seed, 11 + i as u64);
        }
        assert_eq!(rep, replicate(&cfg, 3).unwrap());
        assert!(replicate(&cfg, 0).is_err());
    }
}
