//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [graph]
//! classes = 4
//! edges = [[0, 1], [0, 2], [1, 3], [2, 3]]   # or: topology = "complete"
//!
//! [params]
//! lambda = [0.4, 0.2, 0.3, 0.4]
//! nu = [4.0, 3.0, 3.0, 5.0]
//! mu = [1.0, 1.0, 1.0, 1.0]
//! proportions = [0.25, 0.25, 0.25, 0.25]     # optional, uniform by default
//!
//! [meanfield]                                # optional
//! n_max = 64                                 # or "auto"
//! step = 0.01
//! horizon = 200.0
//! store_every = 100
//! initial = "empty"                          # or "fixed_point"
//!
//! [sim]                                      # needed by simulate / compare
//! nodes = [4, 8, 16]                         # one count or a ladder
//! seed = 1
//! t_end = 1e5
//! replicas = 8
//!
//! [output]
//! directory = "out"
//! formats = ["json", "csv"]
//! ```
//!
//! Unknown keys are rejected everywhere. Classes are numbered from 0.

use std::path::{Path, PathBuf};

use csma_core::graph::{enumerate_feasible_states, ActivitySpace, InterferenceGraph};
use csma_core::meanfield::{FixedPointOptions, IntegrationOptions, Truncation};
use csma_core::params::{NetworkParams, Variant};
use csma_core::simulator::{node_counts, BurnIn, SimConfig, DEFAULT_MAX_EVENTS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Edges listed explicitly.
    #[default]
    Custom,
    Complete,
    Edgeless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub classes: usize,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
    /// Required except for the multi-rate variant, where it follows from the
    /// service modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proportions: Option<Vec<f64>>,
    #[serde(default)]
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    Levels(usize),
    Named(String),
}

impl Default for LevelSpec {
    fn default() -> Self {
        LevelSpec::Levels(64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Empty,
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldSpec {
    #[serde(default)]
    pub n_max: LevelSpec,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_store_every")]
    pub store_every: usize,
    #[serde(default)]
    pub initial: InitialState,
}

fn default_step() -> f64 {
    0.01
}
fn default_horizon() -> f64 {
    200.0
}
fn default_store_every() -> usize {
    100
}

impl Default for MeanfieldSpec {
    fn default() -> Self {
        Self {
            n_max: LevelSpec::default(),
            step: default_step(),
            horizon: default_horizon(),
            store_every: default_store_every(),
            initial: InitialState::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeSpec {
    One(usize),
    Ladder(Vec<usize>),
}

impl NodeSpec {
    pub fn counts(&self) -> Vec<usize> {
        match self {
            NodeSpec::One(n) => vec![*n],
            NodeSpec::Ladder(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub nodes: NodeSpec,
    pub seed: u64,
    pub t_end: f64,
    #[serde(default)]
    pub burn_in: BurnIn,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
    #[serde(default = "default_levels")]
    pub n_max: usize,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
}

fn one() -> usize {
    1
}
fn default_levels() -> usize {
    64
}
fn default_max_events() -> u64 {
    DEFAULT_MAX_EVENTS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    Nu,
    Mu,
}

/// A one-dimensional parameter sweep. Without `class`, every class takes the
/// swept value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

impl SweepSpec {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        match (&self.values, self.start, self.stop, self.steps) {
            (Some(v), None, None, None) if !v.is_empty() => Ok(v.clone()),
            (None, Some(a), Some(b), Some(n)) if n >= 1 => Ok(if n == 1 {
                vec![a]
            } else {
                (0..n)
                    .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                    .collect()
            }),
            _ => Err(CliError::Config(
                "sweep: give either `values` or all of `start`, `stop`, `steps` (>= 1)".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub params: ParamsSpec,
    #[serde(default)]
    pub meanfield: MeanfieldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

/// A configuration together with the objects derived from it.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub space: ActivitySpace,
    pub params: NetworkParams,
}

fn field(path: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {e}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON rendering of the configuration.
    pub fn hash(&self) -> String {
        let canonical = crate::output::canonical_json(self);
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn graph(&self) -> Result<InterferenceGraph, CliError> {
        let g = &self.graph;
        let built = match g.topology {
            Topology::Complete | Topology::Edgeless if !g.edges.is_empty() => {
                return Err(CliError::Config(
                    "graph.edges: not allowed together with a named topology".into(),
                ))
            }
            Topology::Complete => InterferenceGraph::complete(g.classes),
            Topology::Edgeless => InterferenceGraph::edgeless(g.classes),
            Topology::Custom => {
                let edges: Vec<(usize, usize)> = g.edges.iter().map(|e| (e[0], e[1])).collect();
                InterferenceGraph::new(g.classes, &edges)
            }
        };
        built.map_err(|e| field("graph", e))
    }

    pub fn network_params(&self) -> Result<NetworkParams, CliError> {
        let p = &self.params;
        let c = self.graph.classes;
        let lengths = [
            ("params.lambda", Some(p.lambda.len())),
            ("params.nu", Some(p.nu.len())),
            ("params.mu", p.mu.as_ref().map(Vec::len)),
            ("params.proportions", p.proportions.as_ref().map(Vec::len)),
        ];
        for (name, len) in lengths {
            if let Some(len) = len.filter(|&l| l != c) {
                return Err(field(
                    name,
                    format!("expected {c} entries (graph.classes), got {len}"),
                ));
            }
        }
        let proportions = p
            .proportions
            .clone()
            .unwrap_or_else(|| vec![1.0 / c.max(1) as f64; c]);
        let mu = match (&p.mu, &p.variant) {
            (Some(mu), _) => mu.clone(),
            (None, Variant::MultiRate { .. }) => vec![1.0; c],
            (None, _) => return Err(field("params.mu", "missing")),
        };
        let params = NetworkParams {
            lambda: p.lambda.clone(),
            nu: p.nu.clone(),
            mu,
            proportions,
            variant: Variant::Base,
        };
        let multi_rate_with_mu = matches!(p.variant, Variant::MultiRate { .. }) && p.mu.is_some();
        let built = params
            .with_variant(p.variant.clone())
            .map_err(|e| field("params", e))?;
        if multi_rate_with_mu && p.mu.as_ref() != Some(&built.mu) {
            return Err(field(
                "params.mu",
                "must equal 1 / mean service time for the multi-rate variant (or be omitted)",
            ));
        }
        Ok(built)
    }

    pub fn truncation(&self) -> Result<Truncation, CliError> {
        match &self.meanfield.n_max {
            LevelSpec::Levels(0) => Err(field("meanfield.n_max", "must be >= 1")),
            LevelSpec::Levels(n) => Ok(Truncation::Fixed(*n)),
            LevelSpec::Named(s) if s == "auto" => Ok(Truncation::Auto),
            LevelSpec::Named(s) => Err(field(
                "meanfield.n_max",
                format!("expected an integer or \"auto\", got {s:?}"),
            )),
        }
    }

    pub fn fixed_point_options(&self) -> Result<FixedPointOptions, CliError> {
        Ok(FixedPointOptions {
            truncation: self.truncation()?,
            ..Default::default()
        })
    }

    pub fn integration_options(&self) -> IntegrationOptions {
        IntegrationOptions {
            horizon: self.meanfield.horizon,
            step: self.meanfield.step,
            store_every: self.meanfield.store_every,
        }
    }

    pub fn sim(&self) -> Result<&SimSpec, CliError> {
        self.sim
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [sim] block".into()))
    }

    /// Builds and checks everything the configuration describes.
    pub fn validate(self) -> Result<Experiment, CliError> {
        let graph = self.graph()?;
        let space = enumerate_feasible_states(&graph).map_err(|e| field("graph", e))?;
        let params = self.network_params()?;
        if params.num_classes() != space.num_classes() {
            return Err(field(
                "params",
                format!(
                    "{} classes given, graph has {}",
                    params.num_classes(),
                    space.num_classes()
                ),
            ));
        }
        self.truncation()?;
        let mf = &self.meanfield;
        if !(mf.step > 0.0 && mf.step.is_finite()) {
            return Err(field("meanfield.step", "must be > 0"));
        }
        if !(mf.horizon >= 0.0 && mf.horizon.is_finite()) {
            return Err(field("meanfield.horizon", "must be >= 0"));
        }
        if mf.store_every == 0 {
            return Err(field("meanfield.store_every", "must be >= 1"));
        }
        if let Some(sim) = &self.sim {
            if sim.replicas == 0 {
                return Err(field("sim.replicas", "must be >= 1"));
            }
            let ladder = sim.nodes.counts();
            if ladder.is_empty() {
                return Err(field("sim.nodes", "needs at least one node count"));
            }
            for n in ladder {
                node_counts(&params.proportions, n).map_err(|e| field("sim.nodes", e))?;
                self.sim_config(&space, &params, n, sim.seed)
                    .validate()
                    .map_err(|e| field("sim", e))?;
            }
        }
        if let Some(sw) = &self.sweep {
            sw.points()?;
            if sw.class.is_some_and(|c| c >= space.num_classes()) {
                return Err(field("sweep.class", "out of range"));
            }
        }
        Ok(Experiment {
            config: self,
            space,
            params,
        })
    }

    pub fn sim_config(
        &self,
        space: &ActivitySpace,
        params: &NetworkParams,
        nodes: usize,
        seed: u64,
    ) -> SimConfig {
        let sim = self.sim.as_ref().expect("checked by the caller");
        SimConfig {
            params: params.clone(),
            space: space.clone(),
            nodes,
            seed,
            t_end: sim.t_end,
            burn_in: sim.burn_in,
            sample_interval: sim.sample_interval,
            n_max: sim.n_max,
            max_events: sim.max_events,
        }
    }
}
