//! The subcommands. Each returns the JSON document it printed and writes its
//! files into the output directory.

use std::path::PathBuf;

use csma_core::meanfield::{
    drift, fixed_point_with, integrate, stability_condition, sup_norm, FixedPointResult,
};
use csma_core::metrics::{compare_replication, limit_laws, ComparisonReport};
use csma_core::params::NetworkParams;
use csma_core::population::PopulationState;
use csma_core::simulator::{replicate, Estimate, Replication, SimStats};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, Format, InitialState, SweepParameter};
use crate::error::CliError;
use crate::output::{canonical_json, num, write_atomic, Table};

/// Where and how to write; overrides already folded into the config.
pub struct Context {
    pub out_dir: PathBuf,
    pub hash: String,
}

impl Context {
    pub fn new(exp: &Experiment, out_dir: Option<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.unwrap_or_else(|| exp.config.output.directory.clone()),
            hash: exp.config.hash(),
        }
    }
}

fn seed_of(exp: &Experiment) -> Value {
    exp.config
        .sim
        .as_ref()
        .map_or(Value::Null, |s| json!(s.seed))
}

fn wants(exp: &Experiment, f: Format) -> bool {
    exp.config.output.formats.contains(&f)
}

fn finish(
    exp: &Experiment,
    ctx: &Context,
    name: &str,
    command: &str,
    body: Value,
) -> Result<Value, CliError> {
    let mut doc = body;
    let obj = doc.as_object_mut().expect("command outputs are objects");
    obj.insert("command".into(), json!(command));
    obj.insert("config_hash".into(), json!(ctx.hash));
    obj.insert("seed".into(), seed_of(exp));
    if wants(exp, Format::Json) {
        write_atomic(&ctx.out_dir, name, canonical_json(&doc).as_bytes())?;
    }
    Ok(doc)
}

fn write_table(exp: &Experiment, ctx: &Context, name: &str, table: Table) -> Result<(), CliError> {
    if wants(exp, Format::Csv) {
        write_atomic(&ctx.out_dir, name, &table.into_bytes())?;
    }
    Ok(())
}

fn stamp(ctx: &Context, exp: &Experiment) -> [String; 2] {
    [
        ctx.hash.clone(),
        exp.config
            .sim
            .as_ref()
            .map_or(String::new(), |s| s.seed.to_string()),
    ]
}

pub fn enumerate(exp: &Experiment, ctx: &Context) -> Result<Value, CliError> {
    let space = &exp.space;
    let c = space.num_classes();
    let bits = |idx: &[usize]| -> Vec<String> {
        idx.iter()
            .map(|&i| space.states()[i].to_bit_string(c))
            .collect()
    };
    let all: Vec<usize> = (0..space.len()).collect();
    let body = json!({
        "classes": c,
        "size": space.len(),
        "states": bits(&all),
        "omega_minus": (0..c).map(|k| bits(space.omega_minus(k))).collect::<Vec<_>>(),
        "omega_plus": (0..c).map(|k| bits(space.omega_plus(k))).collect::<Vec<_>>(),
        "omega_minus_sizes": (0..c).map(|k| space.omega_minus(k).len()).collect::<Vec<_>>(),
        "omega_plus_sizes": (0..c).map(|k| space.omega_plus(k).len()).collect::<Vec<_>>(),
    });
    finish(exp, ctx, "enumerate.json", "enumerate", body)
}

fn fixed_point_of(exp: &Experiment, params: &NetworkParams) -> Result<FixedPointResult, CliError> {
    Ok(fixed_point_with(
        params,
        &exp.space,
        &exp.config.fixed_point_options()?,
    )?)
}

pub fn fixed_point(exp: &Experiment, ctx: &Context) -> Result<Value, CliError> {
    let fp = fixed_point_of(exp, &exp.params)?;
    let stability = stability_condition(&exp.params, &exp.space)?;
    let laws = limit_laws(&fp).ok();
    let body = json!({
        "xi": fp.xi,
        "residual": fp.diagnostics.residual,
        "iterations": fp.diagnostics.iterations,
        "method": fp.diagnostics.method,
        "stable": fp.stable,
        "varrho": fp.varrho,
        "stability": stability,
        "effective_backoff": fp.effective_backoff,
        "x_star": fp.x_star.as_ref().map(|x| x.rows().to_vec()),
        "limit_laws": laws,
    });
    finish(exp, ctx, "fixed_point.json", "fixed-point", body)
}

pub fn ode(exp: &Experiment, ctx: &Context) -> Result<Value, CliError> {
    let fp = fixed_point_of(exp, &exp.params).ok().filter(|f| f.stable);
    let x_star = fp.as_ref().and_then(|f| f.x_star.clone());
    let n_max = match (&x_star, exp.config.truncation()?) {
        (_, csma_core::meanfield::Truncation::Fixed(n)) => n,
        (Some(x), _) => x.n_max(),
        (None, _) => 64,
    };
    let x0 = match exp.config.meanfield.initial {
        InitialState::Empty => PopulationState::empty(exp.space.num_classes(), n_max),
        InitialState::FixedPoint => x_star.clone().ok_or_else(|| {
            CliError::Config("meanfield.initial: no equilibrium exists for these parameters".into())
        })?,
    };
    let traj = integrate(
        &x0,
        &exp.params,
        &exp.space,
        &exp.config.integration_options(),
    )?;
    let distances: Option<Vec<f64>> = x_star
        .as_ref()
        .map(|xs| traj.states.iter().map(|s| s.distance(xs)).collect());

    let [hash, seed] = stamp(ctx, exp);
    let mut table = Table::new(&["t", "class", "level", "probability", "config_hash", "seed"]);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        for (c, row) in s.rows().iter().enumerate() {
            for (n, v) in row.iter().enumerate() {
                table.row([
                    num(*t),
                    c.to_string(),
                    n.to_string(),
                    num(*v),
                    hash.clone(),
                    seed.clone(),
                ]);
            }
        }
    }
    write_table(exp, ctx, "trajectory.csv", table)?;

    let last = traj.last();
    let body = json!({
        "samples": traj.len(),
        "horizon": traj.times.last(),
        "final_state": last.rows().to_vec(),
        "final_drift_norm": sup_norm(&drift(last, &exp.params, &exp.space)?),
        "final_distance": distances.as_ref().and_then(|d| d.last().copied()),
        "times": traj.times,
        "distance_to_fixed_point": distances,
        "drift_norms": traj.drift_norms,
    });
    finish(exp, ctx, "ode.json", "ode", body)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    seed: u64,
    node_counts: &'a [usize],
    events: &'a csma_core::simulator::EventCounts,
    conserved: bool,
    stable: Option<bool>,
    mean_wait: Vec<Option<Estimate>>,
    mean_sojourn: Vec<Option<Estimate>>,
    scaled_wait: Vec<Option<f64>>,
    activity_fraction: &'a [f64],
    mean_in_system: &'a [f64],
    arrival_rate: &'a [f64],
    accepted_rate: &'a [f64],
    population: &'a [Vec<f64>],
}

fn run_summary<'a>(s: &'a SimStats, params: &NetworkParams) -> RunSummary<'a> {
    let c = s.num_classes();
    RunSummary {
        seed: s.seed,
        node_counts: &s.node_counts,
        events: &s.events,
        conserved: s.is_conserved(),
        stable: s.stable,
        mean_wait: (0..c).map(|k| s.mean_wait(k)).collect(),
        mean_sojourn: (0..c).map(|k| s.mean_sojourn(k)).collect(),
        scaled_wait: (0..c)
            .map(|k| {
                s.mean_wait(k)
                    .map(|e| params.lambda[k] / s.node_counts[k] as f64 * e.mean)
            })
            .collect(),
        activity_fraction: &s.activity_fraction,
        mean_in_system: &s.mean_in_system,
        arrival_rate: &s.arrival_rate,
        accepted_rate: &s.accepted_rate,
        population: s.population.rows(),
    }
}

fn ladder(exp: &Experiment) -> Result<Vec<Replication>, CliError> {
    let sim = exp.config.sim()?;
    sim.nodes
        .counts()
        .into_par_iter()
        .map(|n| {
            let cfg = exp.config.sim_config(&exp.space, &exp.params, n, sim.seed);
            Ok(replicate(&cfg, sim.replicas)?)
        })
        .collect()
}

pub fn simulate(exp: &Experiment, ctx: &Context) -> Result<Value, CliError> {
    let reps = ladder(exp)?;
    let nodes = exp.config.sim()?.nodes.counts();
    let [hash, seed] = stamp(ctx, exp);
    let mut points = Vec::new();
    for (n, rep) in nodes.iter().zip(&reps) {
        let mut waits = Table::new(&["replica", "class", "value", "config_hash", "seed"]);
        let mut snaps = Table::new(&[
            "replica",
            "t",
            "class",
            "level",
            "fraction",
            "config_hash",
            "seed",
        ]);
        let mut any_snapshot = false;
        for (i, run) in rep.runs.iter().enumerate() {
            for (c, samples) in run.waiting.iter().enumerate() {
                for w in samples {
                    waits.row([
                        i.to_string(),
                        c.to_string(),
                        num(*w),
                        hash.clone(),
                        seed.clone(),
                    ]);
                }
            }
            for (t, x) in &run.snapshots {
                any_snapshot = true;
                for (c, row) in x.rows().iter().enumerate() {
                    for (l, v) in row.iter().enumerate() {
                        snaps.row([
                            i.to_string(),
                            num(*t),
                            c.to_string(),
                            l.to_string(),
                            num(*v),
                            hash.clone(),
                            seed.clone(),
                        ]);
                    }
                }
            }
        }
        write_table(exp, ctx, &format!("waiting_N{n}.csv"), waits)?;
        if any_snapshot {
            write_table(exp, ctx, &format!("snapshots_N{n}.csv"), snaps)?;
        }
        points.push(json!({
            "nodes": n,
            "replicas": rep.runs.len(),
            "pooled": rep.pooled,
            "runs": rep.runs.iter().map(|r| run_summary(r, &exp.params)).collect::<Vec<_>>(),
        }));
    }
    finish(
        exp,
        ctx,
        "simulate.json",
        "simulate",
        json!({ "points": points }),
    )
}

pub fn compare(exp: &Experiment, ctx: &Context) -> Result<Value, CliError> {
    let fp = fixed_point_of(exp, &exp.params)?;
    let laws = limit_laws(&fp)?;
    let reps = ladder(exp)?;
    let nodes = exp.config.sim()?.nodes.counts();
    let reports: Vec<ComparisonReport> = reps
        .iter()
        .map(|rep| compare_replication(rep, &laws, &fp, &exp.params, &exp.space))
        .collect::<Result<_, _>>()?;

    let [hash, seed] = stamp(ctx, exp);
    let mut table = Table::new(&["N", "class", "metric", "value", "config_hash", "seed"]);
    for (n, r) in nodes.iter().zip(&reports) {
        for (c, m) in r.classes.iter().enumerate() {
            let metrics = [
                ("distance", m.distance),
                ("tail_gap", m.tail_gap),
                ("scaled_wait", m.scaled_wait),
                ("scaled_wait_little", m.scaled_wait_little),
                ("predicted_wait", m.predicted_wait),
                ("relative_error", m.relative_error),
                ("relative_error_little", m.relative_error_little),
            ];
            for (name, v) in metrics {
                table.row([
                    n.to_string(),
                    c.to_string(),
                    name.to_string(),
                    num(v),
                    hash.clone(),
                    seed.clone(),
                ]);
            }
        }
        if let Some(p) = r.pseudo_conservation {
            table.row([
                n.to_string(),
                "all".into(),
                "pseudo_conservation".into(),
                num(p),
                hash.clone(),
                seed.clone(),
            ]);
        }
    }
    write_table(exp, ctx, "compare.csv", table)?;

    let classes = exp.space.num_classes();
    let improves: Vec<bool> = (0..classes)
        .map(|c| {
            let first = reports.first().map(|r| r.classes[c].distance);
            let last = reports.last().map(|r| r.classes[c].distance);
            matches!((first, last), (Some(a), Some(b)) if b < a)
        })
        .collect();
    let points: Vec<Value> = nodes
        .iter()
        .zip(&reports)
        .map(|(n, r)| json!({ "nodes": n, "report": r }))
        .collect();
    let body = json!({
        "xi": fp.xi,
        "limit_laws": laws,
        "points": points,
        "distance_improves": improves,
    });
    finish(exp, ctx, "compare.json", "compare", body)
}

pub fn sweep(exp: &Experiment, ctx: &Context) -> Result<Value, CliError> {
    let spec = exp
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [sweep] block".into()))?;
    let values = spec.points()?;
    let classes = exp.space.num_classes();
    let rows: Vec<Value> = values
        .par_iter()
        .map(|&v| {
            let mut p = exp.params.clone();
            let target = match spec.parameter {
                SweepParameter::Lambda => &mut p.lambda,
                SweepParameter::Nu => &mut p.nu,
                SweepParameter::Mu => &mut p.mu,
            };
            match spec.class {
                Some(c) => target[c] = v,
                None => target.iter_mut().for_each(|t| *t = v),
            }
            let point = p.validate().map_err(CliError::from).and_then(|_| {
                Ok((
                    stability_condition(&p, &exp.space)?,
                    fixed_point_of(exp, &p),
                ))
            });
            match point {
                Ok((st, Ok(fp))) => json!({
                    "value": v,
                    "varrho": st.varrho,
                    "stable": st.stable,
                    "feasible": true,
                    "xi": fp.xi,
                    "error": null,
                }),
                Ok((st, Err(e))) => json!({
                    "value": v,
                    "varrho": st.varrho,
                    "stable": st.stable,
                    "feasible": false,
                    "xi": null,
                    "error": e.to_string(),
                }),
                Err(e) => json!({
                    "value": v,
                    "varrho": null,
                    "stable": false,
                    "feasible": false,
                    "xi": null,
                    "error": e.to_string(),
                }),
            }
        })
        .collect();

    let [hash, seed] = stamp(ctx, exp);
    let mut header: Vec<String> = ["value", "varrho", "stable", "feasible"]
        .map(String::from)
        .to_vec();
    header.extend((0..classes).map(|c| format!("xi_{c}")));
    header.extend(["config_hash".to_string(), "seed".to_string()]);
    let mut table = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    let cell = |v: &Value| match v {
        Value::Null => String::new(),
        Value::Number(n) => n.to_string(),
        other => other.to_string(),
    };
    for r in &rows {
        let mut fields = vec![
            cell(&r["value"]),
            cell(&r["varrho"]),
            cell(&r["stable"]),
            cell(&r["feasible"]),
        ];
        for c in 0..classes {
            fields.push(cell(&r["xi"][c]));
        }
        fields.push(hash.clone());
        fields.push(seed.clone());
        table.row(fields);
    }
    write_table(exp, ctx, "sweep.csv", table)?;
    let body = json!({
        "parameter": spec.parameter,
        "class": spec.class,
        "points": rows,
    });
    finish(exp, ctx, "sweep.json", "sweep", body)
}
