//! Run matrices over (config, seed) cells, checkpoint alignment and
//! cross-validation.

use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;
use vite_core::optimizers::{self, Method, OptimizerConfig, Trace};
use vite_core::{Dataset, Objective};

use crate::error::{config_err, run_err, Result};
use crate::spec::{Cell, ExperimentSpec, OneOrMany};

/// All traces of one configuration.
#[derive(Debug, Clone)]
pub struct ConfigRuns {
    pub config_id: String,
    pub method: Method,
    /// The configuration with `seed` left at zero.
    pub config: OptimizerConfig,
    pub traces: Vec<Trace>,
}

/// Mean and (population) variance across seeds at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatePoint {
    pub grad_evals: u64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct RunSet {
    pub name: String,
    pub configs: Vec<ConfigRuns>,
    /// Shared component-gradient grid, identical for every configuration.
    pub checkpoints: Vec<u64>,
    /// `aggregates[c][k]` is configuration `c` at `checkpoints[k]`.
    pub aggregates: Vec<Vec<AggregatePoint>>,
}

impl RunSet {
    pub fn config(&self, config_id: &str) -> Option<(&ConfigRuns, &[AggregatePoint])> {
        let i = self.configs.iter().position(|c| c.config_id == config_id)?;
        Some((&self.configs[i], &self.aggregates[i]))
    }

    /// Mean objective at the last shared checkpoint.
    pub fn final_mean(&self, config_id: &str) -> Option<f64> {
        self.config(config_id).and_then(|(_, a)| a.last()).map(|p| p.mean)
    }
}

/// The last recorded objective at or before `evals`; `inf` once a run has
/// diverged past its last finite point.
pub fn value_at(trace: &Trace, evals: u64) -> f64 {
    match trace.points.iter().rposition(|p| p.grad_evals <= evals) {
        None => f64::NAN,
        Some(i) => {
            let last = i + 1 == trace.points.len();
            if trace.diverged && last && evals > trace.points[i].grad_evals {
                f64::INFINITY
            } else {
                trace.points[i].objective
            }
        }
    }
}

fn mean_variance(values: &[f64]) -> (f64, f64) {
    if values.iter().any(|v| v.is_infinite()) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
    (mean, variance)
}

/// Evenly spaced checkpoints `0, end/K, ..., end`, where `end` is the
/// smallest budget consumed by any run that did not diverge.
pub fn shared_checkpoints(configs: &[ConfigRuns], count: usize, budget: u64) -> Vec<u64> {
    let end = configs
        .iter()
        .flat_map(|c| &c.traces)
        .filter(|t| !t.diverged)
        .map(Trace::total_grad_evals)
        .min()
        .unwrap_or(budget)
        .min(budget);
    let mut grid: Vec<u64> = (0..=count as u64).map(|k| end * k / count as u64).collect();
    grid.dedup();
    grid
}

/// Aligns traces on `checkpoints` by last-value interpolation.
pub fn aggregate(runs: &ConfigRuns, checkpoints: &[u64]) -> Vec<AggregatePoint> {
    checkpoints
        .iter()
        .map(|&g| {
            let values: Vec<f64> = runs.traces.iter().map(|t| value_at(t, g)).collect();
            let (mean, variance) = mean_variance(&values);
            AggregatePoint { grad_evals: g, mean, variance }
        })
        .collect()
}

fn run_cell(data: &Dataset, spec: &ExperimentSpec, config: &OptimizerConfig, seed: u64) -> Result<Trace> {
    let obj = Objective::new(spec.objective.kind, spec.objective.lambda, data)?;
    let mut cfg = config.clone();
    cfg.seed = seed;
    let trace = optimizers::run(&obj, &cfg).map_err(|e| run_err(format!("{} seed {seed}: {e}", cfg.method)))?;
    if trace.diverged {
        warn!("{} seed {seed} diverged after {} component gradients", cfg.method, trace.total_grad_evals());
    }
    Ok(trace)
}

/// Runs `cells` x `seeds` in parallel; results come back in input order.
pub fn run_cells(data: &Dataset, spec: &ExperimentSpec, cells: &[Cell], seeds: &[u64]) -> Result<Vec<ConfigRuns>> {
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let traces: Vec<Trace> = jobs
        .par_iter()
        .map(|&(c, s)| run_cell(data, spec, &cells[c].config, s))
        .collect::<Result<_>>()?;
    let mut it = traces.into_iter();
    Ok(cells
        .iter()
        .map(|cell| ConfigRuns {
            config_id: cell.config_id.clone(),
            method: cell.config.method,
            config: cell.config.clone(),
            traces: it.by_ref().take(seeds.len()).collect(),
        })
        .collect())
}

/// Executes every (config, seed) pair of `spec` to its budget and aggregates.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunSet> {
    spec.check()?;
    let data = spec.load_dataset()?;
    run_experiment_on(spec, &data)
}

/// As [`run_experiment`] with the dataset already loaded.
pub fn run_experiment_on(spec: &ExperimentSpec, data: &Dataset) -> Result<RunSet> {
    let cells = spec.expand(data.n())?;
    info!("{}: {} configurations x {} seeds on n = {}, d = {}", spec.name, cells.len(), spec.seeds.len(), data.n(), data.dim());
    let configs = run_cells(data, spec, &cells, &spec.seeds)?;
    let checkpoints = shared_checkpoints(&configs, spec.checkpoints, spec.budget);
    let aggregates = configs.iter().map(|c| aggregate(c, &checkpoints)).collect();
    Ok(RunSet { name: spec.name.clone(), configs, checkpoints, aggregates })
}

/// Outcome of one cross-validation grid.
#[derive(Debug, Clone)]
pub struct CvOutcome {
    /// Index into the candidate list.
    pub best: usize,
    /// Mean final objective per candidate (`inf` when diverged).
    pub scores: Vec<f64>,
}

fn schedule_key(c: &OptimizerConfig) -> (f64, f64) {
    (c.schedule.eta0, c.schedule.t0.unwrap_or(0.0))
}

/// Picks the candidate with the lowest mean final objective at `budget`.
///
/// Ties go to the first candidate in ascending `(eta0, t0)` order; if every
/// candidate diverges the error lists the grid.
pub fn cross_validate(
    data: &Dataset,
    spec: &ExperimentSpec,
    candidates: &[Cell],
    budget: u64,
    seeds: &[u64],
) -> Result<CvOutcome> {
    if candidates.is_empty() {
        return Err(config_err("cross-validation grid is empty"));
    }
    let reduced: Vec<Cell> = candidates
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.config.budget = Some(budget);
            c
        })
        .collect();
    let runs = run_cells(data, spec, &reduced, seeds)?;
    let scores: Vec<f64> = runs
        .iter()
        .map(|r| {
            let finals: Vec<f64> = r.traces.iter().map(|t| if t.diverged { f64::INFINITY } else { value_at(t, budget) }).collect();
            mean_variance(&finals).0
        })
        .collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (schedule_key(&candidates[a].config), schedule_key(&candidates[b].config));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(a.cmp(&b))
    });
    let mut best: Option<usize> = None;
    for &i in &order {
        if scores[i].is_finite() && best.is_none_or(|b| scores[i] < scores[b]) {
            best = Some(i);
        }
    }
    match best {
        Some(best) => Ok(CvOutcome { best, scores }),
        None => {
            let grid: Vec<String> = candidates.iter().map(|c| c.config_id.clone()).collect();
            Err(run_err(format!("every grid point diverged: {}", grid.join(", "))))
        }
    }
}

/// Result of tuning a spec: the tuned spec plus per-group reports.
#[derive(Debug, Clone)]
pub struct TuneReport {
    pub spec: ExperimentSpec,
    /// `(group, chosen config id, scores by candidate id)`
    pub groups: Vec<(String, String, Vec<(String, f64)>)>,
}

/// Collapses every `eta0`/`t0` grid to the cross-validated best value.
///
/// Entries whose batch sizes are grids are split into one tuned entry per
/// batch cell, so each keeps its own step size.
pub fn tune(spec: &ExperimentSpec) -> Result<TuneReport> {
    spec.check()?;
    let data = spec.load_dataset()?;
    tune_on(spec, &data)
}

pub fn tune_on(spec: &ExperimentSpec, data: &Dataset) -> Result<TuneReport> {
    let cells = spec.expand(data.n())?;
    let budget = spec.cv.budget.unwrap_or((spec.budget / 5).max(1));
    let seeds = spec.cv.seeds.clone().unwrap_or_else(|| spec.seeds.clone());
    let mut groups: BTreeMap<(usize, String), Vec<Cell>> = BTreeMap::new();
    let mut first_seen: Vec<(usize, String)> = Vec::new();
    for c in cells {
        let key = (c.entry, c.group.clone());
        if !groups.contains_key(&key) {
            first_seen.push(key.clone());
        }
        groups.entry(key).or_default().push(c);
    }

    let mut methods = Vec::new();
    let mut report = Vec::new();
    for key in first_seen {
        let candidates = &groups[&key];
        let outcome = cross_validate(data, spec, candidates, budget, &seeds)?;
        let chosen = &candidates[outcome.best];
        info!("{}: chose {}", key.1, chosen.config_id);
        let entry = &spec.methods[key.0];
        let mut tuned = entry.clone();
        let split = entry.batch.values().len() > 1 || entry.curvature_batch.values().len() > 1;
        if split {
            tuned.id = Some(chosen.group.split_once(':').map_or(chosen.group.as_str(), |(_, id)| id).to_string());
        }
        tuned.batch = OneOrMany::One(chosen.batch);
        tuned.curvature_batch = OneOrMany::One(chosen.curvature_batch);
        tuned.eta0 = OneOrMany::One(chosen.config.schedule.eta0);
        tuned.t0 = chosen.config.schedule.t0.map(OneOrMany::One);
        methods.push(tuned);
        let scores = candidates.iter().zip(&outcome.scores).map(|(c, &s)| (c.config_id.clone(), s)).collect();
        report.push((key.1, chosen.config_id.clone(), scores));
    }
    let mut tuned = spec.clone();
    tuned.methods = methods;
    Ok(TuneReport { spec: tuned, groups: report })
}
