use std::time::Instant;

use super::config::Method;
use crate::linalg::{self, Vector};
use crate::objectives::Objective;

/// Objective above which a run is declared diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub grad_evals: u64,
    pub objective: f64,
    pub wall_seconds: f64,
}

/// Per-stage bookkeeping of the variance-reduced methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord {
    /// Sampled inner-loop length `t_j`.
    pub inner_length: usize,
    /// Inner steps actually taken (smaller than `inner_length` only when the budget ran out).
    pub steps: usize,
    /// Component gradients consumed by the stage, pivot included.
    pub cost: u64,
    /// `f(w_tilde)` at the end of the stage.
    pub value: f64,
}

/// Objective curve of one run, indexed by component-gradient evaluations.
#[derive(Debug, Clone)]
pub struct Trace {
    pub method: Method,
    pub seed: u64,
    pub points: Vec<TracePoint>,
    pub final_w: Vector,
    pub diverged: bool,
    pub iterations: u64,
    /// Objective at the initial point.
    pub initial_value: f64,
    /// One entry per completed stage (variance-reduced methods only).
    pub stages: Vec<StageRecord>,
    pub curvature_skips: u64,
}

impl Trace {
    pub fn final_objective(&self) -> Option<f64> {
        self.points.last().map(|p| p.objective)
    }

    pub fn total_grad_evals(&self) -> u64 {
        self.points.last().map_or(0, |p| p.grad_evals)
    }

    /// `f(w_tilde_s)` for `s = 0, 1, ...`.
    pub fn stage_values(&self) -> Vec<f64> {
        std::iter::once(self.initial_value).chain(self.stages.iter().map(|s| s.value)).collect()
    }

    /// Equality of everything except wall-clock time.
    pub fn same_path(&self, other: &Trace) -> bool {
        let points_eq = self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| a.grad_evals == b.grad_evals && a.objective.to_bits() == b.objective.to_bits());
        points_eq
            && self.seed == other.seed
            && self.final_w.iter().map(|v| v.to_bits()).eq(other.final_w.iter().map(|v| v.to_bits()))
            && self.diverged == other.diverged
            && self.iterations == other.iterations
            && self.initial_value.to_bits() == other.initial_value.to_bits()
            && self.stages.len() == other.stages.len()
            && self.stages.iter().zip(&other.stages).all(|(a, b)| {
                a.inner_length == b.inner_length && a.steps == b.steps && a.cost == b.cost && a.value.to_bits() == b.value.to_bits()
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Flow {
    Continue,
    Diverged,
}

/// Samples the full objective on a fixed component-gradient cadence.
pub(crate) struct Recorder {
    cadence: u64,
    next_due: u64,
    start: Instant,
    pub points: Vec<TracePoint>,
    pub diverged: bool,
}

impl Recorder {
    pub fn new(cadence: u64) -> Self {
        Self { cadence: cadence.max(1), next_due: 0, start: Instant::now(), points: Vec::new(), diverged: false }
    }

    /// Evaluates and checks `f(w)`, marking divergence.
    pub fn checked_value(&mut self, obj: &Objective<'_>, w: &[f64]) -> Option<f64> {
        if !linalg::all_finite(w) {
            self.diverged = true;
            return None;
        }
        let f = obj.full_value(w);
        if !f.is_finite() || f > DIVERGENCE_THRESHOLD {
            self.diverged = true;
            return None;
        }
        Some(f)
    }

    /// Records when the cadence is due, or unconditionally with `force`.
    pub fn observe(&mut self, obj: &Objective<'_>, w: &[f64], force: bool) -> Flow {
        let evals = obj.evals();
        if !force && evals < self.next_due {
            return Flow::Continue;
        }
        if self.points.last().is_some_and(|p| p.grad_evals >= evals) {
            return Flow::Continue;
        }
        match self.checked_value(obj, w) {
            Some(f) => {
                self.push(evals, f);
                Flow::Continue
            }
            None => Flow::Diverged,
        }
    }

    /// Records a value already computed at the current evaluation count.
    pub fn push_value(&mut self, evals: u64, f: f64) {
        if self.points.last().is_some_and(|p| p.grad_evals >= evals) {
            return;
        }
        self.push(evals, f);
    }

    fn push(&mut self, evals: u64, f: f64) {
        self.points.push(TracePoint { grad_evals: evals, objective: f, wall_seconds: self.start.elapsed().as_secs_f64() });
        self.next_due = (evals / self.cadence + 1) * self.cadence;
    }
}
