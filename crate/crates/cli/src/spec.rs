//! Experiment specification files (JSON).
//!
//! ```json
//! {
//!   "name": "quadratic-demo",
//!   "dataset": { "synthetic": { "dim": 10, "mu": 0.01, "l": 10.0, "seed": 1 } },
//!   "objective": { "kind": "least_squares", "lambda": 0.0 },
//!   "seeds": [0, 1, 2, 3, 4],
//!   "budget": 20000,
//!   "methods": [
//!     { "method": "sgd", "schedule": "t0_decay", "eta0": [0.1, 0.01], "t0": [10, 100] },
//!     { "method": "vite", "eta0": 0.05, "batch": 1, "curvature_batch": 1,
//!       "pivot": { "fraction": 0.1 }, "inner": 50, "gamma": 0.1, "rho": 100 }
//!   ]
//! }
//! ```
//!
//! Sizes are either counts or `{ "fraction": f }`, resolved to
//! `max(1, ceil(f n))`. Every list-valued field (`eta0`, `t0`, `batch`,
//! `curvature_batch`) expands into the run matrix; `cv` collapses the
//! `eta0`/`t0` lists to their best value per remaining cell.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vite_core::datasets::{parse_libsvm, sample_index_set, synth_quadratic};
use vite_core::optimizers::{InnerRate, Method, OptimizerConfig, Pivot, ScheduleKind, StepSchedule};
use vite_core::{Dataset, LabelMode, LossKind, ParseOptions, Rng};

use crate::error::{config_err, Result};

/// A count or a fraction of the dataset size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Size {
    Count(usize),
    Fraction { fraction: f64 },
}

impl Size {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        match *self {
            Size::Count(k) if k >= 1 && k <= n => Ok(k),
            Size::Count(k) => Err(config_err(format!("size {k} outside [1, {n}]"))),
            Size::Fraction { fraction } if fraction > 0.0 && fraction <= 1.0 => {
                Ok(((fraction * n as f64).ceil() as usize).clamp(1, n))
            }
            Size::Fraction { fraction } => Err(config_err(format!("fraction {fraction} outside (0, 1]"))),
        }
    }

    /// Like [`Size::resolve`] but counts may exceed `n` (inner-loop caps).
    pub fn resolve_cap(&self, n: usize) -> Result<usize> {
        match *self {
            Size::Count(k) if k >= 1 => Ok(k),
            Size::Count(_) => Err(config_err("inner-loop cap must be >= 1")),
            Size::Fraction { fraction } if fraction > 0.0 && fraction.is_finite() => {
                Ok(((fraction * n as f64).ceil() as usize).max(1))
            }
            Size::Fraction { fraction } => Err(config_err(format!("fraction {fraction} must be positive"))),
        }
    }

    fn label(&self) -> String {
        match self {
            Size::Count(k) => k.to_string(),
            Size::Fraction { fraction } => format!("{fraction}n"),
        }
    }
}

/// A scalar or a grid of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    fn is_grid(&self) -> bool {
        matches!(self, OneOrMany::Many(v) if v.len() > 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// LibSVM file; relative paths resolve against the spec file's directory.
    Libsvm {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        /// Label handling; defaults to the objective's convention.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<LabelMode>,
        /// Keep a uniform random fraction of the rows.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subsample: Option<f64>,
        #[serde(default)]
        subsample_seed: u64,
    },
    /// Least-squares quadratic with Hessian spectrum on `[mu, l]`.
    Synthetic { dim: usize, mu: f64, l: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: LossKind,
    #[serde(default)]
    pub lambda: f64,
}

fn one_count() -> OneOrMany<Size> {
    OneOrMany::One(Size::Count(1))
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// One row of the comparison set, possibly a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    /// Label used in outputs; defaults to the method name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Plot panel; entries sharing a panel are drawn together.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel: Option<String>,
    pub method: Method,
    /// Defaults to `constant` for SVRG/VITE and `t0_decay` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleKind>,
    pub eta0: OneOrMany<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<OneOrMany<f64>>,
    #[serde(default = "one_count")]
    pub batch: OneOrMany<Size>,
    #[serde(default = "one_count")]
    pub curvature_batch: OneOrMany<Size>,
    /// Pivot subset `|C|`; the full dataset when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot: Option<Size>,
    /// Inner-loop cap `m` (SVRG/VITE).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Size>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j0_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_mu: Option<f64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub inner_rate: InnerRate,
    #[serde(default, skip_serializing_if = "is_default")]
    pub freeze_curvature: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,
}

/// Cross-validation settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSpec {
    /// Reduced budget per grid point; defaults to a fifth of the run budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Seeds for cross-validation; defaults to the run seeds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_checkpoints() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub dataset: DatasetSpec,
    pub objective: ObjectiveSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Component-gradient budget per run.
    pub budget: u64,
    /// Number of shared aggregate checkpoints after `grad_evals = 0`.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Trace cadence; defaults to `ceil(n / 10)` component gradients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<Size>,
    pub methods: Vec<MethodEntry>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub cv: CvSpec,
    /// Directory against which relative dataset paths resolve. Not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// One fully resolved configuration of the run matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub config_id: String,
    /// Index into `ExperimentSpec::methods`.
    pub entry: usize,
    /// Identifies the cross-validation group: the entry plus its batch sizes.
    pub group: String,
    pub batch: Size,
    pub curvature_batch: Size,
    pub config: OptimizerConfig,
}

impl ExperimentSpec {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| config_err(format!("invalid experiment spec: {e}")))?;
        spec.base_dir = base_dir.into();
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Loads (and optionally subsamples) the dataset.
    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSpec::Synthetic { dim, mu, l, seed } => Ok(synth_quadratic(*dim, *mu, *l, *seed)?.data),
            DatasetSpec::Libsvm { path, dim, labels, subsample, subsample_seed } => {
                let full = if path.is_absolute() { path.clone() } else { self.base_dir.join(path) };
                let file = fs::File::open(&full).map_err(|e| config_err(format!("cannot open dataset {}: {e}", full.display())))?;
                let opts = ParseOptions { dim: *dim, labels: labels.unwrap_or(self.objective.kind.label_mode()) };
                let data = parse_libsvm(std::io::BufReader::new(file), opts)
                    .map_err(|e| config_err(format!("{}: {e}", full.display())))?;
                match subsample {
                    None => Ok(data),
                    Some(f) => {
                        let k = Size::Fraction { fraction: *f }.resolve(data.n())?;
                        let mut rows = sample_index_set(data.n(), k, &mut Rng::new(*subsample_seed))?.into_vec();
                        rows.sort_unstable();
                        Ok(data.select_rows(&rows)?)
                    }
                }
            }
        }
    }

    /// Checks spec-level invariants that do not need the data.
    pub fn check(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(config_err("spec lists no methods"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("spec lists no seeds"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("seeds must be distinct"));
        }
        if self.budget == 0 {
            return Err(config_err("budget must be positive"));
        }
        if self.checkpoints == 0 {
            return Err(config_err("checkpoints must be positive"));
        }
        if !(self.objective.lambda >= 0.0) {
            return Err(config_err("lambda must be >= 0"));
        }
        Ok(())
    }

    /// Expands every entry into resolved, validated cells for a dataset of `n` rows.
    pub fn expand(&self, n: usize) -> Result<Vec<Cell>> {
        self.check()?;
        let record_every = self.record_every.map(|s| s.resolve(n)).transpose()?.map(|k| k as u64);
        let mut cells = Vec::new();
        for (idx, e) in self.methods.iter().enumerate() {
            let kind = e.schedule.unwrap_or(if e.method.is_variance_reduced() {
                ScheduleKind::Constant
            } else {
                ScheduleKind::T0Decay
            });
            let t0s: Vec<Option<f64>> = match (&e.t0, kind) {
                (Some(t), ScheduleKind::T0Decay) => t.values().into_iter().map(Some).collect(),
                (None, ScheduleKind::T0Decay) => return Err(config_err(format!("entry {idx}: t0_decay needs t0"))),
                (_, _) => vec![None],
            };
            let base = e.id.clone().unwrap_or_else(|| e.method.to_string());
            for batch in e.batch.values() {
                for curvature_batch in e.curvature_batch.values() {
                    let mut group_tags = Vec::new();
                    if e.batch.is_grid() {
                        group_tags.push(format!("b={}", batch.label()));
                    }
                    if e.curvature_batch.is_grid() {
                        group_tags.push(format!("a={}", curvature_batch.label()));
                    }
                    let group = tagged(&base, e.panel.as_deref(), &group_tags);
                    for eta0 in e.eta0.values() {
                        for &t0 in &t0s {
                            let mut tags = group_tags.clone();
                            if e.eta0.is_grid() {
                                tags.push(format!("eta0={eta0}"));
                            }
                            if let (Some(t), Some(grid)) = (t0, &e.t0) {
                                if grid.is_grid() {
                                    tags.push(format!("t0={t}"));
                                }
                            }
                            let schedule = StepSchedule { kind, eta0, t0 };
                            let config = e.resolve(schedule, batch, curvature_batch, n, self.budget, record_every)?;
                            config.validate(n).map_err(|err| config_err(format!("entry {idx} ({base}): {err}")))?;
                            cells.push(Cell {
                                config_id: tagged(&base, e.panel.as_deref(), &tags),
                                entry: idx,
                                group: group.clone(),
                                batch,
                                curvature_batch,
                                config,
                            });
                        }
                    }
                }
            }
        }
        let mut ids: Vec<&str> = cells.iter().map(|c| c.config_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(config_err(format!("duplicate config id {:?}; set distinct ids", w[0])));
        }
        Ok(cells)
    }
}

fn tagged(base: &str, panel: Option<&str>, tags: &[String]) -> String {
    let mut id = match panel {
        Some(p) => format!("{p}:{base}"),
        None => base.to_string(),
    };
    if !tags.is_empty() {
        id.push('[');
        id.push_str(&tags.join(","));
        id.push(']');
    }
    id
}

impl MethodEntry {
    fn resolve(
        &self,
        schedule: StepSchedule,
        batch: Size,
        curvature_batch: Size,
        n: usize,
        budget: u64,
        record_every: Option<u64>,
    ) -> Result<OptimizerConfig> {
        let mut c = OptimizerConfig::new(self.method, schedule);
        c.batch = batch.resolve(n)?;
        c.curvature_batch = curvature_batch.resolve(n)?;
        c.pivot = match self.pivot {
            None => Pivot::Full,
            Some(s) => Pivot::Subset(s.resolve(n)?),
        };
        if self.method.is_variance_reduced() {
            c.inner = self
                .inner
                .ok_or_else(|| config_err(format!("{}: inner-loop cap `inner` is required", self.method)))?
                .resolve_cap(n)?;
        }
        c.budget = Some(budget);
        c.gamma = self.gamma;
        c.rho = self.rho;
        c.j0_scale = self.j0_scale.unwrap_or(1.0);
        c.inner_mu = self.inner_mu;
        c.inner_rate = self.inner_rate;
        c.freeze_curvature = self.freeze_curvature;
        c.init_scale = self.init_scale.unwrap_or(0.0);
        c.record_every = record_every;
        Ok(c)
    }
}
