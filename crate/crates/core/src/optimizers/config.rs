use serde::{Deserialize, Serialize};

use super::schedule::StepSchedule;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sgd,
    Obfgs,
    Res,
    Svrg,
    Vite,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Obfgs => "obfgs",
            Method::Res => "res",
            Method::Svrg => "svrg",
            Method::Vite => "vite",
        }
    }

    pub fn is_variance_reduced(self) -> bool {
        matches!(self, Method::Svrg | Method::Vite)
    }

    pub fn uses_curvature(self) -> bool {
        matches!(self, Method::Obfgs | Method::Res | Method::Vite)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sgd" => Method::Sgd,
            "obfgs" => Method::Obfgs,
            "res" => Method::Res,
            "svrg" => Method::Svrg,
            "vite" => Method::Vite,
            other => return Err(Error::Config(format!("unknown method {other:?}"))),
        })
    }
}

/// Where the pivot gradient is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pivot {
    #[default]
    Full,
    /// A fresh uniform subset of this size at every stage.
    Subset(usize),
}

/// Which spectral bound rescales `mu` in the inner-length law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerRate {
    /// `1 - eta gamma mu`
    #[default]
    Gamma,
    /// `1 - eta rho mu`
    Rho,
}

fn default_one() -> usize {
    1
}

fn default_j0() -> f64 {
    1.0
}

/// Full specification of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub schedule: StepSchedule,
    /// `|B|`, gradient minibatch.
    #[serde(default = "default_one")]
    pub batch: usize,
    /// `|A|`, curvature-pair minibatch.
    #[serde(default = "default_one")]
    pub curvature_batch: usize,
    /// `|C|`, pivot-gradient set.
    #[serde(default)]
    pub pivot: Pivot,
    /// `m`, cap on the inner-loop length.
    #[serde(default = "default_one")]
    pub inner: usize,
    /// `S`, number of outer stages.
    #[serde(default)]
    pub stages: Option<usize>,
    /// `T`, iteration cap for the single-loop methods.
    #[serde(default)]
    pub max_iters: Option<u64>,
    /// Component-gradient budget.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_j0")]
    pub j0_scale: f64,
    #[serde(default)]
    pub seed: u64,
    /// Strong-convexity constant used by the inner-length law; estimated
    /// from the objective when absent.
    #[serde(default)]
    pub inner_mu: Option<f64>,
    #[serde(default)]
    pub inner_rate: InnerRate,
    /// Keep the inverse Hessian at `J_0` and skip curvature sampling.
    #[serde(default)]
    pub freeze_curvature: bool,
    /// Negative control: replace the pivot gradient by zero after computing it.
    #[serde(default)]
    pub drop_pivot_gradient: bool,
    /// Standard deviation of the Gaussian initial point; zero starts at the origin.
    #[serde(default)]
    pub init_scale: f64,
    /// Explicit starting point; overrides `init_scale`.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    /// Trace cadence in component gradients; defaults to `ceil(n / 10)`.
    #[serde(default)]
    pub record_every: Option<u64>,
}

impl OptimizerConfig {
    pub fn new(method: Method, schedule: StepSchedule) -> Self {
        Self {
            method,
            schedule,
            batch: 1,
            curvature_batch: 1,
            pivot: Pivot::Full,
            inner: 1,
            stages: None,
            max_iters: None,
            budget: None,
            gamma: None,
            rho: None,
            j0_scale: 1.0,
            seed: 0,
            inner_mu: None,
            inner_rate: InnerRate::Gamma,
            freeze_curvature: false,
            drop_pivot_gradient: false,
            init_scale: 0.0,
            initial: None,
            record_every: None,
        }
    }

    /// Spectral band `(gamma, rho)` if both ends are set.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.gamma.zip(self.rho)
    }

    /// Checks method-specific requirements against a dataset of `n` rows.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.method)));
        self.schedule.validate()?;
        if self.batch == 0 || self.batch > n {
            return bad(format!("batch size {} outside [1, {n}]", self.batch));
        }
        let curvature = self.method.uses_curvature() && !self.freeze_curvature;
        if curvature && (self.curvature_batch == 0 || self.curvature_batch > n) {
            return bad(format!("curvature batch size {} outside [1, {n}]", self.curvature_batch));
        }
        if let (Some(g), Some(r)) = (self.gamma, self.rho) {
            crate::linalg::check_bounds(g, r)?;
        } else if self.gamma.is_some() != self.rho.is_some() {
            return bad("gamma and rho must be set together".into());
        }
        if !(self.j0_scale > 0.0) {
            return bad(format!("j0_scale must be positive, got {}", self.j0_scale));
        }
        if !(self.init_scale >= 0.0) {
            return bad(format!("init_scale must be >= 0, got {}", self.init_scale));
        }
        if self.record_every == Some(0) {
            return bad("record_every must be positive".into());
        }
        match self.method {
            Method::Sgd | Method::Obfgs => {}
            Method::Res => {
                if self.bounds().is_none() {
                    return bad("requires gamma and rho".into());
                }
                if self.schedule.is_constant() {
                    return bad("requires a decreasing step-size schedule".into());
                }
            }
            Method::Svrg | Method::Vite => {
                if !self.schedule.is_constant() {
                    return bad("requires a constant step size".into());
                }
                if self.inner == 0 {
                    return bad("inner-loop cap m must be >= 1".into());
                }
                if let Pivot::Subset(c) = self.pivot {
                    if c == 0 || c > n {
                        return bad(format!("pivot subset size {c} outside [1, {n}]"));
                    }
                }
                if self.method == Method::Vite && !self.freeze_curvature && self.bounds().is_none() {
                    return bad("requires gamma and rho".into());
                }
                if let Some(mu) = self.inner_mu {
                    if !(mu >= 0.0) {
                        return bad(format!("inner_mu must be >= 0, got {mu}"));
                    }
                }
            }
        }
        let bounded = self.budget.is_some()
            || if self.method.is_variance_reduced() { self.stages.is_some() } else { self.max_iters.is_some() };
        if !bounded {
            return bad("needs a budget or an iteration/stage cap".into());
        }
        Ok(())
    }

    /// Component gradients consumed by one full inner step (or one step of a
    /// single-loop method), excluding pivot computations.
    pub fn step_cost(&self) -> u64 {
        let b = self.batch as u64;
        let a = if self.method.uses_curvature() && !self.freeze_curvature { self.curvature_batch as u64 } else { 0 };
        match self.method {
            Method::Sgd => b,
            Method::Obfgs | Method::Res => b + 2 * a,
            Method::Svrg | Method::Vite => 2 * b + 2 * a,
        }
    }

    pub fn pivot_cost(&self, n: usize) -> u64 {
        match self.pivot {
            Pivot::Full => n as u64,
            Pivot::Subset(c) => c as u64,
        }
    }
}
