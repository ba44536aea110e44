//! The five optimizers and their shared configuration, schedules and traces.

mod config;
mod schedule;
mod single_loop;
mod trace;
mod variance_reduced;

pub use config::{InnerRate, Method, OptimizerConfig, Pivot};
pub use schedule::{ScheduleKind, StepSchedule};
pub use single_loop::{obfgs_run, res_run, sgd_run};
pub use trace::{StageRecord, Trace, TracePoint, DIVERGENCE_THRESHOLD};
pub use variance_reduced::{sample_inner_length, svrg_run, vite_direction, vite_run};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::objectives::Objective;
use crate::rng::Rng;

/// Runs `cfg.method` on `obj`.
pub fn run(obj: &Objective<'_>, cfg: &OptimizerConfig) -> Result<Trace> {
    match cfg.method {
        Method::Sgd => sgd_run(obj, cfg),
        Method::Obfgs => obfgs_run(obj, cfg),
        Method::Res => res_run(obj, cfg),
        Method::Svrg => svrg_run(obj, cfg),
        Method::Vite => vite_run(obj, cfg),
    }
}

pub(crate) fn initial_point(d: usize, cfg: &OptimizerConfig, rng: &mut Rng) -> Result<Vector> {
    if let Some(w0) = &cfg.initial {
        if w0.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: w0.len() });
        }
        return Ok(w0.clone());
    }
    let scale = cfg.init_scale;
    if scale == 0.0 {
        return Ok(vec![0.0; d]);
    }
    Ok((0..d).map(|_| scale * rng.standard_normal()).collect())
}

/// One trace point per `ceil(n / 10)` component gradients unless overridden.
pub(crate) fn record_cadence(cfg: &OptimizerConfig, n: usize) -> u64 {
    cfg.record_every.unwrap_or_else(|| (n as u64).div_ceil(10).max(1))
}
