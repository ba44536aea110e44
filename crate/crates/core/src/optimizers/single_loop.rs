//! SGD, oBFGS and RES: one minibatch gradient and (optionally) one curvature
//! pair per iteration, with a step-size schedule.

use super::config::{Method, OptimizerConfig};
use super::trace::{Flow, Recorder, Trace};
use super::{initial_point, record_cadence};
use crate::curvature::{res_direction, stochastic_curvature_pair, InverseHessian};
use crate::datasets::sample_index_set;
use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::Objective;
use crate::rng::Rng;

/// `w_{t+1} = w_t - eta_t grad_B(w_t)` with a fresh `B` per step.
pub fn sgd_run(obj: &Objective<'_>, cfg: &OptimizerConfig) -> Result<Trace> {
    expect_method(cfg, &[Method::Sgd])?;
    single_loop(obj, cfg)
}

/// `w_{t+1} = w_t - eta_t J_t grad_B(w_t)` with BFGS updates of `J_t` from
/// curvature pairs over an independent set `A`.
pub fn obfgs_run(obj: &Objective<'_>, cfg: &OptimizerConfig) -> Result<Trace> {
    expect_method(cfg, &[Method::Obfgs])?;
    single_loop(obj, cfg)
}

/// oBFGS with eigenvalue-band projection after each update and the
/// identity-biased step `w_{t+1} = w_t - eta_t (J_t + gamma I) grad_B(w_t)`.
pub fn res_run(obj: &Objective<'_>, cfg: &OptimizerConfig) -> Result<Trace> {
    expect_method(cfg, &[Method::Res])?;
    single_loop(obj, cfg)
}

pub(super) fn expect_method(cfg: &OptimizerConfig, allowed: &[Method]) -> Result<()> {
    if allowed.contains(&cfg.method) {
        Ok(())
    } else {
        Err(Error::Config(format!("expected one of {allowed:?}, got {}", cfg.method)))
    }
}

fn single_loop(obj: &Objective<'_>, cfg: &OptimizerConfig) -> Result<Trace> {
    cfg.validate(obj.n())?;
    let n = obj.n();
    let d = obj.dim();
    let mut rng = Rng::new(cfg.seed);
    let mut w = initial_point(d, cfg, &mut rng)?;

    let mut hessian = match cfg.method {
        Method::Sgd => None,
        _ => {
            let mut h = InverseHessian::new(d, cfg.j0_scale)?;
            if cfg.method == Method::Res {
                let (g, r) = cfg.bounds().expect("validated");
                h = h.with_bounds(g, r)?;
                h.enforce_bounds()?;
            }
            Some(h)
        }
    };
    let update_curvature = hessian.is_some() && !cfg.freeze_curvature;
    let res_gamma = if cfg.method == Method::Res { cfg.gamma } else { None };

    let mut rec = Recorder::new(record_cadence(cfg, n));
    let initial_value = rec.checked_value(obj, &w).unwrap_or(f64::NAN);
    if !rec.diverged {
        rec.push_value(obj.evals(), initial_value);
    }

    let mut g = vec![0.0; d];
    let mut t: u64 = 0;
    while !rec.diverged {
        if cfg.max_iters.is_some_and(|cap| t >= cap) || cfg.budget.is_some_and(|b| obj.evals() >= b) {
            break;
        }
        let b = sample_index_set(n, cfg.batch, &mut rng)?;
        let a = if update_curvature { Some(sample_index_set(n, cfg.curvature_batch, &mut rng)?) } else { None };

        obj.gradient_into(&w, &b, &mut g);
        let eta = cfg.schedule.step_size(t);
        let direction = match (&hessian, res_gamma) {
            (None, _) => g.clone(),
            (Some(h), None) => h.apply(&g),
            (Some(h), Some(gamma)) => res_direction(h.matrix(), gamma, &g),
        };
        let mut w_next = w.clone();
        linalg::axpy(-eta, &direction, &mut w_next);

        if let (Some(h), Some(a)) = (hessian.as_mut(), a.as_ref()) {
            let pair = stochastic_curvature_pair(obj, &w, &w_next, a);
            if h.update(&pair) && h.bounds().is_some() {
                h.enforce_bounds()?;
            }
        }
        w = w_next;
        t += 1;

        if !linalg::all_finite(&w) {
            rec.diverged = true;
            break;
        }
        if rec.observe(obj, &w, false) == Flow::Diverged {
            break;
        }
    }
    if !rec.diverged {
        rec.observe(obj, &w, true);
    }

    Ok(Trace {
        method: cfg.method,
        seed: cfg.seed,
        points: rec.points,
        final_w: w,
        diverged: rec.diverged,
        iterations: t,
        initial_value,
        stages: Vec::new(),
        curvature_skips: hessian.map_or(0, |h| h.skipped_updates()),
    })
}
