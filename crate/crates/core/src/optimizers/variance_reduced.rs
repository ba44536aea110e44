//! Multi-stage variance-reduced methods: VITE (quasi-Newton steps along the
//! corrected direction) and SVRG (the same loop with `J` frozen at identity).

use super::config::{InnerRate, Method, OptimizerConfig, Pivot};
use super::single_loop::expect_method;
use super::trace::{Flow, Recorder, StageRecord, Trace};
use super::{initial_point, record_cadence};
use crate::curvature::{stochastic_curvature_pair, InverseHessian};
use crate::datasets::sample_index_set;
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::objectives::Objective;
use crate::rng::Rng;

/// Draws the inner-loop length `t in [1, m]` with
/// `P(t) = (1 - eta mu')^(m - t) / beta`.
///
/// Sampled by inverting the CDF of the truncated geometric variable
/// `k = m - t`. `eta mu' = 0` is the uniform limit.
pub fn sample_inner_length(m: usize, mu_prime: f64, eta: f64, rng: &mut Rng) -> Result<usize> {
    if m == 0 {
        return Err(Error::Config("inner-loop cap m must be >= 1".into()));
    }
    let x = eta * mu_prime;
    if !(x >= 0.0) || x >= 1.0 || !x.is_finite() {
        return Err(Error::InvalidConstants(format!("need 0 <= eta mu' < 1, got {x}")));
    }
    if m == 1 {
        return Ok(1);
    }
    let u = rng.uniform();
    let k = if x == 0.0 {
        (u * m as f64).floor()
    } else {
        // F(k) = (1 - q^(k+1)) / (1 - q^m), q = 1 - x.
        let ln_q = (-x).ln_1p();
        let total = -(m as f64 * ln_q).exp_m1();
        ((-u * total).ln_1p() / ln_q).floor()
    };
    let k = (k.max(0.0) as usize).min(m - 1);
    Ok(m - k)
}

/// `v_t = grad_B(w_t) - grad_B(w_tilde) + mu_tilde`
pub fn vite_direction(g_at_w: &[f64], g_at_pivot: &[f64], mu_tilde: &[f64]) -> Vector {
    g_at_w
        .iter()
        .zip(g_at_pivot)
        .zip(mu_tilde)
        .map(|((a, b), c)| (a - b) + c)
        .collect()
}

pub fn vite_run(obj: &Objective<'_>, cfg: &OptimizerConfig) -> Result<Trace> {
    expect_method(cfg, &[Method::Vite])?;
    multi_stage(obj, cfg)
}

/// SVRG: the VITE loop with the inverse Hessian frozen at the identity.
pub fn svrg_run(obj: &Objective<'_>, cfg: &OptimizerConfig) -> Result<Trace> {
    expect_method(cfg, &[Method::Svrg])?;
    let mut as_vite = cfg.clone();
    as_vite.method = Method::Vite;
    as_vite.freeze_curvature = true;
    as_vite.j0_scale = 1.0;
    let mut trace = multi_stage(obj, &as_vite)?;
    trace.method = Method::Svrg;
    Ok(trace)
}

fn multi_stage(obj: &Objective<'_>, cfg: &OptimizerConfig) -> Result<Trace> {
    cfg.validate(obj.n())?;
    let n = obj.n();
    let d = obj.dim();
    let eta = cfg.schedule.eta0;
    let mut rng = Rng::new(cfg.seed);
    let mut pivot = initial_point(d, cfg, &mut rng)?;

    let frozen = cfg.freeze_curvature;
    let mut hessian = InverseHessian::new(d, cfg.j0_scale)?;
    if !frozen {
        let (g, r) = cfg.bounds().expect("validated");
        hessian = hessian.with_bounds(g, r)?;
        hessian.enforce_bounds()?;
    }

    // With J frozen at the identity the spectral band is [1, 1].
    let rate_scale = if frozen {
        1.0
    } else {
        let (g, r) = cfg.bounds().expect("validated");
        match cfg.inner_rate {
            InnerRate::Gamma => g,
            InnerRate::Rho => r,
        }
    };
    let mu = match cfg.inner_mu {
        Some(mu) => mu,
        None => obj.estimate_constants()?.mu,
    };
    let mu_prime = rate_scale * mu;

    let mut rec = Recorder::new(record_cadence(cfg, n));
    let initial_value = rec.checked_value(obj, &pivot).unwrap_or(f64::NAN);
    if !rec.diverged {
        rec.push_value(obj.evals(), initial_value);
    }

    let mut stages = Vec::new();
    let mut iterations = 0u64;
    let mut gw = vec![0.0; d];
    let mut gp = vec![0.0; d];
    let budget_hit = |obj: &Objective<'_>| cfg.budget.is_some_and(|b| obj.evals() >= b);

    'stages: while !rec.diverged {
        if cfg.stages.is_some_and(|s| stages.len() >= s) || budget_hit(obj) {
            break;
        }
        let stage_start = obj.evals();
        let subset = match cfg.pivot {
            Pivot::Full => None,
            Pivot::Subset(c) => Some(sample_index_set(n, c, &mut rng)?),
        };
        let mut mu_tilde = obj.pivot_gradient(&pivot, subset.as_ref());
        if cfg.drop_pivot_gradient {
            mu_tilde.iter_mut().for_each(|v| *v = 0.0);
        }
        let inner_length = sample_inner_length(cfg.inner, mu_prime, eta, &mut rng)?;

        let mut w = pivot.clone();
        let mut steps = 0usize;
        let mut cut = false;
        for _ in 0..inner_length {
            if budget_hit(obj) {
                cut = true;
                break;
            }
            let b = sample_index_set(n, cfg.batch, &mut rng)?;
            let a = if frozen { None } else { Some(sample_index_set(n, cfg.curvature_batch, &mut rng)?) };

            obj.gradient_into(&w, &b, &mut gw);
            obj.gradient_into(&pivot, &b, &mut gp);
            let v = vite_direction(&gw, &gp, &mu_tilde);
            let step = hessian.apply(&v);
            let mut w_next = w.clone();
            linalg::axpy(-eta, &step, &mut w_next);

            if let Some(a) = a.as_ref() {
                let pair = stochastic_curvature_pair(obj, &w, &w_next, a);
                if hessian.update(&pair) {
                    hessian.enforce_bounds()?;
                }
            }
            w = w_next;
            steps += 1;
            iterations += 1;

            if !linalg::all_finite(&w) {
                rec.diverged = true;
                break 'stages;
            }
            if rec.observe(obj, &w, false) == Flow::Diverged {
                break 'stages;
            }
        }

        pivot = w;
        let Some(value) = rec.checked_value(obj, &pivot) else { break };
        rec.push_value(obj.evals(), value);
        stages.push(StageRecord { inner_length, steps, cost: obj.evals() - stage_start, value });
        if cut {
            break;
        }
    }

    Ok(Trace {
        method: cfg.method,
        seed: cfg.seed,
        points: rec.points,
        final_w: pivot,
        diverged: rec.diverged,
        iterations,
        initial_value,
        stages,
        curvature_skips: hessian.skipped_updates(),
    })
}
