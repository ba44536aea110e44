use vite_core::datasets::synth_quadratic;
use vite_core::linalg;
use vite_core::optimizers::{run, svrg_run, vite_run, Method, OptimizerConfig, Pivot, StepSchedule, Trace};
use vite_core::theory::direction_moments;
use vite_core::{Dataset, LossKind, Objective};

/// Two rows whose empirical Hessian is diag(1, 2), with w* = (1, 1).
fn diag_quadratic() -> Dataset {
    let rows = vec![vec![2f64.sqrt(), 0.0], vec![0.0, 2.0]];
    let targets = rows.iter().map(|r| linalg::dot(r, &[1.0, 1.0])).collect();
    Dataset::from_dense_rows(&rows, targets).unwrap()
}

fn config(method: Method, schedule: StepSchedule) -> OptimizerConfig {
    let mut c = OptimizerConfig::new(method, schedule);
    c.record_every = Some(1);
    c
}

fn run_fresh(data: &Dataset, cfg: &OptimizerConfig) -> Trace {
    let obj = Objective::new(LossKind::LeastSquares, 0.0, data).unwrap();
    run(&obj, cfg).unwrap()
}

#[test]
fn full_batch_sgd_contracts_at_the_closed_form_rate() {
    let data = diag_quadratic();
    let w_star = [1.0, 1.0];
    let mut prev = linalg::norm(&w_star);
    for iters in 1..=135u64 {
        let mut c = config(Method::Sgd, StepSchedule::constant(0.1));
        c.batch = 2;
        c.max_iters = Some(iters);
        let t = run_fresh(&data, &c);
        let err = linalg::norm(&linalg::sub(&t.final_w, &w_star));
        // Iterates are O(1), so rounding adds a few ulps of absolute error per step.
        assert!(err <= 0.9 * prev + 4.0 * f64::EPSILON, "iteration {iters}: {err} vs {prev}");
        prev = err;
    }
    assert!(prev <= 1e-6, "final error {prev}");
}

#[test]
fn huge_step_diverges() {
    let data = diag_quadratic();
    let mut c = config(Method::Sgd, StepSchedule::constant(1e3));
    c.batch = 2;
    c.max_iters = Some(100);
    let t = run_fresh(&data, &c);
    assert!(t.diverged);
    assert!(t.iterations < 100);
    assert!(t.points.iter().all(|p| p.objective.is_finite()));
}

#[test]
fn optimum_is_a_fixed_point_for_every_method() {
    let data = diag_quadratic();
    for method in [Method::Sgd, Method::Obfgs, Method::Res, Method::Svrg, Method::Vite] {
        let schedule = if method.is_variance_reduced() { StepSchedule::constant(0.1) } else { StepSchedule::t0_decay(0.1, 10.0) };
        let mut c = config(method, schedule);
        c.initial = Some(vec![1.0, 1.0]);
        c.gamma = Some(0.1);
        c.rho = Some(10.0);
        c.inner = 5;
        c.stages = Some(3);
        c.max_iters = Some(20);
        c.inner_mu = Some(1.0);
        let t = run_fresh(&data, &c);
        assert_eq!(t.final_w, vec![1.0, 1.0], "{method}");
        assert!(t.points.iter().all(|p| p.objective == 0.0));
    }
}

#[test]
fn frozen_obfgs_is_sgd() {
    let q = synth_quadratic(4, 0.5, 5.0, 3).unwrap();
    for seed in 0..5 {
        let mut sgd = config(Method::Sgd, StepSchedule::t0_decay(0.05, 100.0));
        sgd.batch = 3;
        sgd.max_iters = Some(200);
        sgd.seed = seed;
        sgd.init_scale = 1.0;
        let mut frozen = sgd.clone();
        frozen.method = Method::Obfgs;
        frozen.freeze_curvature = true;
        assert!(run_fresh(&q.data, &sgd).same_path(&run_fresh(&q.data, &frozen)), "seed {seed}");
    }
}

#[test]
fn res_with_inert_band_is_obfgs() {
    let q = synth_quadratic(4, 0.5, 5.0, 3).unwrap();
    for seed in 0..5 {
        let mut obfgs = config(Method::Obfgs, StepSchedule::t0_decay(0.05, 100.0));
        obfgs.batch = 3;
        obfgs.curvature_batch = 4;
        obfgs.max_iters = Some(200);
        obfgs.seed = seed;
        obfgs.init_scale = 1.0;
        let mut res = obfgs.clone();
        res.method = Method::Res;
        res.gamma = Some(1e-300);
        res.rho = Some(f64::INFINITY);
        let a = run_fresh(&q.data, &obfgs);
        let b = run_fresh(&q.data, &res);
        assert!(a.same_path(&b), "seed {seed}");
    }
}

#[test]
fn obfgs_beats_sgd_on_ill_conditioned_quadratic() {
    // L / mu = 1e3; both methods get the same step grid and full batches.
    let q = synth_quadratic(5, 0.01, 10.0, 6).unwrap();
    let n = q.data.n();
    let iterations_to = |method: Method, eta: f64| -> Option<u64> {
        let mut c = config(method, StepSchedule::constant(eta));
        c.batch = n;
        c.curvature_batch = n;
        c.max_iters = Some(20_000);
        c.init_scale = 1.0;
        c.seed = 1;
        let t = run_fresh(&q.data, &c);
        if t.diverged {
            return None;
        }
        let cost = c.step_cost();
        t.points.iter().find(|p| p.objective <= 1e-4).map(|p| p.grad_evals / cost)
    };
    let grid = [1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01];
    let best = |m| grid.iter().filter_map(|&eta| iterations_to(m, eta)).min();
    let sgd = best(Method::Sgd).expect("sgd reaches the threshold");
    let obfgs = best(Method::Obfgs).expect("obfgs reaches the threshold");
    assert!(obfgs < sgd, "obfgs {obfgs} vs sgd {sgd} iterations");
}

fn vite_config(seed: u64) -> OptimizerConfig {
    let mut c = config(Method::Vite, StepSchedule::constant(0.05));
    c.gamma = Some(0.2);
    c.rho = Some(5.0);
    c.inner = 10;
    c.stages = Some(5);
    c.batch = 5;
    c.curvature_batch = 5;
    c.seed = seed;
    c.init_scale = 1.0;
    c
}

#[test]
fn svrg_is_vite_with_identity() {
    let q = synth_quadratic(3, 0.5, 2.0, 9).unwrap();
    for seed in 0..10 {
        let mut frozen = vite_config(seed);
        frozen.freeze_curvature = true;
        let mut svrg = frozen.clone();
        svrg.method = Method::Svrg;
        let obj = Objective::new(LossKind::LeastSquares, 0.0, &q.data).unwrap();
        let a = vite_run(&obj, &frozen).unwrap();
        let obj = Objective::new(LossKind::LeastSquares, 0.0, &q.data).unwrap();
        let b = svrg_run(&obj, &svrg).unwrap();
        assert!(a.same_path(&b), "seed {seed}");
    }
}

#[test]
fn stage_costs_match_the_formula() {
    let q = synth_quadratic(10, 0.5, 2.0, 1).unwrap();
    assert_eq!(q.data.n(), 100);
    for seed in 0..10 {
        let t = run_fresh(&q.data, &vite_config(seed));
        assert_eq!(t.stages.len(), 5);
        for s in &t.stages {
            assert_eq!(s.steps, s.inner_length);
            assert_eq!(s.cost, 100 + s.inner_length as u64 * 20);
            assert!(s.cost <= 300);
        }
        let total: u64 = t.stages.iter().map(|s| s.cost).sum();
        assert_eq!(t.total_grad_evals(), total);
        assert!(total <= 1500);
    }
}

#[test]
fn subset_pivot_costs_its_size() {
    let q = synth_quadratic(10, 0.5, 2.0, 1).unwrap();
    let mut c = vite_config(3);
    c.pivot = Pivot::Subset(10);
    let t = run_fresh(&q.data, &c);
    for s in &t.stages {
        assert_eq!(s.cost, 10 + s.inner_length as u64 * 20);
    }
}

#[test]
fn budget_stops_runs() {
    let q = synth_quadratic(10, 0.5, 2.0, 1).unwrap();
    let mut c = vite_config(0);
    c.stages = None;
    c.budget = Some(1000);
    let t = run_fresh(&q.data, &c);
    assert!(t.total_grad_evals() >= 1000);
    assert!(t.total_grad_evals() < 1000 + c.step_cost() + 100);
}

#[test]
fn runs_are_bitwise_deterministic() {
    let q = synth_quadratic(4, 0.2, 3.0, 2).unwrap();
    for method in [Method::Sgd, Method::Obfgs, Method::Res, Method::Svrg, Method::Vite] {
        let schedule = if method.is_variance_reduced() { StepSchedule::constant(0.05) } else { StepSchedule::t0_decay(0.05, 10.0) };
        let mut c = vite_config(42);
        c.method = method;
        c.schedule = schedule;
        c.max_iters = Some(300);
        let a = run_fresh(&q.data, &c);
        let b = run_fresh(&q.data, &c);
        assert!(a.same_path(&b), "{method}");
        let mut other = c.clone();
        other.seed = 43;
        assert!(!a.same_path(&run_fresh(&q.data, &other)), "{method}: seed ignored");
    }
}

#[test]
fn trace_points_increase_and_stay_finite() {
    let q = synth_quadratic(4, 0.2, 3.0, 2).unwrap();
    let mut c = vite_config(1);
    c.record_every = None;
    let t = run_fresh(&q.data, &c);
    assert!(t.points.windows(2).all(|w| w[0].grad_evals < w[1].grad_evals));
    assert!(t.points.iter().all(|p| p.objective.is_finite()));
    assert_eq!(t.points[0].grad_evals, 0);
}

#[test]
fn res_makes_progress_on_ill_conditioned_quadratic() {
    let q = synth_quadratic(4, 0.05, 20.0, 2).unwrap();
    let obj = Objective::new(LossKind::LeastSquares, 0.0, &q.data).unwrap();
    let mut c = config(Method::Res, StepSchedule::t0_decay(0.05, 10.0));
    c.gamma = Some(0.1);
    c.rho = Some(4.0);
    c.max_iters = Some(300);
    c.curvature_batch = 3;
    c.init_scale = 1.0;
    let t = run(&obj, &c).unwrap();
    assert!(!t.diverged);
    assert!(t.final_objective().unwrap() < t.initial_value);
}

#[test]
fn direction_is_unbiased_and_collapses_at_pivot() {
    let rows: Vec<Vec<f64>> = vec![
        vec![1.0, 0.5],
        vec![-0.3, 2.0],
        vec![0.7, -1.1],
        vec![2.2, 0.1],
        vec![-1.5, -0.4],
        vec![0.2, 0.9],
    ];
    let data = Dataset::from_dense_rows(&rows, vec![1.0, -1.0, 1.0, 1.0, -1.0, -1.0]).unwrap();
    for kind in [LossKind::LeastSquares, LossKind::Logistic] {
        let obj = Objective::new(kind, 1e-2, &data).unwrap();
        let w = [0.4, -0.9];
        let w_tilde = [-0.2, 0.3];
        let grad = obj.full_gradient(&w);
        for batch in 1..=3 {
            let m = direction_moments(&obj, &w, &w_tilde, batch).unwrap();
            assert!(linalg::norm(&linalg::sub(&m.mean, &grad)) <= 1e-12, "{kind:?} |B| = {batch}");
            assert!(m.variance > 0.0);
            let at_pivot = direction_moments(&obj, &w_tilde, &w_tilde, batch).unwrap();
            assert!(at_pivot.variance <= 1e-30, "{kind:?} |B| = {batch}: {}", at_pivot.variance);
        }
    }
}
