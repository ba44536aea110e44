use proptest::prelude::*;
use vite_core::curvature::{bfgs_update, stochastic_curvature_pair, CurvaturePair, InverseHessian};
use vite_core::datasets::{synth_quadratic, IndexSet};
use vite_core::linalg::{self, project_spectrum, sym_eig_bounds, SymMatrix};
use vite_core::{Dataset, LossKind, Objective, Rng};

fn random_spd(d: usize, cond: f64, rng: &mut Rng) -> SymMatrix {
    let mut a = SymMatrix::zeros(d);
    let g: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.standard_normal()).collect()).collect();
    for i in 0..d {
        for j in i..d {
            let v: f64 = (0..d).map(|k| g[i][k] * g[j][k]).sum();
            a.set(i, j, v / d as f64);
        }
    }
    let (lo, hi) = sym_eig_bounds(&a).unwrap();
    // Rescale into [1, cond].
    let t = (cond - 1.0) / (hi - lo).max(1e-12);
    let mut out = a.shifted(-lo);
    for i in 0..d {
        for j in i..d {
            out.set(i, j, out.get(i, j) * t);
        }
    }
    out.shifted(1.0)
}

fn secant_error(j: &SymMatrix, pair: &CurvaturePair) -> f64 {
    linalg::norm(&linalg::sub(&j.mul_vec(&pair.y), &pair.s)) / linalg::norm(&pair.s)
}

#[test]
fn long_update_sequences_keep_secant_symmetry_and_definiteness() {
    let mut rng = Rng::new(17);
    for d in [2usize, 10] {
        let h = random_spd(d, 50.0, &mut rng);
        let mut j = InverseHessian::new(d, 1.0).unwrap();
        for step in 0..10_000 {
            let s: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
            let pair = CurvaturePair::new(s.clone(), h.mul_vec(&s));
            assert!(j.update(&pair), "d = {d}, step {step}: pair rejected");
            assert!(secant_error(j.matrix(), &pair) <= 1e-10, "d = {d}, step {step}");
            if step % 97 == 0 {
                assert!(j.matrix().is_positive_definite());
            }
        }
        assert!(j.matrix().asymmetry() <= 1e-12);
        assert!(sym_eig_bounds(j.matrix()).unwrap().0 > 0.0);
    }
}

#[test]
fn quadratic_termination_on_conjugate_directions() {
    // Exact pairs y = H s along d mutually H-conjugate directions (the steps of
    // exact-line-search BFGS on a quadratic): the secant condition is inherited
    // by every earlier pair, so after d updates J = H^{-1}.
    let d = 5;
    let mut rng = Rng::new(3);
    let h = random_spd(d, 20.0, &mut rng);
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for _ in 0..d {
        let mut s: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        for p in &dirs {
            let c = linalg::dot(&h.mul_vec(p), &s) / h.quad_form(p);
            linalg::axpy(-c, p, &mut s);
        }
        dirs.push(s);
    }
    let mut j = SymMatrix::identity(d);
    let mut pairs: Vec<CurvaturePair> = Vec::new();
    for s in dirs {
        let pair = CurvaturePair::new(s.clone(), h.mul_vec(&s));
        j = bfgs_update(&j, &pair).unwrap();
        pairs.push(pair);
        for p in &pairs {
            assert!(secant_error(&j, p) <= 1e-9);
        }
    }
    let mut hj = SymMatrix::zeros(d);
    for i in 0..d {
        for k in i..d {
            let v: f64 = (0..d).map(|l| h.get(i, l) * j.get(l, k)).sum();
            hj.set(i, k, v);
        }
    }
    assert!(hj.max_abs_diff(&SymMatrix::identity(d)) < 1e-9);
}

#[test]
fn sampled_y_is_unbiased_for_hessian_times_s() {
    // n = 3 least squares, |A| = 1: averaging y_hat over all singletons gives H s.
    let data = Dataset::from_dense_rows(&[vec![1.0, 2.0], vec![-0.5, 1.0], vec![3.0, 0.25]], vec![1.0, 0.0, -2.0]).unwrap();
    let obj = Objective::new(LossKind::LeastSquares, 0.01, &data).unwrap();
    let w = [0.3, -0.7];
    let w_next = [0.1, 0.4];
    let mut mean = vec![0.0; 2];
    for i in 0..3 {
        let pair = stochastic_curvature_pair(&obj, &w, &w_next, &IndexSet::from_vec(vec![i]));
        linalg::axpy(1.0 / 3.0, &pair.y, &mut mean);
    }
    let s = linalg::sub(&w_next, &w);
    let hs = obj.least_squares_hessian().mul_vec(&s);
    assert!(linalg::norm(&linalg::sub(&mean, &hs)) <= 1e-14);
    assert_eq!(obj.evals(), 6);
}

#[test]
fn bounded_updates_stay_in_band() {
    let q = synth_quadratic(4, 0.05, 20.0, 1).unwrap();
    let obj = Objective::new(LossKind::LeastSquares, 0.0, &q.data).unwrap();
    let mut j = InverseHessian::new(4, 1.0).unwrap().with_bounds(0.1, 5.0).unwrap();
    let mut rng = Rng::new(2);
    for _ in 0..500 {
        let w: Vec<f64> = (0..4).map(|_| rng.standard_normal()).collect();
        let w_next: Vec<f64> = w.iter().map(|v| v + 0.1 * rng.standard_normal()).collect();
        let a = vite_core::datasets::sample_index_set(obj.n(), 2, &mut rng).unwrap();
        if j.update(&stochastic_curvature_pair(&obj, &w, &w_next, &a)) {
            j.enforce_bounds().unwrap();
        }
        let (lo, hi) = sym_eig_bounds(j.matrix()).unwrap();
        assert!(lo >= 0.1 - 1e-9 && hi <= 5.0 + 1e-9, "[{lo}, {hi}]");
    }
}

fn sym_strategy(max_d: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_d).prop_flat_map(|d| {
        prop::collection::vec(-10.0f64..10.0, d * (d + 1) / 2).prop_map(move |upper| {
            let mut it = upper.into_iter();
            SymMatrix::from_upper_fn(d, |_, _| it.next().unwrap())
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_idempotent_and_lands_in_band(m in sym_strategy(6), gamma in 0.01f64..1.0, width in 1.0f64..50.0) {
        let rho = gamma * width;
        let once = project_spectrum(&m, gamma, rho).unwrap();
        let twice = project_spectrum(&once, gamma, rho).unwrap();
        prop_assert!(once.max_abs_diff(&twice) <= 1e-9 * rho);
        let (lo, hi) = sym_eig_bounds(&once).unwrap();
        prop_assert!(lo >= gamma - 1e-9 * rho && hi <= rho + 1e-9 * rho);
    }

    #[test]
    fn rayleigh_quotients_are_bracketed(m in sym_strategy(6), seed in any::<u64>()) {
        let (lo, hi) = sym_eig_bounds(&m).unwrap();
        let mut rng = Rng::new(seed);
        for _ in 0..20 {
            let v: Vec<f64> = (0..m.dim()).map(|_| rng.standard_normal()).collect();
            let nv = linalg::norm_sq(&v);
            if nv < 1e-12 { continue; }
            let r = m.quad_form(&v) / nv;
            let tol = 1e-10 * (lo.abs() + hi.abs() + 1.0);
            prop_assert!(r >= lo - tol && r <= hi + tol);
        }
    }

    #[test]
    fn accepted_updates_satisfy_secant_and_stay_pd(seed in any::<u64>(), d in 2usize..12, steps in 1usize..60) {
        let mut rng = Rng::new(seed);
        let mut j = SymMatrix::scaled_identity(d, 0.5 + rng.uniform());
        for _ in 0..steps {
            let s: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
            let noise: Vec<f64> = (0..d).map(|_| 0.3 * rng.standard_normal()).collect();
            let mut y = s.clone();
            linalg::axpy(1.0, &noise, &mut y);
            let pair = CurvaturePair::new(s, y);
            match bfgs_update(&j, &pair) {
                Some(next) => {
                    prop_assert!(pair.curvature > 0.0);
                    prop_assert!(secant_error(&next, &pair) <= 1e-10);
                    prop_assert!(next.is_positive_definite());
                    prop_assert!(next.asymmetry() == 0.0);
                    j = next;
                }
                None => prop_assert!(!pair.is_acceptable()),
            }
        }
    }
}
