//! Convergence constants of the variance-reduced quasi-Newton scheme and
//! empirical checks of the bounds they come from.
//!
//! With `mu' = gamma mu`, `L' = rho L`, a constant step `0 < eta < mu'/(2 L'^2)`
//! and inner cap `m`, the expected suboptimality of the stage pivots contracts
//! geometrically with factor
//!
//! ```text
//! alpha = (1 - eta mu')^m / (beta eta (mu' - 2 L'^2 eta)) + 2 L'^2 eta / (mu' - 2 L'^2 eta)
//! beta  = sum_{k=0}^{m-1} (1 - eta mu')^k
//! ```

use std::fmt::Write as _;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::datasets::synth_quadratic;
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::objectives::{LossKind, Objective};
use crate::optimizers::{sample_inner_length, vite_run, Method, OptimizerConfig, StepSchedule};
use crate::rng::Rng;

/// Largest dataset for which index sets are enumerated exhaustively.
pub const ENUMERATION_LIMIT: usize = 12;

/// Multiplicative slack on the contraction envelope for finite-seed means.
pub const CERTIFICATE_SLACK: f64 = 1.2;

/// Suboptimality below which stages are no longer checked.
pub const SUBOPTIMALITY_FLOOR: f64 = 1e-12;

/// Fewest Monte-Carlo draws for which the weighting check issues a verdict.
pub const LEMMA1_MIN_SAMPLES: usize = 10_000;

fn check_rate(mu_prime: f64, eta: f64) -> Result<f64> {
    let x = eta * mu_prime;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidConstants(format!("need 0 < eta mu' < 1, got {x}")));
    }
    Ok(x)
}

/// `beta = sum_{k=0}^{m-1} (1 - eta mu')^k`, evaluated as `-expm1(m ln(1 - x)) / x`.
pub fn compute_beta(m: usize, mu_prime: f64, eta: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidConstants("m must be >= 1".into()));
    }
    let x = check_rate(mu_prime, eta)?;
    Ok(-(m as f64 * (-x).ln_1p()).exp_m1() / x)
}

/// Largest admissible step, `mu' / (2 L'^2)` (exclusive).
pub fn step_limit(mu_prime: f64, l_prime: f64) -> f64 {
    mu_prime / (2.0 * l_prime * l_prime)
}

/// The `m`-independent part of `alpha`, `2 L'^2 eta / (mu' - 2 L'^2 eta)`.
pub fn alpha_floor(eta: f64, mu_prime: f64, l_prime: f64) -> Result<f64> {
    let limit = step_limit(mu_prime, l_prime);
    if !(eta > 0.0 && eta < limit) {
        return Err(Error::StepPrecondition { eta, limit });
    }
    let two_l2_eta = 2.0 * l_prime * l_prime * eta;
    Ok(two_l2_eta / (mu_prime - two_l2_eta))
}

/// Contraction factor `alpha(m, eta, mu', L')`.
pub fn compute_alpha(m: usize, eta: f64, mu_prime: f64, l_prime: f64) -> Result<f64> {
    if !(mu_prime > 0.0) || !(l_prime > 0.0) {
        return Err(Error::InvalidConstants(format!("need mu' > 0 and L' > 0, got {mu_prime}, {l_prime}")));
    }
    let floor = alpha_floor(eta, mu_prime, l_prime)?;
    let beta = compute_beta(m, mu_prime, eta)?;
    let denom = mu_prime - 2.0 * l_prime * l_prime * eta;
    let decay = (m as f64 * (-eta * mu_prime).ln_1p()).exp();
    Ok(decay / (beta * eta * denom) + floor)
}

/// Smallest `m` with `alpha(m) <= target`.
pub fn min_m_for_contraction(eta: f64, mu_prime: f64, l_prime: f64, target: f64) -> Result<usize> {
    let floor = alpha_floor(eta, mu_prime, l_prime)?;
    if !(target > floor) {
        return Err(Error::Infeasible { target, floor });
    }
    let alpha = |m: usize| compute_alpha(m, eta, mu_prime, l_prime);
    if alpha(1)? <= target {
        return Ok(1);
    }
    // alpha is decreasing in m: double until feasible, then bisect.
    let mut lo = 1usize;
    let mut hi = 2usize;
    while alpha(hi)? > target {
        lo = hi;
        hi = hi.checked_mul(2).ok_or(Error::Infeasible { target, floor })?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if alpha(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `x` to six decimals with trailing zeros dropped, e.g. `11.5`.
pub fn display_rounded(x: f64) -> String {
    let s = format!("{x:.6}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Objective, step and spectral constants of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    pub mu: f64,
    pub l: f64,
    pub gamma: f64,
    pub rho: f64,
    pub eta: f64,
    pub m: usize,
}

impl TheoryConstants {
    pub fn new(mu: f64, l: f64, gamma: f64, rho: f64, eta: f64, m: usize) -> Result<Self> {
        if !(mu > 0.0 && mu <= l && l.is_finite()) {
            return Err(Error::InvalidConstants(format!("need 0 < mu <= L, got mu = {mu}, L = {l}")));
        }
        linalg::check_bounds(gamma, rho)?;
        if !(eta > 0.0) || m == 0 {
            return Err(Error::InvalidConstants(format!("need eta > 0 and m >= 1, got {eta}, {m}")));
        }
        let c = Self { mu, l, gamma, rho, eta, m };
        debug_assert!(gamma > 1.0 || c.mu_prime() <= mu);
        debug_assert!(rho < 1.0 || c.l_prime() >= l);
        Ok(c)
    }

    /// Constants with `gamma = rho = 1`, so `mu' = mu` and `L' = L`.
    pub fn rescaled(mu_prime: f64, l_prime: f64, eta: f64, m: usize) -> Result<Self> {
        Self::new(mu_prime, l_prime, 1.0, 1.0, eta, m)
    }

    pub fn mu_prime(&self) -> f64 {
        self.gamma * self.mu
    }

    pub fn l_prime(&self) -> f64 {
        self.rho * self.l
    }

    pub fn step_limit(&self) -> f64 {
        step_limit(self.mu_prime(), self.l_prime())
    }

    pub fn beta(&self) -> Result<f64> {
        compute_beta(self.m, self.mu_prime(), self.eta)
    }

    pub fn alpha(&self) -> Result<f64> {
        compute_alpha(self.m, self.eta, self.mu_prime(), self.l_prime())
    }

    /// Errors unless the step is admissible and `alpha < 1`.
    pub fn check_preconditions(&self) -> Result<f64> {
        let alpha = self.alpha()?;
        if !(alpha < 1.0) {
            return Err(Error::CertificateRefused(format!("no contraction (α = {})", display_rounded(alpha))));
        }
        Ok(alpha)
    }
}

/// Exact first and second moments of `v_t` over every index set of one size.
#[derive(Debug, Clone)]
pub struct DirectionMoments {
    pub mean: Vector,
    /// `E ||v - E v||^2`
    pub variance: f64,
    /// `E ||v||^2`
    pub second_moment: f64,
    pub sets: usize,
}

fn enumerate_sets(n: usize, batch: usize) -> Result<impl Iterator<Item = Vec<usize>>> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { n, limit: ENUMERATION_LIMIT });
    }
    if batch == 0 || batch > n {
        return Err(Error::InvalidSize { k: batch, n });
    }
    Ok((0..n).combinations(batch))
}

/// Enumerates `v_B = grad_B(w) - grad_B(w_tilde) + grad f(w_tilde)` over all
/// `B` of size `batch`, with a full-data pivot.
pub fn direction_moments(obj: &Objective<'_>, w: &[f64], w_tilde: &[f64], batch: usize) -> Result<DirectionMoments> {
    let sets: Vec<Vec<usize>> = enumerate_sets(obj.n(), batch)?.collect();
    let mu_tilde = obj.full_gradient(w_tilde);
    let dirs: Vec<Vector> = sets
        .iter()
        .map(|b| crate::optimizers::vite_direction(&obj.gradient(w, b), &obj.gradient(w_tilde, b), &mu_tilde))
        .collect();
    let k = dirs.len() as f64;
    let mut mean = vec![0.0; obj.dim()];
    for v in &dirs {
        linalg::axpy(1.0 / k, v, &mut mean);
    }
    let variance = dirs.iter().map(|v| linalg::norm_sq(&linalg::sub(v, &mean))).sum::<f64>() / k;
    let second_moment = dirs.iter().map(|v| linalg::norm_sq(v)).sum::<f64>() / k;
    Ok(DirectionMoments { mean, variance, second_moment, sets: dirs.len() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2Outcome {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares `E ||v_t||^2` (exact enumeration) with
/// `4 L (f(w_t) - f* + f(w_tilde) - f*)`, `L` the component smoothness constant.
pub fn lemma2_check(obj: &Objective<'_>, w: &[f64], w_tilde: &[f64], batch: usize, w_star: &[f64]) -> Result<Lemma2Outcome> {
    let m = direction_moments(obj, w, w_tilde, batch)?;
    let f_star = obj.full_value(w_star);
    let gap = (obj.full_value(w) - f_star) + (obj.full_value(w_tilde) - f_star);
    let rhs = 4.0 * obj.component_lipschitz() * gap;
    let lhs = m.second_moment;
    Ok(Lemma2Outcome { lhs, rhs, holds: lhs <= rhs + 1e-9 })
}

/// Monte-Carlo check of the stage-averaging identity for a frozen inner sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Report {
    /// Mean of `f(w_{t_j})` over sampled `t_j`.
    pub lhs: f64,
    pub std_error: f64,
    pub samples: usize,
    /// `(1/beta) sum_{t=0}^{m-1} tau_t f(w_t)`
    pub rhs_current: f64,
    /// `(1/beta) sum_{t=0}^{m-1} tau_t f(w_{t+1})`
    pub rhs_next: f64,
    pub gap_current: f64,
    pub gap_next: f64,
    /// Whether each convention lies within three standard errors; `None` below
    /// [`LEMMA1_MIN_SAMPLES`] draws.
    pub within_current: Option<bool>,
    pub within_next: Option<bool>,
}

/// `values[t] = f(w_t)` for `t = 0..=m`.
pub fn lemma1_weighting_check(values: &[f64], mu_prime: f64, eta: f64, m: usize, samples: usize, rng: &mut Rng) -> Result<Lemma1Report> {
    if values.len() != m + 1 {
        return Err(Error::DimensionMismatch { expected: m + 1, got: values.len() });
    }
    if samples == 0 {
        return Err(Error::InvalidSize { k: 0, n: 0 });
    }
    let beta = compute_beta(m, mu_prime, eta)?;
    let q_ln = (-eta * mu_prime).ln_1p();
    let tau = |t: usize| ((m - t - 1) as f64 * q_ln).exp();
    let rhs_current = (0..m).map(|t| tau(t) * values[t]).sum::<f64>() / beta;
    let rhs_next = (0..m).map(|t| tau(t) * values[t + 1]).sum::<f64>() / beta;

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let f = values[sample_inner_length(m, mu_prime, eta, rng)?];
        sum += f;
        sum_sq += f * f;
    }
    let k = samples as f64;
    let lhs = sum / k;
    let var = (sum_sq / k - lhs * lhs).max(0.0);
    let std_error = (var / k).sqrt();
    let verdict = |gap: f64| (samples >= LEMMA1_MIN_SAMPLES).then(|| gap.abs() <= 3.0 * std_error + 1e-12 * lhs.abs());
    let gap_current = lhs - rhs_current;
    let gap_next = lhs - rhs_next;
    Ok(Lemma1Report {
        lhs,
        std_error,
        samples,
        rhs_current,
        rhs_next,
        gap_current,
        gap_next,
        within_current: verdict(gap_current),
        within_next: verdict(gap_next),
    })
}

/// Empirical check of `E[f(w_tilde_s) - f*] <= alpha^s (f(w_0) - f*)`.
#[derive(Debug, Clone)]
pub struct ContractionCertificate {
    pub constants: TheoryConstants,
    pub alpha: f64,
    pub seeds: usize,
    /// Mean suboptimality per stage, stage 0 first.
    pub mean_suboptimality: Vec<f64>,
    /// `CERTIFICATE_SLACK * alpha^s * Delta_0`
    pub envelope: Vec<f64>,
    /// Stages compared against the envelope (those above the floor).
    pub checked_stages: usize,
    /// Geometric-mean per-stage ratio over the checked stages.
    pub fitted_ratio: f64,
    pub passed: bool,
}

/// Builds a certificate from per-seed stage values `f(w_tilde_s)`.
///
/// Refuses (rather than fails) when fewer than 20 seeds are supplied or the
/// constants violate the step bound or give `alpha >= 1`.
pub fn certify_contraction(stage_values: &[Vec<f64>], f_star: f64, constants: TheoryConstants) -> Result<ContractionCertificate> {
    if stage_values.len() < 20 {
        return Err(Error::CertificateRefused(format!("need at least 20 seeds, got {}", stage_values.len())));
    }
    let alpha = constants.check_preconditions()?;
    let stages = stage_values.iter().map(Vec::len).min().unwrap_or(0);
    if stages == 0 {
        return Err(Error::CertificateRefused("runs recorded no stages".into()));
    }
    let k = stage_values.len() as f64;
    let mean_suboptimality: Vec<f64> = (0..stages)
        .map(|s| stage_values.iter().map(|run| (run[s] - f_star).max(0.0)).sum::<f64>() / k)
        .collect();
    let delta0 = mean_suboptimality[0];
    let envelope: Vec<f64> = (0..stages).map(|s| CERTIFICATE_SLACK * alpha.powi(s as i32) * delta0).collect();

    let mut checked = 0usize;
    let mut passed = true;
    for s in 0..stages {
        if mean_suboptimality[s] < SUBOPTIMALITY_FLOOR {
            break;
        }
        checked += 1;
        if mean_suboptimality[s] > envelope[s] {
            passed = false;
        }
    }
    let last = checked.saturating_sub(1);
    let fitted_ratio = if last == 0 || delta0 == 0.0 {
        f64::NAN
    } else {
        (mean_suboptimality[last] / delta0).powf(1.0 / last as f64)
    };
    Ok(ContractionCertificate {
        constants,
        alpha,
        seeds: stage_values.len(),
        mean_suboptimality,
        envelope,
        checked_stages: checked,
        fitted_ratio,
        passed,
    })
}

impl ContractionCertificate {
    /// Plain-text report: constants, per-stage table, verdict.
    pub fn report(&self) -> String {
        let c = &self.constants;
        let mut out = String::new();
        writeln!(out, "constants: mu = {}, L = {}, gamma = {}, rho = {}, eta = {}, m = {}", c.mu, c.l, c.gamma, c.rho, c.eta, c.m).unwrap();
        writeln!(out, "rescaled: mu' = {}, L' = {}, step limit = {}", c.mu_prime(), c.l_prime(), c.step_limit()).unwrap();
        writeln!(out, "alpha = {:.6}, seeds = {}, fitted ratio = {:.6}", self.alpha, self.seeds, self.fitted_ratio).unwrap();
        writeln!(out, "{:>5}  {:>14}  {:>14}  {}", "stage", "mean_subopt", "envelope", "ok").unwrap();
        for (s, (m, e)) in self.mean_suboptimality.iter().zip(&self.envelope).enumerate() {
            let status = if s >= self.checked_stages {
                "floor"
            } else if m <= e {
                "yes"
            } else {
                "NO"
            };
            writeln!(out, "{s:>5}  {m:>14.6e}  {e:>14.6e}  {status}").unwrap();
        }
        writeln!(out, "verdict: {}", if self.passed { "PASS" } else { "FAIL" }).unwrap();
        out
    }
}

/// Least-squares quadratic and run matrix on which the certificate is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadraticFixture {
    pub dim: usize,
    pub data_seed: u64,
    pub seeds: usize,
    pub stages: usize,
    pub batch: usize,
    pub init_scale: f64,
}

impl Default for QuadraticFixture {
    fn default() -> Self {
        Self { dim: 2, data_seed: 0, seeds: 24, stages: 25, batch: 1, init_scale: 1.0 }
    }
}

/// Runs VITE on `synth_quadratic(dim, mu, L)` with the band, step and inner
/// cap of `constants`, one run per seed, and certifies the stage pivots.
///
/// `drop_pivot_gradient` sabotages the variance reduction (negative control).
pub fn certify_on_quadratic(constants: TheoryConstants, fixture: &QuadraticFixture, drop_pivot_gradient: bool) -> Result<ContractionCertificate> {
    constants.check_preconditions()?;
    let q = synth_quadratic(fixture.dim, constants.mu, constants.l, fixture.data_seed)?;
    let f_star = Objective::new(LossKind::LeastSquares, 0.0, &q.data)?.full_value(&q.w_star);
    let mut runs = Vec::with_capacity(fixture.seeds);
    for seed in 0..fixture.seeds as u64 {
        let obj = Objective::new(LossKind::LeastSquares, 0.0, &q.data)?;
        let mut cfg = OptimizerConfig::new(Method::Vite, StepSchedule::constant(constants.eta));
        cfg.gamma = Some(constants.gamma);
        cfg.rho = Some(constants.rho);
        cfg.inner = constants.m;
        cfg.stages = Some(fixture.stages);
        cfg.batch = fixture.batch;
        cfg.curvature_batch = fixture.batch;
        cfg.inner_mu = Some(constants.mu);
        cfg.init_scale = fixture.init_scale;
        cfg.drop_pivot_gradient = drop_pivot_gradient;
        cfg.seed = seed;
        let trace = vite_run(&obj, &cfg)?;
        if trace.diverged {
            return Err(Error::CertificateRefused(format!("run with seed {seed} diverged")));
        }
        runs.push(trace.stage_values());
    }
    certify_contraction(&runs, f_star, constants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn beta_examples() {
        assert_eq!(compute_beta(1, 0.5, 1.0).unwrap(), 1.0);
        assert_relative_eq!(compute_beta(2, 0.5, 1.0).unwrap(), 1.5, max_relative = 1e-15);
        let closed = (1.0 - 0.9f64.powi(50)) / 0.1;
        assert_relative_eq!(compute_beta(50, 1.0, 0.1).unwrap(), closed, max_relative = 1e-13);
        assert!((compute_beta(50, 1.0, 0.1).unwrap() - 9.9485).abs() < 1e-4);
        assert!(compute_beta(5, 1.0, 1.0).is_err());
    }

    #[test]
    fn beta_matches_direct_sum_for_tiny_rates() {
        let (m, x) = (1000usize, 1e-9);
        let direct: f64 = (0..m).map(|k| (1.0f64 - x).powi(k as i32)).sum();
        assert_relative_eq!(compute_beta(m, x, 1.0).unwrap(), direct, max_relative = 1e-12);
    }

    #[test]
    fn alpha_examples() {
        let direct = 0.9f64.powi(50) / (compute_beta(50, 1.0, 0.1).unwrap() * 0.1 * 0.8) + 0.25;
        let a = compute_alpha(50, 0.1, 1.0, 1.0).unwrap();
        assert_relative_eq!(a, direct, max_relative = 1e-13);
        assert!((a - 0.2565).abs() < 5e-5, "alpha = {a}");
        assert_relative_eq!(compute_alpha(1, 0.1, 1.0, 1.0).unwrap(), 11.5, max_relative = 1e-13);
        assert!(compute_alpha(50, 1e-6, 1.0, 1.0).unwrap() > compute_alpha(50, 1e-2, 1.0, 1.0).unwrap());
    }

    #[test]
    fn step_bound_is_strict() {
        assert!(matches!(compute_alpha(50, 0.5, 1.0, 1.0), Err(Error::StepPrecondition { .. })));
        assert!(matches!(compute_alpha(50, 0.6, 1.0, 1.0), Err(Error::StepPrecondition { .. })));
        assert!(compute_alpha(50, 0.4999, 1.0, 1.0).is_ok());
    }

    #[test]
    fn min_m_brackets() {
        let m = min_m_for_contraction(0.1, 1.0, 1.0, 0.5).unwrap();
        assert!(compute_alpha(m, 0.1, 1.0, 1.0).unwrap() <= 0.5);
        assert!(compute_alpha(m - 1, 0.1, 1.0, 1.0).unwrap() > 0.5);
        // Linear scan oracle.
        let scan = (1..10_000).find(|&k| compute_alpha(k, 0.1, 1.0, 1.0).unwrap() <= 0.5).unwrap();
        assert_eq!(m, scan);
        assert!(matches!(min_m_for_contraction(0.1, 1.0, 1.0, 0.2), Err(Error::Infeasible { .. })));
        assert!(matches!(min_m_for_contraction(0.1, 1.0, 1.0, 0.25), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn alpha_monotonicity() {
        // Decreasing in m.
        let mut prev = f64::INFINITY;
        for m in 1..400 {
            let a = compute_alpha(m, 0.1, 1.0, 1.0).unwrap();
            // Beyond m ~ 250 the decaying term is below one ulp of the floor.
            assert!(if m < 200 { a < prev } else { a <= prev });
            prev = a;
        }
        // Increasing in eta to the right of its grid minimizer.
        let grid: Vec<f64> = (1..2000).map(|k| 0.5 * k as f64 / 2000.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&e| compute_alpha(50, e, 1.0, 1.0).unwrap()).collect();
        let argmin = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(argmin > 0 && argmin < grid.len() - 1);
        for w in vals[argmin..].windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in vals[..=argmin].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn remark_step_bound_identity() {
        // gamma = L, rho = mu: mu' = L mu, L' = mu L, so mu'/(2 L'^2) = 1/(2 mu L).
        for &(mu, l) in &[(0.1, 2.0), (1.0, 1.0), (1e-3, 50.0)] {
            let c = TheoryConstants { mu, l, gamma: l, rho: mu, eta: 1e-3, m: 1 };
            assert_relative_eq!(c.step_limit(), 1.0 / (2.0 * mu * l), max_relative = 1e-14);
        }
    }

    #[test]
    fn constants_validation() {
        assert!(TheoryConstants::new(2.0, 1.0, 1.0, 1.0, 0.1, 5).is_err());
        assert!(TheoryConstants::new(1.0, 1.0, 2.0, 1.0, 0.1, 5).is_err());
        let c = TheoryConstants::new(0.5, 4.0, 0.5, 2.0, 0.001, 10).unwrap();
        assert_eq!((c.mu_prime(), c.l_prime()), (0.25, 8.0));
        assert!(c.mu_prime() <= c.mu && c.l_prime() >= c.l);
        let c = TheoryConstants::rescaled(1.0, 1.0, 0.1, 1).unwrap();
        assert!(matches!(c.check_preconditions(), Err(Error::CertificateRefused(_))));
    }

    #[test]
    fn lemma1_degenerate_and_two_point() {
        let mut rng = Rng::new(5);
        let r = lemma1_weighting_check(&[3.0, 7.0], 0.3, 0.5, 1, 100, &mut rng).unwrap();
        assert_eq!(r.lhs, 7.0);
        assert_eq!(r.rhs_next, 7.0);
        assert_eq!(r.rhs_current, 3.0);
        assert_eq!(r.within_next, None);

        // m = 2, 1 - eta mu' = 0.5: E f(w_tilde) = f(w1)/3 + 2 f(w2)/3.
        let values = [10.0, 4.0, 1.0];
        let r = lemma1_weighting_check(&values, 0.5, 1.0, 2, 50_000, &mut rng).unwrap();
        assert_relative_eq!(r.rhs_next, 4.0 / 3.0 + 2.0 / 3.0, max_relative = 1e-14);
        assert_eq!(r.within_next, Some(true));
        assert_eq!(r.within_current, Some(false));
    }

    #[test]
    fn certificate_stage_zero_and_refusals() {
        let c = TheoryConstants::rescaled(1.0, 1.0, 0.1, 50).unwrap();
        let alpha = c.alpha().unwrap();
        let runs: Vec<Vec<f64>> = (0..20).map(|_| vec![1.0, 0.5 * alpha, 0.25 * alpha * alpha]).collect();
        let cert = certify_contraction(&runs, 0.0, c).unwrap();
        assert!(cert.passed);
        assert_eq!(cert.mean_suboptimality[0], 1.0);
        assert!(cert.mean_suboptimality[0] <= cert.envelope[0]);
        assert!(cert.report().contains("verdict: PASS"));

        let stuck: Vec<Vec<f64>> = (0..20).map(|_| vec![1.0, 1.0, 1.0]).collect();
        assert!(!certify_contraction(&stuck, 0.0, c).unwrap().passed);

        assert!(matches!(certify_contraction(&runs[..19], 0.0, c), Err(Error::CertificateRefused(_))));
        let bad = TheoryConstants::rescaled(1.0, 1.0, 0.1, 1).unwrap();
        assert!(matches!(certify_contraction(&runs, 0.0, bad), Err(Error::CertificateRefused(_))));
    }

    #[test]
    fn certificate_stops_at_floor() {
        let c = TheoryConstants::rescaled(1.0, 1.0, 0.1, 50).unwrap();
        let runs: Vec<Vec<f64>> = (0..20).map(|_| vec![1.0, 0.1, 1e-13, 1e-13]).collect();
        let cert = certify_contraction(&runs, 0.0, c).unwrap();
        assert_eq!(cert.checked_stages, 2);
        assert!(cert.passed);
    }
}
