//! Inverse-Hessian approximation: BFGS updates from sampled curvature pairs,
//! spectral-band enforcement, and the identity-biased step direction.

use std::io::Write;

use log::debug;

use crate::datasets::IndexSet;
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix, Vector};
use crate::objectives::Objective;

/// Relative curvature threshold: updates need `y^T s > CURVATURE_EPS * |s| |y|`.
pub const CURVATURE_EPS: f64 = 1e-12;

/// Displacement pair `(s, y_hat)` with its curvature `y_hat^T s`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub s: Vector,
    pub y: Vector,
    pub curvature: f64,
}

impl CurvaturePair {
    pub fn new(s: Vector, y: Vector) -> Self {
        let curvature = linalg::dot(&y, &s);
        Self { s, y, curvature }
    }

    /// `s = 0`: no information about curvature.
    pub fn is_degenerate(&self) -> bool {
        self.s.iter().all(|&v| v == 0.0)
    }

    /// Whether the pair passes the curvature test and may update a BFGS matrix.
    pub fn is_acceptable(&self) -> bool {
        let floor = CURVATURE_EPS * linalg::norm(&self.s) * linalg::norm(&self.y);
        self.curvature > floor && self.curvature.is_finite()
    }
}

/// Forms `s = w_next - w` and `y_hat = grad_A(w_next) - grad_A(w)` over the
/// same index set. Counts `2 |A|` component gradients.
pub fn stochastic_curvature_pair(obj: &Objective<'_>, w: &[f64], w_next: &[f64], a: &IndexSet) -> CurvaturePair {
    let g_next = obj.gradient(w_next, a);
    let g_prev = obj.gradient(w, a);
    CurvaturePair::new(linalg::sub(w_next, w), linalg::sub(&g_next, &g_prev))
}

/// Rank-two BFGS inverse update
/// `J' = (I - s y^T / y^T s) J (I - y s^T / y^T s) + s s^T / y^T s`.
///
/// Returns `None` when the pair fails the curvature test.
pub fn bfgs_update(j: &SymMatrix, pair: &CurvaturePair) -> Option<SymMatrix> {
    if !pair.is_acceptable() {
        return None;
    }
    let r = 1.0 / pair.curvature;
    let jy = j.mul_vec(&pair.y);
    let yjy = linalg::dot(&pair.y, &jy);
    let ss_coef = r * r * yjy + r;
    let s = &pair.s;
    Some(SymMatrix::from_upper_fn(j.dim(), |a, b| {
        j.get(a, b) - r * (s[a] * jy[b] + jy[a] * s[b]) + ss_coef * s[a] * s[b]
    }))
}

/// `(J + gamma I) g`
pub fn res_direction(j: &SymMatrix, gamma: f64, g: &[f64]) -> Vector {
    let mut out = j.mul_vec(g);
    linalg::axpy(gamma, g, &mut out);
    out
}

/// Owned inverse-Hessian estimate for one run.
#[derive(Debug, Clone)]
pub struct InverseHessian {
    j: SymMatrix,
    bounds: Option<(f64, f64)>,
    j0_scale: f64,
    accepted: u64,
    skipped: u64,
    projected: u64,
}

impl InverseHessian {
    /// `J_0 = j0_scale * I`.
    pub fn new(dim: usize, j0_scale: f64) -> Result<Self> {
        if !(j0_scale > 0.0) || !j0_scale.is_finite() {
            return Err(Error::InvalidConstants(format!("j0_scale must be > 0, got {j0_scale}")));
        }
        Ok(Self {
            j: SymMatrix::scaled_identity(dim, j0_scale),
            bounds: None,
            j0_scale,
            accepted: 0,
            skipped: 0,
            projected: 0,
        })
    }

    pub fn with_bounds(mut self, gamma: f64, rho: f64) -> Result<Self> {
        linalg::check_bounds(gamma, rho)?;
        self.bounds = Some((gamma, rho));
        Ok(self)
    }

    pub fn from_matrix(j: SymMatrix) -> Self {
        Self { j, bounds: None, j0_scale: 1.0, accepted: 0, skipped: 0, projected: 0 }
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.j
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    pub fn j0_scale(&self) -> f64 {
        self.j0_scale
    }

    pub fn accepted_updates(&self) -> u64 {
        self.accepted
    }

    pub fn skipped_updates(&self) -> u64 {
        self.skipped
    }

    /// Number of times `enforce_bounds` actually reshaped the spectrum.
    pub fn projections(&self) -> u64 {
        self.projected
    }

    pub fn apply(&self, g: &[f64]) -> Vector {
        self.j.mul_vec(g)
    }

    /// Applies the BFGS update in place; returns `false` (and logs) when skipped.
    pub fn update(&mut self, pair: &CurvaturePair) -> bool {
        match bfgs_update(&self.j, pair) {
            Some(next) => {
                self.j = next;
                self.accepted += 1;
                true
            }
            None => {
                self.skipped += 1;
                debug!(
                    "curvature skip: y^T s = {:e}, |s| = {:e}, |y| = {:e}",
                    pair.curvature,
                    linalg::norm(&pair.s),
                    linalg::norm(&pair.y)
                );
                false
            }
        }
    }

    /// Projects the spectrum into the configured `[gamma, rho]` band.
    ///
    /// Matrices already strictly inside the band are left bit-for-bit unchanged.
    pub fn enforce_bounds(&mut self) -> Result<()> {
        let (gamma, rho) = self.bounds.ok_or(Error::BoundsUnset)?;
        if linalg::strictly_within_band(&self.j, gamma, rho) {
            return Ok(());
        }
        self.j = linalg::project_spectrum(&self.j, gamma, rho)?;
        self.projected += 1;
        Ok(())
    }

    /// Text snapshot: a header line `# inverse-hessian d=<d> gamma=<g> rho=<r>`
    /// (`none` when unbounded) followed by `d` whitespace-separated rows.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (g, r) = match self.bounds {
            Some((g, r)) => (format!("{g:e}"), format!("{r:e}")),
            None => ("none".into(), "none".into()),
        };
        writeln!(out, "# inverse-hessian d={} gamma={g} rho={r}", self.j.dim())?;
        for i in 0..self.j.dim() {
            let row: Vec<String> = self.j.row(i).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }
}
