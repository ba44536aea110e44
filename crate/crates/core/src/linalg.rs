//! Small dense linear algebra: vector helpers, symmetric matrices, and a
//! cyclic Jacobi eigensolver used for spectral bounds and projection.

use crate::error::{Error, Result};

/// Dense parameter-space vector.
pub type Vector = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Dense symmetric matrix in row-major storage.
///
/// Every constructor and mutator writes both `(i, j)` and `(j, i)`, so the
/// stored matrix is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = scale;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    /// Builds a matrix from rows, symmetrizing with the upper triangle.
    ///
    /// Rows must form a square matrix. Entries below the diagonal are taken
    /// from their mirrored position, so callers may pass any square input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            for j in i..dim {
                m.set(i, j, row[j]);
            }
        }
        Ok(m)
    }

    /// Builds a symmetric matrix from a generator evaluated on the upper triangle.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Writes `value` at `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
        self.data[j * self.dim + i] = value;
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vector {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    /// `v^T M v`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.data[i * self.dim + i] += shift;
        }
        m
    }

    /// Largest `|M[i][j] - M[j][i]|`. Zero for any matrix built through this API.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// True when the matrix admits a Cholesky factorization with strictly
    /// positive pivots, i.e. it is numerically positive definite.
    pub fn is_positive_definite(&self) -> bool {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = self.get(j, j);
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > 0.0) {
                return false;
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut acc = self.get(i, j);
                for k in 0..j {
                    acc -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = acc / ljj;
            }
        }
        true
    }
}

/// Eigendecomposition `M = V diag(values) V^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `k` (row-major, `vectors[i * d + k]`) is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> Vector {
        let d = self.values.len();
        (0..d).map(|i| self.vectors[i * d + k]).collect()
    }

    /// Reassembles `V diag(f(values)) V^T`.
    pub fn reassemble(&self, mut f: impl FnMut(f64) -> f64) -> SymMatrix {
        let d = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        SymMatrix::from_upper_fn(d, |i, j| {
            let mut acc = 0.0;
            for k in 0..d {
                acc += self.vectors[i * d + k] * mapped[k] * self.vectors[j * d + k];
            }
            acc
        })
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition.
pub fn sym_eigen(m: &SymMatrix) -> Result<SymEigen> {
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    let n = m.dim();
    let mut a = m.as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok(SymEigen { values: vec![0.0; n], vectors: v });
    }

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= f64::EPSILON * 1e-3 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Skip rotations that cannot change the diagonal at working precision.
                if apq.abs() <= f64::EPSILON * 1e-2 * (app.abs() + aqq.abs()).max(f64::MIN_POSITIVE) {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let values = (0..n).map(|i| a[i * n + i]).collect();
    Ok(SymEigen { values, vectors: v })
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eig_bounds(m: &SymMatrix) -> Result<(f64, f64)> {
    if m.dim() == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let eig = sym_eigen(m)?;
    let lo = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

pub fn check_bounds(gamma: f64, rho: f64) -> Result<()> {
    if !(gamma > 0.0) || !(gamma <= rho) {
        return Err(Error::InvalidBounds { gamma, rho });
    }
    Ok(())
}

/// Clips the spectrum of `m` into `[gamma, rho]`, keeping its eigenvectors.
pub fn project_spectrum(m: &SymMatrix, gamma: f64, rho: f64) -> Result<SymMatrix> {
    check_bounds(gamma, rho)?;
    let eig = sym_eigen(m)?;
    Ok(eig.reassemble(|v| v.clamp(gamma, rho)))
}

/// Cheap sufficient test that `gamma I < m < rho I` strictly, by two Cholesky
/// factorizations. A `false` result does not imply the band is violated.
pub fn strictly_within_band(m: &SymMatrix, gamma: f64, rho: f64) -> bool {
    if !m.is_finite() {
        return false;
    }
    let lower = m.shifted(-gamma);
    if !lower.is_positive_definite() {
        return false;
    }
    if rho.is_infinite() {
        return true;
    }
    let mut upper = m.clone();
    for i in 0..m.dim() {
        for j in i..m.dim() {
            let target = if i == j { rho - m.get(i, i) } else { -m.get(i, j) };
            upper.set(i, j, target);
        }
    }
    upper.is_positive_definite()
}
