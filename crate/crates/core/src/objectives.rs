//! Regularized empirical-risk objectives over a [`Dataset`].

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset, IndexSet, LabelMode};
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `f_i(w) = (w^T x_i - y_i)^2 / 2`
    LeastSquares,
    /// `f_i(w) = log(1 + exp(-y_i w^T x_i))`, labels in `{-1, +1}`.
    Logistic,
}

impl LossKind {
    /// Label convention the loss expects from the parser.
    pub fn label_mode(self) -> LabelMode {
        match self {
            LossKind::LeastSquares => LabelMode::Raw,
            LossKind::Logistic => LabelMode::Binary,
        }
    }
}

/// Largest dimension for which dense eigenvalue estimates are attempted.
pub const DENSE_DIM_LIMIT: usize = 2048;

/// Strong-convexity and smoothness constants of an objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub mu: f64,
    pub l: f64,
}

impl Constants {
    pub fn strongly_convex(&self) -> bool {
        self.mu > 0.0
    }
}

/// `f(w) = mean_i f_i(w) + (lambda / 2) ||w||^2` with a component-gradient counter.
///
/// Each `f_i` carries the full regularizer, so every component gradient
/// includes `lambda * w` and minibatch averages stay unbiased for `grad f`.
/// The counter lives in a `Cell`: one objective per run.
#[derive(Debug)]
pub struct Objective<'a> {
    kind: LossKind,
    lambda: f64,
    data: &'a Dataset,
    evals: Cell<u64>,
}

#[inline]
fn softplus_neg(t: f64) -> f64 {
    // log(1 + exp(-t)) = max(0, -t) + log(1 + exp(-|t|))
    (-t).max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `sigma(-t) = 1 / (1 + exp(t))`
#[inline]
fn sigmoid_neg(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

impl<'a> Objective<'a> {
    pub fn new(kind: LossKind, lambda: f64, data: &'a Dataset) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConstants(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { kind, lambda, data, evals: Cell::new(0) })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Component gradients evaluated so far.
    pub fn evals(&self) -> u64 {
        self.evals.get()
    }

    #[inline]
    fn loss(&self, i: usize, margin: f64) -> f64 {
        let y = self.data.target(i);
        match self.kind {
            LossKind::LeastSquares => 0.5 * (margin - y) * (margin - y),
            LossKind::Logistic => softplus_neg(y * margin),
        }
    }

    /// Derivative of the loss with respect to the margin `w^T x_i`.
    #[inline]
    fn loss_slope(&self, i: usize, margin: f64) -> f64 {
        let y = self.data.target(i);
        match self.kind {
            LossKind::LeastSquares => margin - y,
            LossKind::Logistic => -y * sigmoid_neg(y * margin),
        }
    }

    fn regularizer(&self, w: &[f64]) -> f64 {
        0.5 * self.lambda * linalg::norm_sq(w)
    }

    /// Average loss over `batch` plus the regularizer. Does not count evaluations.
    pub fn value(&self, w: &[f64], batch: &[usize]) -> f64 {
        assert!(!batch.is_empty(), "value over an empty index set");
        let sum: f64 = batch.iter().map(|&i| self.loss(i, self.data.row(i).dot(w))).sum();
        sum / batch.len() as f64 + self.regularizer(w)
    }

    pub fn full_value(&self, w: &[f64]) -> f64 {
        let sum: f64 = (0..self.n()).map(|i| self.loss(i, self.data.row(i).dot(w))).sum();
        sum / self.n() as f64 + self.regularizer(w)
    }

    /// Writes the averaged gradient over `batch` into `out` and counts `|batch|` evaluations.
    pub fn gradient_into(&self, w: &[f64], batch: &[usize], out: &mut [f64]) {
        assert!(!batch.is_empty(), "gradient over an empty index set");
        out.iter_mut().for_each(|o| *o = 0.0);
        for &i in batch {
            let row = self.data.row(i);
            row.axpy_into(self.loss_slope(i, row.dot(w)), out);
        }
        let inv = 1.0 / batch.len() as f64;
        for (o, &wj) in out.iter_mut().zip(w) {
            *o = *o * inv + self.lambda * wj;
        }
        self.evals.set(self.evals.get() + batch.len() as u64);
    }

    pub fn gradient(&self, w: &[f64], batch: &[usize]) -> Vector {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(w, batch, &mut g);
        g
    }

    pub fn full_gradient(&self, w: &[f64]) -> Vector {
        let all: Vec<usize> = (0..self.n()).collect();
        self.gradient(w, &all)
    }

    /// Pivot gradient for variance reduction: over `subset` when given, else the full dataset.
    pub fn pivot_gradient(&self, w_tilde: &[f64], subset: Option<&IndexSet>) -> Vector {
        match subset {
            Some(c) => self.gradient(w_tilde, c),
            None => self.full_gradient(w_tilde),
        }
    }

    /// Exact Hessian of the least-squares objective, `(1/n) X^T X + lambda I`.
    pub fn least_squares_hessian(&self) -> SymMatrix {
        self.data.second_moment().shifted(self.lambda)
    }

    /// Global `(mu, L)` for the averaged objective.
    ///
    /// Least squares uses the extreme eigenvalues of its Hessian. Logistic
    /// uses `L = lambda_max((1/n) X^T X) / 4 + lambda` and the lower bound `mu = lambda`.
    pub fn estimate_constants(&self) -> Result<Constants> {
        if self.dim() > DENSE_DIM_LIMIT {
            return Err(Error::TooLarge { d: self.dim(), limit: DENSE_DIM_LIMIT });
        }
        let (lo, hi) = linalg::sym_eig_bounds(&self.data.second_moment())?;
        Ok(match self.kind {
            LossKind::LeastSquares => Constants { mu: lo.max(0.0) + self.lambda, l: hi + self.lambda },
            LossKind::Logistic => Constants { mu: self.lambda, l: hi / 4.0 + self.lambda },
        })
    }

    /// Smoothness constant shared by every component `f_i`: `max_i ||x_i||^2`
    /// (quartered for logistic) plus `lambda`.
    pub fn component_lipschitz(&self) -> f64 {
        let max_sq = (0..self.n()).map(|i| self.data.row(i).norm_sq()).fold(0.0, f64::max);
        match self.kind {
            LossKind::LeastSquares => max_sq + self.lambda,
            LossKind::Logistic => max_sq / 4.0 + self.lambda,
        }
    }
}
