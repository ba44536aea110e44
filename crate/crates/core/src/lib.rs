//! Stochastic quasi-Newton optimization with variance reduction.
//!
//! The crate provides the VITE optimizer (BFGS-preconditioned steps along an
//! SVRG-style corrected gradient) together with SGD, oBFGS, RES and SVRG
//! baselines, regularized least-squares and logistic objectives over sparse
//! data, and routines that evaluate and empirically check the geometric
//! convergence guarantee of the variance-reduced scheme.

pub mod curvature;
pub mod datasets;
pub mod error;
pub mod linalg;
pub mod objectives;
pub mod optimizers;
pub mod rng;
pub mod theory;

pub use curvature::{CurvaturePair, InverseHessian};
pub use datasets::{Dataset, IndexSet, LabelMode, ParseOptions};
pub use error::{Error, Result};
pub use linalg::{SymMatrix, Vector};
pub use objectives::{Constants, LossKind, Objective};
pub use optimizers::{Method, OptimizerConfig, Pivot, StepSchedule, Trace};
pub use rng::Rng;
pub use theory::TheoryConstants;
