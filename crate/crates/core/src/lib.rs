//! Penalized maximum-likelihood estimation for canonical GLMs with group
//! lasso, lasso and elastic net penalties.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod glm;
pub mod io;
pub mod penalty;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use glm::{empirical_risk, loss, risk_gradient, Dataset, ExponentialFamily};
pub use penalty::{
    norm_2_1, penalty_value, prox, regularizer_norm, GroupStructure, PenaltyKind, PenaltySpec,
    SparsityProfile,
};
pub use solver::{
    fit, kkt_residual, lambda_grid, lambda_max, path, select_lambda, validation_error, FitConfig,
    FitResult, PathResult, Selection,
};
