//! Portfolio risk budgeting and optimization.
//!
//! The crate is organised around a few numerical building blocks:
//!
//! - [`core`]: asset universes, covariance assembly, portfolios and budgets.
//! - [`qp`]: a dense active-set quadratic programming solver with multipliers.
//! - [`measures`]: VaR/ES under several loss models, Cornish-Fisher, moment tensors.
//! - [`analytics`]: Euler decompositions, betas, tracking statistics, concentration.
//! - [`optimizers`]: mean-variance family, Black-Litterman, Jagannathan-Ma.
//! - [`riskparity`]: ERC and risk-budgeting solvers plus closed forms.
//! - [`factors`]: factor risk decomposition, PCA, credit risk, leverage equilibrium.
//! - [`backtest`]: rolling-window rebalancing engine.
//! - [`cli`]: command implementations behind the `riskbudget` binary.
//!
//! All rates and weights are stored as decimals.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod backtest;
pub mod cli;
pub mod core;
pub mod error;
pub mod factors;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod optimizers;
pub mod qp;
pub mod riskparity;

pub use crate::core::{
    build_covariance, portfolio_moments, AssetUniverse, CovarianceMatrix, Portfolio,
    RiskBudget, RiskDecomposition,
};
pub use crate::error::{Error, Result};
