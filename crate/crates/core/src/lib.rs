//! Solvers for convex finite-sum coupled compositional optimization.
//!
//! The problems handled here have the form
//!
//! ```text
//! min_{x in X}  F(x) = (1/n) * sum_i f_i(g_i(x)) + r(x),    g_i(x) = E[g_i(x; zeta_i)]
//! ```
//!
//! with convex outer functions `f_i`, convex stochastic inner maps `g_i`, a
//! closed-form-proximable regularizer `r` and a box domain `X`. Via Fenchel
//! conjugates this is the convex-concave saddle problem
//!
//! ```text
//! min_x max_y  L(x, y) = (1/n) * sum_i [ g_i(x) * y_i - f_i^*(y_i) ] + r(x)
//! ```
//!
//! which [`algorithms`] solves with a stochastic primal-dual block-coordinate
//! method (ALEXR) and a set of baselines (BSGD, SOX, MSVR, SGD).
//!
//! Module map:
//!
//! * [`problem`]: problem instances, inner oracles, exact evaluation.
//! * [`outer`]: outer functions with conjugates and dual proximal maps.
//! * [`algorithms`]: ALEXR and baseline solvers, run records.
//! * [`instances`]: hard instances with known optima, GDRO, pAUC, data loaders.
//! * [`metrics`]: gaps, exact partial AUC, dual radius, rate fitting.
//! * [`harness`]: declarative experiments, record emission, rate sweeps.

pub mod algorithms;
pub mod error;
pub mod harness;
pub mod instances;
pub mod metrics;
pub mod outer;
pub mod problem;

pub use error::{Error, Result};
