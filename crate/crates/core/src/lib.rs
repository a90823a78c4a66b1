//! Equilibrium model of open-source software provision when usage shifts to
//! AI-mediated ("vibe-coded") channels.
//!
//! - [`model`]: closed-form equilibrium, counterfactual ratios, monetization bounds
//! - [`solvers`]: fixed-point, planner and finite-difference routes to the same objects
//! - [`mc`]: agent-level Monte Carlo oracle
//! - [`calibration`]: binned log-rank tail regression and parameter identification
//! - [`scenario`]: config-driven batch runs writing CSV/JSON

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod mc;
pub mod model;
pub mod params;
pub mod scenario;
pub mod solvers;

pub use error::{CalibrationError, ModelError};
pub use model::{BusinessModel, CounterfactualRatios, Equilibrium, Scenario};
pub use params::{DerivedConstants, ModelParams};
