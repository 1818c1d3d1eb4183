//! Delay-dependent stability and Hopf-bifurcation analysis for the Keen
//! wage-share / employment / debt model with a delayed inflation term.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameters and the closed-form behavioural functions.
//! - [`equilibria`]: the four equilibrium families and their residuals.
//! - [`linearize`]: K constants, Jacobians, the undelayed cubic, Routh-Hurwitz.
//! - [`spectrum`]: the delayed characteristic quasi-polynomial, critical delays
//!   and the stability verdict.
//! - [`normal_form`]: center-manifold reduction and the Hopf classification.
//! - [`sim`]: method-of-steps RK4 simulation of the delayed system.
//! - [`cli`]: configuration, reports and CSV/SVG emission for the binary.

pub mod cli;
pub mod cubic;
pub mod equilibria;
mod error;
pub mod linalg;
pub mod linearize;
pub mod model;
pub mod normal_form;
pub mod sim;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{Model, ModelParams, State};
