#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Learning-based control of 2D Rayleigh–Bénard convection.
//!
//! The crate bundles a pseudo-spectral Boussinesq solver with a segmented
//! bottom heater ([`sim`]), flow measurements ([`diagnostics`]), a
//! finite-horizon control environment with Nusselt-number and cell-merging
//! rewards ([`env`]), classical baselines ([`controllers`]), a PPO trainer
//! ([`rl`]) and the experiment pipeline ([`harness`]).

pub mod controllers;
pub mod diagnostics;
pub mod env;
pub mod error;
pub mod harness;
pub mod rl;
pub mod sim;

pub use error::{RbcError, Result};
