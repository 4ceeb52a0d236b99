//! Simulation models for spin-exchange-relaxation-free magnetometry with
//! hydrogen and potassium.
//!
//! * [`spin`]: level structure, operators and states of one atom and of a pair.
//! * [`meanfield`]: low-polarization Liouvillian and its transverse mode.
//! * [`collision`]: single spin-exchange collisions and pair Monte Carlo.
//! * [`dualspecies`]: coupled H–K Bloch equations, response, noise, sensitivity.
//! * [`optimize`]: drive/pump optimization and the sensitivity map.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod dualspecies;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod meanfield;
pub mod optimize;
pub mod spin;

pub use error::{Error, Result};

/// Electron gyromagnetic ratio, 2π × 28 GHz/T.
pub const GAMMA_E: f64 = 2.0 * std::f64::consts::PI * 28e9;
