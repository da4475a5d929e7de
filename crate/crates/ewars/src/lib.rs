//! Leak-area estimation for sealed habitat test chambers.
//!
//! The crate couples an isentropic lumped-parameter blowdown model
//! ([`gas_dynamics`]) with an exponentially weighted adaptive-resolution
//! search ([`estimator`]) that recovers an equivalent leak area from a noisy
//! pressure stream in real time. A synthetic rig ([`chamber_sim`]) generates
//! calibrated test data, and [`config`]/[`io`] provide the file formats used
//! by the `ewars` command-line tool.

pub mod chamber_sim;
pub mod config;
pub mod error;
pub mod estimator;
pub mod gas_dynamics;
pub mod io;

pub use error::{Error, Result};
