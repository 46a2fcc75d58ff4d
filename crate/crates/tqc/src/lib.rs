//! Simulation of the Fibonacci-driven open Dicke model.
//!
//! Two engines share one drive schedule: a mean-field integrator for the
//! thermodynamic limit and an exact Lindblad propagator for few-qubit
//! systems in the symmetric spin sector. The `diagnostics` module holds the
//! machinery that classifies a run as time-quasicrystalline or thermal
//! (subharmonic spectra, quasicrystal fraction, decorrelator, lifetime fit),
//! and `sweep` orchestrates the detuning and system-size scans.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod meanfield;
pub mod model;
pub mod quantum;
pub mod sweep;

pub use error::{Result, TqcError};
