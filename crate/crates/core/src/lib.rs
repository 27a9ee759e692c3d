//! Frequency-filtered N-photon correlations of open quantum systems.
//!
//! The central computation couples N weakly coupled two-level sensors to a
//! Lindblad system and reads the filtered correlations off their steady
//! state intensities ([`sensors`]). An independent integral-method oracle
//! for one and two photons lives in [`oracle`].

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod hilbert;
mod krylov;
pub mod liouville;
pub mod models;
pub mod oracle;
pub mod quadrature;
pub mod sweep;
pub mod validate;
pub mod regression;
pub mod sensors;
pub mod sparse;

pub use error::{Error, Result};
