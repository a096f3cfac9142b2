//! Orthopositronium lifetime-spectrum toolkit for gaseous neon.
//!
//! * [`mcnrs`] closed-form estimates for the collective nuclear resonance state
//! * [`detection`] the delayed-coincidence measurement and its random background
//! * [`montecarlo`] seeded synthetic lifetime spectra with an injectable
//!   single-quantum o-Ps mode
//! * [`analysis`] lifetime fitting, anomaly extraction and the 1022 keV line search
//! * [`config`] the TOML configuration shared by the `pals` CLI

pub mod analysis;
pub mod config;
pub mod constants;
pub mod detection;
pub mod error;
pub mod gas;
pub mod io;
pub mod mcnrs;
pub mod montecarlo;

pub use constants::{PhysicalConstants, Profile};
pub use error::{Error, Result};
