//! Launch-power assignment for elastic optical networks.
//!
//! A Gaussian-noise QoT model scores a vector of per-channel launch
//! powers by the distance of every channel's residual margin from one.
//! Hurricane search (chaotic and uniform variants) and a projected
//! gradient-descent baseline minimize that distance; `ipo` tunes the
//! search parameters, `scenarios` adds monitoring noise, ageing and
//! power transients, and `metrics` scores the results.

pub mod error;
pub mod gd;
pub mod hurricane;
pub mod ipo;
pub mod metrics;
pub mod network;
pub mod pressure;
pub mod qot;
pub mod report;
pub mod scenarios;
pub mod units;

pub use error::{Error, Result};
