//! Uplink simulator for RIS-assisted cell-free massive MIMO with reflection
//! pattern modulation: correlated channel synthesis, LMMSE estimation, LSFD
//! combining, closed-form and Monte Carlo spectral efficiency, an energy
//! model, and swarm-based phase-shift optimization.

pub mod channel;
pub mod closed_form;
pub mod combining;
pub mod estimation;
pub mod energy;
pub mod config;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod optimizer;
pub mod rng;
pub mod spatial;
pub mod system;
pub mod testkit;
pub mod topology;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
