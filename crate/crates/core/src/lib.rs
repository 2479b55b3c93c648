//! Robust, Byzantine-resilient diffusion adaptation over clustered multi-task networks.
//!
//! Nodes run a local LMS or Geman-McClure (LMG) adaptation and then combine
//! the intermediate estimates of their neighbors with adaptive weights. The
//! resilient variants discard the neighbors with the largest cost
//! contribution before combining. The crate covers the simulation loop, a
//! gradient-based Byzantine attacker, closed-form steady-state predictions,
//! the localization and spectrum-sensing scenarios, and a seeded Monte-Carlo
//! harness with CSV/JSON output.

pub mod adapt;
pub mod attack;
pub mod combine;
pub mod diffusion;
pub mod error;
pub mod harness;
pub mod scenarios;
pub mod signal;
pub mod theory;
pub mod topology;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
