//! Simulation and verification toolkit for two-timescale stochastic
//! approximation driven by hybrid dynamics.
//!
//! The crate is organised bottom-up:
//!
//! - [`hybrid_time`]: hybrid sequence domains and sequences indexed by `(k, j)`.
//! - [`schedules`]: step-size schedules, accumulated times and window index sets.
//! - [`systems`]: hybrid and two-timescale systems, boundary layer and reduced system.
//! - [`simulate`]: deterministic and stochastic discrete-time simulation.
//! - [`diagnostics`]: empirical checks on simulated traces.
//! - [`chains`]: constructive `(ε, τ)`-chain search between ω-limit points.
//! - [`hhb`]: the hybrid heavy-ball stochastic optimization instance.
//! - [`experiment`]: configuration, artifacts and the command-line commands.

pub mod chains;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod hhb;
pub mod hybrid_time;
pub mod linalg;
pub mod schedules;
pub mod simulate;
pub mod systems;

pub use error::{Error, Result};
