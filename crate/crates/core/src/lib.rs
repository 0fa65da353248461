//! Optimal control of driven open quantum systems between two heat baths.
//!
//! The qubit reset model admits closed-form optimal isotherms; this crate
//! solves for the power-maximizing engine, plans heat-minimizing finite-time
//! trajectories, and cross-checks them against direct simulation and a
//! brute-force search over piecewise-constant protocols.

pub mod format;
pub mod lindblad;
pub mod numerics;
pub mod oracle;
pub mod planner;
pub mod pmp;
pub mod qubit;
