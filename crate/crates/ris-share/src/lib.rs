//! Spectrum sharing with a reconfigurable intelligent surface (RIS).
//!
//! A secondary access point with M antennas serves one user over a channel
//! assisted by an N-element reflecting surface, while J primary networks
//! impose interference ceilings. The crate covers the whole optimization
//! stack for that setting plus the Monte-Carlo tooling around it:
//!
//! - [`scenario`]: geometry, channel generation, and the lifted problem data;
//! - [`metrics`]: SIR, achievable rate, and interference feasibility;
//! - [`socp`]: a dense second-order cone solver with KKT rechecks;
//! - [`beamform`]: optimal transmit beamforming under interference limits;
//! - [`gld`]: reflect-coefficient descent with continuous phases;
//! - [`npsp`]: projection onto discrete phase codebooks;
//! - [`driver`]: alternating optimization, baselines, sweeps, CSV output.
//!
//! The `examples/` directory walks through each capability end to end; the
//! `ris-share` binary exposes the sweep driver on the command line.

pub mod beamform;
pub mod driver;
pub mod error;
pub mod gld;
pub mod npsp;
pub mod metrics;
pub mod scenario;
pub mod socp;

pub use error::{Error, Result};
