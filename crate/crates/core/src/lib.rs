//! Simulation and exact stochastic-stability analysis of perturbation-based
//! distributed learning (ITEL, IODL and RITEL) on finite games.

pub mod analysis;
pub mod chain;
pub mod config;
pub mod cooling;
pub mod error;
pub mod eps_poly;
pub mod game;
pub mod large_dev;
pub mod numeric;
pub mod params;
pub mod policy;
pub mod report;
pub mod sim;

pub use error::{PdlError, Result};
