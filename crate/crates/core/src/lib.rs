//! Simulation of out-of-time-order correlators in disordered kicked Ising
//! circuits on heavy-hex coupling graphs.

pub mod circuit;
pub mod config;
pub mod error;
pub mod lattice;
pub mod model;
pub mod otoc;
pub mod runner;
pub mod seeds;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
