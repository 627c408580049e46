//! Replica analysis and simulation of l1-regularized minimum-variance
//! portfolios.

pub mod acceptance;
pub mod error;
pub mod experiments;
pub mod gauss;
pub mod io;
pub mod replica;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
