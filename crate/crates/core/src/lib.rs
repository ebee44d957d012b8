pub mod cli;
pub mod discretization;
pub mod equilibria;
pub mod error;
pub mod growth_solver;
pub mod modes;
pub mod spectral_core;
pub mod verify;

pub use error::{Error, Result};
