//! Numerical continuation and bifurcation analysis for delay differential
//! equations with discrete delays.

pub mod charpoly;
pub mod continuation;
pub mod error;
pub mod hopf;
pub mod integrator;
pub mod io;
pub mod model;
pub mod psol;
pub mod spectrum;
pub mod steady;
pub mod study;

pub use error::{Error, Result};
pub use model::{DdeSystem, HarvestedPredatorPrey, Jacobians, ParameterSet};
