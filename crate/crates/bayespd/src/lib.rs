//! Persistence diagrams from point clouds, closed-form Bayesian posterior
//! inference on diagrams modeled as i.i.d. cluster point processes, and
//! Bayes-factor classification of diagrams.

pub mod error;
pub mod io;
pub mod params;
pub mod classify;
pub mod cli;
pub mod persistence;
pub mod pointprocess;
pub mod posterior;
pub mod synthetic;

pub use error::{Error, Result};
