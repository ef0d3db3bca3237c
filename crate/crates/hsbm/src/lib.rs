//! Synthetic graph generation under a heterophilous stochastic block
//! model, closed-form separability gains for graph convolutions, and the
//! training harnesses to compare both against learned classifiers.

pub mod aggregate;
pub mod analyze;
pub mod classify;
pub mod cli;
pub mod dd;
pub mod error;
pub mod io;
pub mod mat;
pub mod model;
pub mod rng;
pub mod sweep;
pub mod theory;

pub use error::{Error, Result};
pub use mat::Mat;
