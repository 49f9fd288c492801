//! Non-blind deconvolution of positive images with the Richardson-Lucy
//! family (plain, regularised, robust, and robust-and-regularised), robust
//! variational gradient-descent baselines, and a degradation/benchmark
//! harness.

pub mod bench;
pub mod blur;
pub mod cli;
pub mod degrade;
pub mod diffusion;
pub mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod penaliser;
mod scratch;
pub mod solver;
pub mod variational;

pub use error::{Error, Result};
pub use image::{Image, PointSpreadFunction};
