//! Pseudo-spectral solver and verification harness for stochastic compressible
//! Navier–Stokes with Cucker–Smale alignment and attraction–repulsion on the
//! periodic torus `[-1, 1)^d`.

pub mod config;
pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod galerkin;
pub mod harness;
pub mod noise;
pub mod particles;
pub mod runner;
pub mod stepper;
pub mod torus;

pub use error::{Error, Result};
