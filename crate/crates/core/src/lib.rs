//! Pseudo-spectral SQG and 3D Euler solvers, vortex-line geometry, and
//! maximum-vorticity growth diagnostics.

pub mod clebsch;
pub mod config;
pub mod csvio;
pub mod curve;
pub mod error;
pub mod euler;
pub mod frame;
pub mod grid;
pub mod growth;
pub mod interp;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod snapshot;
pub mod spectral;
pub mod sqg;
pub mod stepper;
pub mod tracking;
pub mod vec3;

pub use error::{Error, Result};
pub use grid::{Grid, ScalarField, VectorField};
pub use spectral::Spectral;
