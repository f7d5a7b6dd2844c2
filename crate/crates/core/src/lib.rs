//! Separated inertial-wave boundary-value problems on a rotating sphere and
//! the reconstruction of viscosity and differential rotation from surface
//! observations.

pub mod analytic;
pub mod band;
pub mod error;
pub mod grid;
pub mod harness;
pub mod inversion;
pub mod sphere;
pub mod wave;

pub use error::{Error, Result};
pub use grid::{ComplexField, Grid, ScalarField};
pub use sphere::{Parity, Sobolev, Stencils};
