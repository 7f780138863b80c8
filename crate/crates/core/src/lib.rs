//! Aggregated unfitted finite elements for the Stokes problem.
//!
//! The pipeline runs on a uniform Cartesian background mesh that embeds a
//! physical domain described by a level-set function:
//!
//! 1. [`mesh`] builds the background grid and its vertex/edge/face lattice.
//! 2. [`geometry`] classifies cells as internal, cut or external.
//! 3. [`quadrature`] subdivides cut cells and produces integration rules.
//! 4. [`aggregation`] glues every cut cell to an internal root cell.
//! 5. [`spaces`] builds the constrained Q2 velocity and per-aggregate P1
//!    pressure spaces.
//! 6. [`assembly`] assembles the Nitsche-Stokes saddle-point system.
//! 7. [`linalg`] factorizes it and estimates its 1-norm condition number.
//! 8. [`experiments`] drives convergence, moving-domain and demo runs.

#![allow(clippy::needless_range_loop)]

pub mod aggregation;
pub mod assembly;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod spaces;

pub use error::{Error, Result};

/// Points are stored with three coordinates; 2D problems leave `z = 0`.
pub type Point = [f64; 3];
