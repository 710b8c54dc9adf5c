//! Transformed-variable solver for compressible MHD boundary layers.

pub mod config;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod model;
pub mod output;
pub mod par;
pub mod solver;
pub mod stencil;
pub mod transform;
pub mod tridiag;

pub use error::{Error, Result, Violation};
pub use grid::{Field, GridSpec};
