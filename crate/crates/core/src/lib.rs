//! Explicit barrier functions for degenerate parabolic equations, with
//! numerical certification of their differential inequalities.

pub mod barrier_factory;
pub mod cli;
pub mod comparison_lab;
pub mod dnl_transform;
pub mod error;
pub mod operators;
pub mod params;
pub mod quadrature;
pub mod radial_profiles;
pub mod residual_certifier;

pub use error::{Error, Result};
