//! Numerical tools for the vacuum free-boundary Euler problem near the
//! Barenblatt self-similar expansion.

pub mod error;
pub mod geometry;
pub mod norms;
pub mod ode;
pub mod params;
pub mod quadrature;
pub mod radial;
pub mod theta;

pub use error::{Error, Result};
pub use params::{derive_constants, BarenblattConstants, GasParams};
