//! Lagrangian field calculus on the reference ball.

mod deformation;
mod field;
mod grid;
mod identities;
mod snapshot;

pub use deformation::*;
pub use field::*;
pub use grid::{BallGrid, Frame};
pub use identities::*;
pub use snapshot::*;
