//! Spherically symmetric free-boundary solver.

mod growth;
mod model;
mod run;

pub use growth::*;
pub use model::*;
pub use run::*;
