//! Weighted norms, energy functionals and balance checks.

mod balance;
mod energy;
mod m0;
mod weighted;

pub use balance::*;
pub use energy::*;
pub use m0::*;
pub use weighted::*;
