pub mod budding;
pub mod comparison;
pub mod error;
pub mod flow;
pub mod inference;
pub mod io;
pub mod normal;
pub mod population;
pub mod prior;
pub mod quadrature;
pub mod simulation;
pub mod start;

pub use error::{CloccsError, Result};
