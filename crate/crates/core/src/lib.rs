pub mod cli;
pub mod comparison;
pub mod cost;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod interpolation;
pub mod io;
pub mod numerics;
pub mod ot_discrete;
pub mod ot_gaussian;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
