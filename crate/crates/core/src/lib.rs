//! Compiles discretised functions and images into shallow CNOT + rotation
//! circuits through matrix product states.

pub mod error;
pub mod circuit;
pub mod dense;
pub mod linalg;
pub mod mpd;
pub mod mps;
pub mod target;
pub mod tno;

pub use error::{Error, Result};
