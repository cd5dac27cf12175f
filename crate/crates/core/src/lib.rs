//! Approximate real-time evolution of the transverse-field Ising chain from a
//! coarse-grained single time slice of the equivalent classical network.

pub mod cache;
pub mod ed;
pub mod error;
pub mod evolution;
pub mod hotrg;
pub mod ising;
pub mod states;
pub mod tebd;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
