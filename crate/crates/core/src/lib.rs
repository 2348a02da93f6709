//! Radial averaging operators on weighted Bergman spaces of the unit disc.

pub mod conditions;
pub mod error;
pub mod kernels;
pub mod numerics;
pub mod operator;
pub mod scenario;
pub mod weights;

pub use error::{Error, Result};
