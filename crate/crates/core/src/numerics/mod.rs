//! Extended arithmetic, radial grids, quadrature and sup profiles.

pub mod ext;
pub mod grid;
pub mod profile;
pub mod quad;

pub use grid::{PolarGrid, RadialGrid, Radius};
pub use profile::{sup_profile, ConditionProfile, Verdict};
pub use quad::{integrate, integrate_improper, integrate_log_gap, integrate_radial};
