//! Numerical laboratory for the thin obstacle (Signorini) problem.
//!
//! The crate solves the constrained Dirichlet minimization on the unit ball
//! with a unilateral obstacle on the thin plane {x_n = 0}, and provides the
//! diagnostic machinery around it: Almgren frequency and Weiss boundary
//! adjusted energies, cone distances and projections for the homogeneous
//! blowup families, epiperimetric energy-gain measurements, and free
//! boundary extraction with blowup frame recovery.

pub mod config;
pub mod epi;
pub mod error;
pub mod field;
pub mod free_boundary;
pub mod grid;
pub mod io;
pub mod poly;
pub mod profiles;
pub mod projection;
pub mod quad;
pub mod radial;
pub mod solver;
pub mod validate;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use grid::{make_grid, Grid};
