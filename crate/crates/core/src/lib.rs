//! Adaptive simplex lookup tables.
//!
//! A scalar model over a box is sampled on a grid, triangulated, refined
//! until linear interpolation meets an error threshold, and then used for
//! fast interpolation and Monte Carlo event generation.

pub mod geometry;
pub mod io;
pub mod mesh;
pub mod model;
pub mod montecarlo;
pub mod pool;
pub mod refine;
