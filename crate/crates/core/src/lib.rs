//! Voronoi-based finite volumes for the Poisson problem of the
//! Laplace-Beltrami operator on icosahedral spherical grids.
//!
//! The pipeline is: build a grid ([`grid`], optionally optimized by [`scvt`]),
//! derive its Voronoi dual ([`dual`]), assemble the finite volume system
//! ([`fv`]), solve it ([`solver`]), and measure errors ([`metrics`]) against an
//! analytic problem from [`problems`]. [`study`] strings these together for
//! multi-level convergence runs.

// `!(x > 0.0)` is used on purpose so that NaN takes the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod error;
pub mod fv;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod problems;
pub mod quadrature;
pub mod scvt;
pub mod solver;
pub mod sparse;
pub mod study;

pub use dual::{SphericalMesh, VoronoiDual};
pub use geometry::{GeoCoord, UnitVector};
pub use grid::DelaunayGrid;
