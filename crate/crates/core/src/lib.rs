//! Safe flight corridor optimization.
//!
//! Computes a sequence of overlapping obstacle-free polytopes covering a path
//! by alternating between three blocks: polytope inflation around inscribed
//! ellipsoids, waypoint updates under a trajectory heuristic, and per-segment
//! maximum-volume ellipsoid updates, coupled through scaled multipliers.
//! A minimum-control-effort piecewise polynomial back-end evaluates the result.
//!
//! The crate is `no_std` (with `alloc`). Enable the `parallel` feature to run
//! the per-segment batches on a rayon pool.
#![no_std]

extern crate alloc;

pub mod ellipsoid_opt;
pub mod env;
mod error;
pub mod frontend;
pub mod geom;
pub mod inflate;
pub(crate) mod linalg;
pub mod solver;
pub mod traj;
pub mod waypoint_opt;

pub use error::{Error, Result};
pub use geom::{Aabb, Ellipsoid, Polyline, Polytope};
