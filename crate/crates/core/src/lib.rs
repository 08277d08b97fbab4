//! Dyadic harmonic analysis on `[0,1)`.
//!
//! The crate works with piecewise-constant functions on a uniform grid of
//! `2^N` cells and the dyadic lattice of (optionally shifted) intervals that
//! the grid resolves. On top of that it provides fractional averages and
//! Orlicz norms, multilinear fractional operators and dyadic model operators,
//! sparse families with their sparse operators and forms, multilinear weight
//! constants with extrapolation exponent arithmetic, and an experiment layer
//! that turns weighted and sparse inequalities into measured reports.
#![forbid(unsafe_code)]

pub mod dyadic;
pub mod error;
pub mod gridfn;
pub mod operators;
pub mod sparse;
pub mod verify;
pub mod weights;

pub use dyadic::{DyadicCube, GridShift, Lattice};
pub use error::{Error, Result};
pub use gridfn::{GridFunction, YoungFunction};
