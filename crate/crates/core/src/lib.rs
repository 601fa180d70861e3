//! Consistent histories and Bohm trajectories for a two-beam interferometer.
//!
//! * [`hilbert`] and [`histories`]: the discrete five-state model, chain
//!   vectors, the decoherence functional and conditional probabilities.
//! * [`wavefield`]: closed-form free Gaussian beams crossing in a plane.
//! * [`bohm`]: guidance velocity, quantum potential, adaptive trajectories
//!   and ensembles.
//! * [`scan`]: a small detector swept through the overlap region.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohm;
pub mod curve;
pub mod geometry;
pub mod hilbert;
pub mod histories;
pub mod quadrature;
pub mod scan;
pub mod wavefield;

pub use geometry::{Axis, Segment, Vec2};
pub use hilbert::C64;
