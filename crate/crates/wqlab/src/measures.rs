//! Measure families, norms and axis-aligned geometry.
//!
//! The transport solvers and bounds only ever see measures through a small
//! surface: exact i.i.d. samplers, exact masses of half-open axis-aligned
//! boxes, exact (or tightly controlled) max-norm moments, and the diameter of
//! the unit cube under the working norm. This module provides that surface
//! for a handful of analytically tractable families.
//!
//! All boxes are half-open, `[lo, hi)` per axis, so dyadic cells tile a box
//! exactly and every point belongs to exactly one cell of a partition.

mod discrete;
mod geom;
mod model;

pub use discrete::DiscreteMeasure;
pub use geom::{unit_cube_diameter, AxisBox, Norm, Point};
pub use model::ModelMeasure;
