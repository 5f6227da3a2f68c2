//! Numerical toolkit for building and certifying contracting non-trivial
//! wandering domains of three-dimensional diffeomorphisms.
//!
//! The crate is organized around a small set of concrete objects:
//!
//! - [`map::SmoothMap3`] — a 3D map with exact evaluation and analytic
//!   jacobian, iterated forward and (via Newton inversion) backward.
//! - [`models`] — saddle-focus linear models, compactly supported bump
//!   perturbations, and piecewise linear/affine cycle models.
//! - [`patch::ManifoldPatch`] and the geometry operations in [`manifold`],
//!   [`tangency`], [`alignment`], [`intrinsic`] and [`tatjer`] — invariant
//!   manifold patches, tangency classification, codimension computation,
//!   rotation-alignment searches and the generalized-tangency condition
//!   checker.
//! - [`hopf`] — the truncated cubic normal-form family, its invariant
//!   circle, a Neimark–Sacker crossing scan, and cubic-coefficient fits.
//! - [`denjoy`] — a constructive C¹ circle diffeomorphism with prescribed
//!   irrational rotation number and wandering intervals.
//! - [`certifier`] — tubular neighborhoods over the wandering arcs of a
//!   skew-product model and a sampling-based wandering-domain certificate.

pub mod alignment;
pub mod certifier;
pub mod denjoy;
mod error;
pub mod hopf;
pub mod intrinsic;
pub mod manifold;
pub mod map;
pub mod models;
pub mod numeric;
pub mod patch;
pub mod tangency;
pub mod tatjer;
pub mod tolerances;

pub use error::{Error, Result};
