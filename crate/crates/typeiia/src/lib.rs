//! Numerical engine for Type IIA geometry on 6-dimensional symplectic
//! vector spaces and manifolds-at-a-point.
//!
//! The crate builds the Hitchin almost-complex structure and every
//! derived tensor from a closed, primitive, positive 3-form; verifies
//! the identity catalog of Type IIA geometry as numerical residuals on
//! randomly sampled valid data; and integrates the Type IIA flow on
//! left-invariant geometries with a cross-check of the induced metric
//! evolution.

pub mod ctx;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod jets;
pub mod multilinear;
#[allow(clippy::module_inception)]
pub mod typeiia;

pub use error::{Error, Result};
pub use jets::{Jet2, Scalar};
pub use multilinear::{Tensor, Variance, DIM};
pub use typeiia::TypeIiaStructure;
