//! Geometry, effective Hamiltonians, variational bound-state certificates and
//! sparse spectra of hard-wall quantum layers over locally deformed planes.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod bessel;
pub mod certify;
pub mod config;
pub mod error;
pub mod forms;
pub mod geometry;
pub mod identities;
pub mod layer;
pub mod quadrature;
pub mod report;
pub mod run;
pub mod spectral;
pub mod surfaces;

pub use error::{Error, Result};
