//! Geodesic foliations of null hypersurfaces on spectral 2-spheres.

// `!(x > 0.0)` is how argument checks reject NaN; index loops mirror the
// component formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod flux_norms;
pub mod heat_lp;
pub(crate) mod interp;
pub mod hodge_ops;
pub mod minkowski_oracle;
pub mod null_evolution;
pub mod sphere_core;

pub use error::{NullfolError, Result};
