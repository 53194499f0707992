//! Leaves `S_s`: grid, fields, metrics and tensor calculus.

pub mod calculus;
pub mod field;
pub mod grid;
pub mod harmonics;
pub mod metric;
pub mod spectral;
pub(crate) mod tensor;
pub mod ws;

pub use calculus::{
    differential, gauss_curvature, hodge_dual, integrate, l2_norm, mean, Differential,
};
pub use field::{LeafField, Rank};
pub use grid::SphereGrid;
pub use metric::MetricField;
pub use ws::{ws_audit, WsReport};

use std::sync::Arc;

use crate::error::Result;

/// Grid for band limit `l_max ≥ 4`, shared by reference.
pub fn make_grid(l_max: usize) -> Result<Arc<SphereGrid>> {
    SphereGrid::new(l_max).map(Arc::new)
}
