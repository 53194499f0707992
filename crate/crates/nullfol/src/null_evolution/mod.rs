//! Geodesic foliations of a null hypersurface: structure equations in the
//! affine parameter, constraint and Bianchi residuals, frame changes.

mod commute;
mod curvature;
mod diagnostics;
mod evolve;
mod frame;
mod state;
mod transport;

pub use commute::{commutation_check, Commutation};
pub use curvature::{CurvatureInput, CurvatureMode, CurvatureSample, RenormalizedCurvature};
pub use diagnostics::{
    area_law_residual, average_identity_residual, mass_aspect, residuals, volume_law_residual, MassAspect, Residuals,
};
pub use evolve::{evolve, EvolveParams, Evolution, Termination};
pub use frame::{foliation_transform, frame_rescale, normalize_mass_aspect, FrameQuantities};
pub use state::FoliationState;
pub use transport::{average_split, transport_solve, AverageSplit, TransportSolution};
