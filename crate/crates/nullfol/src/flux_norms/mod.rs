//! Norms on the null hypersurface: curvature flux, `N₁/N₂`, mixed
//! space-time norms, Besov-type `𝓑^θ/𝓟^θ`, the initial data quantity,
//! bootstrap audits and calculus-inequality ratios.
//!
//! Integrals in `s` use the cubic interval weights of the stored samples;
//! suprema in `s` or `ω` are maxima over samples or nodes, so they are
//! lower bounds of the continuous suprema.

mod bootstrap;
mod history;
mod inequality;
mod norms;
mod report;

pub use bootstrap::{bootstrap_audit, initial_quantity, BaFlag, BaTerm, BootstrapReport, InitialQuantity};
pub use history::HistoryField;
pub use inequality::{
    corpus_constant, corpus_functions, inequality_audit, AuditInput, CorpusConstant, Inequality, CORPUS_BAND,
    CORPUS_SIZE,
};
pub use norms::{curvature_flux, l2_h, mixed_norm, n_norms, script_norm, MixedKind, NormLevel, ScriptKind};
pub use report::{format_real, real, NormReport, LP_PARTITION_NOTE};
