use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::interp::derivative_stencil;
use crate::null_evolution::FoliationState;
use crate::sphere_core::calculus::{slot_contract, times_metric};
use crate::sphere_core::{LeafField, MetricField, Rank, SphereGrid};

/// Points in the s-stencil for `∇_L`.
const NABLA_L_STENCIL: usize = 5;

/// A tensor field on the null hypersurface: one leaf field per sample of
/// `s`, each with the metric of its leaf in transported coordinates.
#[derive(Debug, Clone)]
pub struct HistoryField {
    s: Vec<f64>,
    fields: Vec<LeafField>,
    metrics: Vec<Arc<MetricField>>,
}

impl HistoryField {
    pub fn new(s: Vec<f64>, fields: Vec<LeafField>, metrics: Vec<Arc<MetricField>>) -> Result<Self> {
        if s.is_empty() || fields.len() != s.len() || metrics.len() != s.len() {
            return invalid("a history needs one field and one metric per sample");
        }
        if s.iter().any(|x| !x.is_finite()) || s.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("s-samples must be finite and strictly increasing");
        }
        let grid = metrics[0].grid();
        if metrics.iter().any(|m| !Arc::ptr_eq(m.grid(), grid) && m.grid().band_limit() != grid.band_limit()) {
            return invalid("all samples must share one sphere grid");
        }
        let rank = fields[0].rank();
        let n = grid.n_nodes();
        if fields.iter().any(|f| f.rank().order() != rank.order() || f.values().len() != n * rank.n_comp()) {
            return invalid("all samples must hold fields of one rank on the grid");
        }
        if fields.iter().any(|f| f.values().iter().any(|v| !v.is_finite())) {
            return invalid("history fields must be finite");
        }
        Ok(Self { s, fields, metrics })
    }

    /// Samples over a single frozen leaf metric (static test mode).
    pub fn frozen(s: Vec<f64>, fields: Vec<LeafField>, metric: Arc<MetricField>) -> Result<Self> {
        let metrics = vec![metric; s.len()];
        Self::new(s, fields, metrics)
    }

    /// `f(leaf)` over a recorded run.
    pub fn from_run(history: &[FoliationState], f: impl Fn(&FoliationState) -> LeafField) -> Result<Self> {
        Self::new(
            history.iter().map(|st| st.s).collect(),
            history.iter().map(f).collect(),
            history.iter().map(|st| st.gamma.clone()).collect(),
        )
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s
    }

    pub fn fields(&self) -> &[LeafField] {
        &self.fields
    }

    pub fn metrics(&self) -> &[Arc<MetricField>] {
        &self.metrics
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn rank(&self) -> Rank {
        self.fields[0].rank()
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        self.metrics[0].grid()
    }

    /// The same samples with every field replaced by `f(field, metric)`.
    pub fn map(&self, f: impl Fn(&LeafField, &MetricField) -> LeafField) -> Result<Self> {
        let fields = self.fields.iter().zip(&self.metrics).map(|(x, g)| f(x, g)).collect();
        Self::new(self.s.clone(), fields, self.metrics.clone())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { s: self.s.clone(), fields: self.fields.iter().map(|f| f.scale(c)).collect(), metrics: self.metrics.clone() }
    }

    /// Area weights `w_k √|γ_0|` of the initial leaf, the measure of every `L_x` norm.
    pub(crate) fn initial_area_weights(&self) -> Vec<f64> {
        self.metrics[0].area_weights()
    }

    fn derivative(&self, values: &[LeafField], i: usize) -> LeafField {
        let (lo, w) = derivative_stencil(&self.s, i, NABLA_L_STENCIL);
        let mut acc = values[lo].scale(w[0]);
        for (j, wj) in w.iter().enumerate().skip(1) {
            acc = acc.axpy(*wj, &values[lo + j]);
        }
        acc
    }

    /// `∇_L F = ∂_s F − Σ χ·F` on every slot, with `χ = ½∂_sγ` read off the
    /// sampled metrics. Needs at least three samples.
    pub fn nabla_l(&self) -> Result<Vec<LeafField>> {
        if self.len() < 3 {
            return invalid(format!("∇_L needs at least 3 samples, got {}", self.len()));
        }
        let n = self.grid().n_nodes();
        let one = LeafField::constant(1.0, n);
        let frozen = self.metrics.iter().all(|m| Arc::ptr_eq(m, &self.metrics[0]));
        let gammas: Vec<LeafField> = if frozen || self.rank().order() == 0 {
            Vec::new()
        } else {
            self.metrics.iter().map(|m| times_metric(&one, m)).collect()
        };
        Ok((0..self.len())
            .map(|i| {
                let ds = self.derivative(&self.fields, i);
                if gammas.is_empty() {
                    return ds;
                }
                let chi = self.derivative(&gammas, i).scale(0.5);
                ds.sub(&slot_contract(&chi, &self.fields[i], &self.metrics[i]))
            })
            .collect())
    }
}
