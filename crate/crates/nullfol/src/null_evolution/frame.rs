use crate::error::{invalid, Result};
use crate::hodge_ops::laplace_inverse;
use crate::sphere_core::calculus::{dot, grad, hodge_dual, tensor_dot_form};
use crate::sphere_core::{LeafField, MetricField, Rank};

use super::curvature::CurvatureSample;
use super::diagnostics::mass_aspect;
use super::state::FoliationState;

fn positive(f: &LeafField, what: &str) -> Result<()> {
    f.expect_rank(Rank::Scalar, what)?;
    if f.values().iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return invalid(format!("{what} must be positive and finite"));
    }
    Ok(())
}

/// Changes the null pair to `L' = ωL`, `L̲' = ω⁻¹L̲` on every leaf point:
/// `χ' = ωχ`, `χ̲' = ω⁻¹χ̲`, `ζ' = ζ − ∇log ω`.
pub fn frame_rescale(state: &FoliationState, omega: &LeafField) -> Result<FoliationState> {
    positive(omega, "ω")?;
    if omega.n_nodes() != state.n_nodes() {
        return invalid("ω lives on a different grid");
    }
    let g = &state.gamma;
    let inv_omega = omega.map(|w| 1.0 / w);
    let dlog = grad(&omega.map(f64::ln), g);
    FoliationState::new(
        state.s,
        state.gamma.clone(),
        state.trchi.mul_scalar(omega),
        state.chih.mul_scalar(omega),
        state.zeta.sub(&dlog),
        state.trchib.mul_scalar(&inv_omega),
        state.chibh.mul_scalar(&inv_omega),
        state.v.clone(),
    )
}

/// `ω` with `Δ log ω = mean(μ̃) − μ̃`, so that rescaling by it makes `μ̃`
/// constant (rescaling shifts `μ̃` by `+Δ log ω`).
pub fn normalize_mass_aspect(state: &FoliationState, curv: &CurvatureSample) -> Result<LeafField> {
    let mu = mass_aspect(state, curv).mu_tilde;
    Ok(laplace_inverse(&mu, &state.gamma)?.map(f64::exp))
}

/// Quantities attached to one foliation at the leaf points.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameQuantities {
    /// Full `χ` as a symmetric 2-tensor.
    pub chi: LeafField,
    pub alpha: LeafField,
    pub zeta: LeafField,
    pub beta: LeafField,
    pub rho: LeafField,
    pub sigma: LeafField,
}

/// Passes to the foliation of the same null hypersurface by level sets of a
/// new affine-type parameter, given `∇v` and the lapse `Ω`.
///
/// `χ` and `α` are intrinsic to the hypersurface and are returned unchanged.
pub fn foliation_transform(q: &FrameQuantities, v_grad: &LeafField, omega: &LeafField, g: &MetricField) -> Result<FrameQuantities> {
    positive(omega, "Ω")?;
    v_grad.expect_rank(Rank::OneForm, "∇v")?;
    if v_grad.n_nodes() != g.n_nodes() || omega.n_nodes() != g.n_nodes() {
        return invalid("transform inputs live on different grids");
    }
    let w = omega.map(|o| 1.0 / o);
    let w2 = omega.map(|o| 1.0 / (o * o));
    let alpha_v = tensor_dot_form(&q.alpha, v_grad, g);
    let star_alpha_v = tensor_dot_form(&hodge_dual(&q.alpha, g)?, v_grad, g);
    Ok(FrameQuantities {
        chi: q.chi.clone(),
        alpha: q.alpha.clone(),
        zeta: q.zeta.sub(&tensor_dot_form(&q.chi, v_grad, g).mul_scalar(&w)),
        beta: q.beta.sub(&alpha_v.mul_scalar(&w)),
        rho: q
            .rho
            .sub(&dot(v_grad, &q.beta, g).mul_scalar(&w).scale(2.0))
            .add(&dot(&alpha_v, v_grad, g).mul_scalar(&w2)),
        sigma: q
            .sigma
            .add(&dot(v_grad, &hodge_dual(&q.beta, g)?, g).mul_scalar(&w).scale(2.0))
            .sub(&dot(v_grad, &star_alpha_v, g).mul_scalar(&w2)),
    })
}
