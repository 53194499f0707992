use crate::error::{invalid, Result};
use crate::interp::derivative_stencil;
use crate::sphere_core::calculus::{
    curl, div, dot, form_wedge, gauss_curvature, grad, hat_otimes_grad, hat_product, hodge_dual, integrate, l2_norm,
    mean, norm_sq, tensor_dot_form, tensor_mul, wedge,
};
use crate::sphere_core::LeafField;

use super::curvature::{CurvatureInput, CurvatureSample, RenormalizedCurvature};
use super::evolve::{Layout, Rhs};
use super::state::FoliationState;

#[derive(Debug, Clone, PartialEq)]
pub struct MassAspect {
    /// `μ̃ = −div ζ + ½χ̂·χ̲̂ − ρ`.
    pub mu_tilde: LeafField,
    /// `μ = μ̃ + |ζ|²`.
    pub mu: LeafField,
}

pub fn mass_aspect(state: &FoliationState, curv: &CurvatureSample) -> MassAspect {
    let g = &state.gamma;
    let mu_tilde = div(&state.zeta, g).scale(-1.0).axpy(0.5, &dot(&state.chih, &state.chibh, g)).sub(&curv.rho);
    let mu = mu_tilde.add(&norm_sq(&state.zeta, g));
    MassAspect { mu_tilde, mu }
}

/// `L²(S_s)` residuals of the constraint and Bianchi equations on one leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub codazzi_chih: f64,
    pub codazzi_chibh: f64,
    pub curl_zeta: f64,
    pub gauss: f64,
    pub mass_transport: f64,
    pub bianchi_rho: f64,
    pub bianchi_sigma: f64,
    pub bianchi_betab: f64,
}

impl Residuals {
    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("codazzi_chih", self.codazzi_chih),
            ("codazzi_chibh", self.codazzi_chibh),
            ("curl_zeta", self.curl_zeta),
            ("gauss", self.gauss),
            ("mass_transport", self.mass_transport),
            ("bianchi_rho", self.bianchi_rho),
            ("bianchi_sigma", self.bianchi_sigma),
            ("bianchi_betab", self.bianchi_betab),
        ]
    }

    pub fn max(&self) -> f64 {
        self.named().iter().fold(0.0f64, |m, (_, v)| m.max(*v))
    }

    /// False when the supplied curvature violates a Bianchi identity by more than `tol`.
    pub fn bianchi_consistent(&self, tol: f64) -> bool {
        self.bianchi_rho <= tol && self.bianchi_sigma <= tol && self.bianchi_betab <= tol
    }
}

/// `d/ds Q` along the flow through `state`: `Q` is evaluated on the linear
/// jets `y ± δF(y)` (with curvature sampled at `s ± δ`), central-differenced
/// and Richardson-extrapolated in `δ`.
fn flow_derivative(
    state: &FoliationState,
    curv: &CurvatureInput,
    q: impl Fn(&FoliationState, &CurvatureSample) -> LeafField,
) -> Result<LeafField> {
    let lay = Layout::new(state.n_nodes());
    let rhs = Rhs { grid: state.grid(), layout: lay, curv, round_radius: state.gamma.round_radius() };
    let y = lay.pack(state);
    let f = rhs.eval(state.s, &y)?;
    let sqrt_det0: Vec<f64> = state.gamma.sqrt_det().iter().zip(state.v.values()).map(|(d, v)| d / v).collect();
    let scale = 1.0 + state.trchi.max_abs();
    let at = |d: f64| -> Result<LeafField> {
        let yd: Vec<f64> = y.iter().zip(&f).map(|(y, f)| y + d * f).collect();
        let st = lay.unpack(&yd, state.s + d, &state.gamma, &sqrt_det0)?;
        let c = curv.sample(st.s, &st.gamma);
        Ok(q(&st, &c))
    };
    let central = |d: f64| -> Result<LeafField> { Ok(at(d)?.sub(&at(-d)?).scale(0.5 / d)) };
    let d = 1e-3 / scale;
    let (coarse, fine) = (central(d)?, central(0.5 * d)?);
    Ok(fine.scale(4.0 / 3.0).axpy(-1.0 / 3.0, &coarse))
}

/// Residuals of the constraint equations, the mass-aspect transport and
/// the renormalized Bianchi identities on the leaf `state`.
///
/// Codazzi for `χ̂` is used in its general form
/// `div χ̂ = ½∇trχ + ½trχ ζ − χ̂·ζ − β`.
pub fn residuals(state: &FoliationState, curv: &CurvatureInput) -> Result<Residuals> {
    let g = &state.gamma;
    let c = curv.sample(state.s, g);
    let (trchi, chih, zeta, trchib, chibh) = (&state.trchi, &state.chih, &state.zeta, &state.trchib, &state.chibh);
    let l2 = |f: &LeafField| l2_norm(f, g);

    let codazzi_chih = div(chih, g)
        .add(&tensor_dot_form(chih, zeta, g))
        .axpy(-0.5, &grad(trchi, g))
        .axpy(-0.5, &zeta.mul_scalar(trchi))
        .add(&c.beta);
    let codazzi_chibh = div(chibh, g)
        .axpy(-0.5, &grad(trchib, g))
        .axpy(0.5, &zeta.mul_scalar(trchib))
        .sub(&tensor_dot_form(chibh, zeta, g))
        .sub(&c.betab);
    let curl_zeta = curl(zeta, g).axpy(0.5, &wedge(chih, chibh, g)).sub(&c.sigma);
    let gauss = gauss_curvature(g)
        .axpy(0.25, &trchi.mul_scalar(trchib))
        .axpy(-0.5, &dot(chih, chibh, g))
        .add(&c.rho);

    let hz = hat_otimes_grad(zeta, g);
    let zz = hat_product(zeta, zeta, g);
    let chih_sq = norm_sq(chih, g);
    let z_sq = norm_sq(zeta, g);
    let ren = RenormalizedCurvature::new(state, &c);
    // The curvature-free part μ + ρ is transported by the structure
    // equations alone once Codazzi is used for div χ̂.
    let geometric = |st: &FoliationState| {
        let g = &st.gamma;
        div(&st.zeta, g).scale(-1.0).axpy(0.5, &dot(&st.chih, &st.chibh, g)).add(&norm_sq(&st.zeta, g))
    };
    let mu_geo = geometric(state);
    let dmu = flow_derivative(state, curv, |st, _| geometric(st))?;
    let mass_rhs = dot(chih, &hz, g)
        .axpy(2.0, &dot(zeta, &grad(trchi, g), g))
        .axpy(-6.0, &dot(&tensor_dot_form(chih, zeta, g), zeta, g))
        .add(&trchi.mul_scalar(&z_sq))
        .axpy(-0.25, &trchib.mul_scalar(&chih_sq))
        .add(&div(&c.beta, g))
        .axpy(-5.0, &dot(&c.beta, zeta, g))
        .axpy(-0.5, &dot(&c.alpha, chibh, g));
    let mass_transport = dmu.axpy(1.5, &trchi.mul_scalar(&mu_geo)).sub(&mass_rhs);

    let drho = flow_derivative(state, curv, |st, cs| RenormalizedCurvature::new(st, cs).rho_check)?;
    let inner_rho = hz.axpy(0.5, &chih.mul_scalar(trchib)).sub(&zz);
    let rho_rhs = div(&c.beta, g).sub(&dot(zeta, &c.beta, g)).axpy(0.5, &dot(chih, &inner_rho, g));
    let bianchi_rho = drho.axpy(1.5, &trchi.mul_scalar(&ren.rho_check)).sub(&rho_rhs);

    let dsigma = flow_derivative(state, curv, |st, cs| RenormalizedCurvature::new(st, cs).sigma_check)?;
    let sigma_rhs = curl(&c.beta, g)
        .scale(-1.0)
        .add(&form_wedge(zeta, &c.beta, g))
        .axpy(0.5, &wedge(chih, &hz.sub(&zz), g));
    let bianchi_sigma = dsigma.axpy(1.5, &trchi.mul_scalar(&ren.sigma_check)).sub(&sigma_rhs);

    // ∇_L of a one-form in transported coordinates is ∂_s − χ·.
    let chi = state.chi();
    let dbetab = flow_derivative(state, curv, |st, cs| RenormalizedCurvature::new(st, cs).betab_check)?;
    let nabla_l_betab = dbetab.sub(&tensor_dot_form(&chi, &ren.betab_check, g));
    let mix = chibh.mul_scalar(trchi).scale(-0.5).axpy(-0.5, &chih.mul_scalar(trchib)).add(&zz);
    let betab_rhs = grad(&c.rho, g)
        .scale(-1.0)
        .add(&hodge_dual(&grad(&c.sigma, g), g)?)
        .axpy(-2.0, &tensor_dot_form(&hz, zeta, g))
        .axpy(3.0, &zeta.mul_scalar(&c.rho))
        .axpy(-3.0, &hodge_dual(zeta, g)?.mul_scalar(&c.sigma))
        .sub(&c.betab.mul_scalar(trchi))
        .axpy(2.0, &tensor_dot_form(&mix, zeta, g))
        .axpy(-4.0, &tensor_dot_form(&tensor_mul(chibh, &chi, g), zeta, g));
    let bianchi_betab = nabla_l_betab.sub(&betab_rhs);

    Ok(Residuals {
        codazzi_chih: l2(&codazzi_chih),
        codazzi_chibh: l2(&codazzi_chibh),
        curl_zeta: l2(&curl_zeta),
        gauss: l2(&gauss),
        mass_transport: l2(&mass_transport),
        bianchi_rho: l2(&bianchi_rho),
        bianchi_sigma: l2(&bianchi_sigma),
        bianchi_betab: l2(&bianchi_betab),
    })
}

pub(crate) fn s_grid(history: &[FoliationState]) -> Vec<f64> {
    history.iter().map(|st| st.s).collect()
}

pub(crate) fn need_samples(history: &[FoliationState], k: usize) -> Result<()> {
    if history.len() < k {
        return invalid(format!("need at least {k} leaves, got {}", history.len()));
    }
    if history.windows(2).any(|w| !(w[1].s > w[0].s)) {
        return invalid("leaves must be ordered by strictly increasing s");
    }
    Ok(())
}

/// Stencil width for s-derivatives of smooth histories.
const LAW_STENCIL: usize = 7;

fn fd_scalar(s: &[f64], vals: &[f64], i: usize) -> f64 {
    let (lo, w) = derivative_stencil(s, i, LAW_STENCIL);
    w.iter().enumerate().map(|(j, w)| w * vals[lo + j]).sum()
}

pub(crate) fn fd_field(s: &[f64], fields: &[LeafField], i: usize, width: usize) -> LeafField {
    let (lo, w) = derivative_stencil(s, i, width);
    let mut acc = fields[lo].scale(w[0]);
    for (j, wj) in w.iter().enumerate().skip(1) {
        acc = acc.axpy(*wj, &fields[lo + j]);
    }
    acc
}

/// `max_s sup_S |d/ds log√|γ| − trχ|`.
pub fn volume_law_residual(history: &[FoliationState]) -> Result<f64> {
    need_samples(history, 3)?;
    let s = s_grid(history);
    let logs: Vec<LeafField> =
        history.iter().map(|st| LeafField::scalar(st.gamma.sqrt_det().iter().map(|d| d.ln()).collect())).collect();
    Ok((0..history.len())
        .map(|i| fd_field(&s, &logs, i, LAW_STENCIL).sub(&history[i].trchi).max_abs())
        .fold(0.0, f64::max))
}

/// `max_s |dr/ds − (r/2) mean(trχ)|`.
pub fn area_law_residual(history: &[FoliationState]) -> Result<f64> {
    need_samples(history, 3)?;
    let s = s_grid(history);
    let r: Vec<f64> = history.iter().map(|st| st.r).collect();
    Ok((0..history.len())
        .map(|i| (fd_scalar(&s, &r, i) - 0.5 * r[i] * mean(&history[i].trchi, &history[i].gamma)).abs())
        .fold(0.0, f64::max))
}

/// `max_s |d/ds ∫f − ∫(df/ds + trχ f)|` for a scalar history `f`.
pub fn average_identity_residual(history: &[FoliationState], f: &[LeafField]) -> Result<f64> {
    need_samples(history, 3)?;
    if f.len() != history.len() {
        return invalid("one field per leaf is required");
    }
    let s = s_grid(history);
    let totals = history.iter().zip(f).map(|(st, f)| integrate(f, &st.gamma)).collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for (i, st) in history.iter().enumerate() {
        let lhs = fd_scalar(&s, &totals, i);
        let integrand = fd_field(&s, f, i, LAW_STENCIL).add(&f[i].mul_scalar(&st.trchi));
        worst = worst.max((lhs - integrate(&integrand, &st.gamma)?).abs());
    }
    Ok(worst)
}
