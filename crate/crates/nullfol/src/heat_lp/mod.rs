//! Heat flow `U(τ) = e^{τΔ}` on a leaf, the powers `Λ^a = (I − Δ)^{a/2}`,
//! telescoping Littlewood–Paley projections and the norms built on them.
//!
//! Everything is a spectral multiplier of `−Δ_γ`: closed form on round
//! leaves, Galerkin eigenbasis otherwise (see `sphere_core::spectral`).

use statrs::function::gamma::gamma;

use crate::error::{invalid, numeric, Result};
use crate::interp::derivative_stencil;
use crate::sphere_core::calculus::l2_norm;
use crate::sphere_core::spectral::{apply_multiplier, eigenvalues, spectral_energy};
use crate::sphere_core::{gauss_curvature, LeafField, MetricField};

/// Convergence threshold of the `Λ^{−a}` quadrature between successive doublings.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// Extra dyadic levels past `log₄ λ_max` carried by an [`LpStack`].
const LP_MARGIN: i64 = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatFlowParams {
    /// Upper cutoff of the heat-time integral.
    pub tau_max: f64,
    /// Starting number of quadrature nodes; doubled until converged.
    pub n_quad: usize,
    /// Heat-time substep for non-round leaves. The Galerkin eigenbasis applies
    /// `e^{−τλ}` exactly, so this only bounds the steps of [`heat_evolve_stepped`].
    pub substep: f64,
    pub tol: f64,
}

impl Default for HeatFlowParams {
    fn default() -> Self {
        Self { tau_max: 40.0, n_quad: 64, substep: 0.05, tol: QUADRATURE_TOL }
    }
}

impl HeatFlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_max > 0.0) {
            return invalid("tau_max must be positive");
        }
        if self.n_quad < 16 {
            return invalid("n_quad must be at least 16");
        }
        if !(self.substep > 0.0) || !(self.tol > 0.0) {
            return invalid("substep and tol must be positive");
        }
        Ok(())
    }
}

/// `U(τ)f = e^{τΔ}f`.
pub fn heat_evolve(f: &LeafField, tau: f64, g: &MetricField) -> Result<LeafField> {
    if !(tau >= 0.0) {
        return invalid(format!("heat time must be non-negative, got {tau}"));
    }
    if tau == 0.0 {
        return Ok(f.clone());
    }
    apply_multiplier(f, g, |lam| (-tau * lam).exp())
}

/// `U(τ)f` as a product of `⌈τ/substep⌉` equal heat steps; agrees with
/// [`heat_evolve`] by the semigroup law.
pub fn heat_evolve_stepped(f: &LeafField, tau: f64, g: &MetricField, params: &HeatFlowParams) -> Result<LeafField> {
    params.validate()?;
    if !(tau >= 0.0) {
        return invalid(format!("heat time must be non-negative, got {tau}"));
    }
    let n = (tau / params.substep).ceil().max(1.0) as usize;
    let h = tau / n as f64;
    let mut u = f.clone();
    for _ in 0..n {
        u = heat_evolve(&u, h, g)?;
    }
    Ok(u)
}

/// Heat-kernel quadrature of `(1 + λ)^{−b/2}` on the nodes `u = ln τ`.
struct NegativePower {
    b: f64,
    c: f64,
    u_min: f64,
    u_max: f64,
}

impl NegativePower {
    fn new(b: f64, band: usize, params: &HeatFlowParams) -> Self {
        // τ^{b/2} below e^{u_min} contributes under 1e-14 of the integral.
        let floor = ((band * band) as f64 * 4f64.ln()).max(2.0 / b * 1e14f64.ln());
        Self { b, c: 1.0 / gamma(b / 2.0), u_min: -floor, u_max: params.tau_max.ln() }
    }

    fn eval(&self, lam: f64, n: usize) -> f64 {
        let du = (self.u_max - self.u_min) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let u = self.u_min + du * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * (0.5 * self.b * u - (1.0 + lam) * u.exp()).exp();
        }
        self.c * s * du
    }
}

/// Node count at which the quadrature is converged on every eigenvalue.
fn converged_nodes(q: &NegativePower, lams: &[f64], params: &HeatFlowParams) -> Result<usize> {
    let mut n = params.n_quad;
    let mut prev: Vec<f64> = lams.iter().map(|l| q.eval(*l, n)).collect();
    let mut change = f64::INFINITY;
    for _ in 0..16 {
        n *= 2;
        let next: Vec<f64> = lams.iter().map(|l| q.eval(*l, n)).collect();
        change = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < params.tol {
            return Ok(n);
        }
        prev = next;
    }
    numeric("fractional-power quadrature did not converge", change)
}

/// `Λ^a f = (I − Δ)^{a/2} f` with default quadrature settings.
pub fn lambda_pow(f: &LeafField, a: f64, g: &MetricField) -> Result<LeafField> {
    lambda_pow_with(f, a, g, &HeatFlowParams::default())
}

/// `Λ^a f`; negative powers through `c_b ∫ τ^{b/2−1} e^{−τ} U(τ) f dτ`, `b = −a`.
pub fn lambda_pow_with(f: &LeafField, a: f64, g: &MetricField, params: &HeatFlowParams) -> Result<LeafField> {
    params.validate()?;
    if !a.is_finite() {
        return invalid("power must be finite");
    }
    if a == 0.0 {
        return Ok(f.clone());
    }
    if a > 0.0 {
        return apply_multiplier(f, g, |lam| (1.0 + lam).powf(0.5 * a));
    }
    let q = NegativePower::new(-a, g.grid().band_limit(), params);
    let lams = eigenvalues(g, f.rank())?;
    let n = converged_nodes(&q, &lams, params)?;
    apply_multiplier(f, g, |lam| q.eval(lam, n))
}

/// Littlewood–Paley level: the low block `P_{<0}` or a dyadic band `k ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpIndex {
    Low,
    Band(i64),
}

/// Telescoping projections `P_k = U(4^{−(k+1)}) − U(4^{−k})`, `P_{<0} = U(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpStack {
    pub k_min: i64,
    pub k_max: i64,
}

impl LpStack {
    /// Levels past which `U(4^{−k})` agrees with the identity on the grid spectrum.
    pub fn for_metric(g: &MetricField) -> Self {
        let lc = g.grid().work_band() as f64;
        let r = g.area_radius();
        // Galerkin eigenvalues stay within a constant of the round ones.
        let lam_max = 4.0 * lc * (lc + 1.0) / (r * r);
        let k_max = lam_max.max(1.0).log(4.0).ceil() as i64 + LP_MARGIN;
        Self { k_min: 0, k_max }
    }

    pub fn levels(&self) -> impl Iterator<Item = i64> {
        self.k_min..=self.k_max
    }

    pub fn contains(&self, idx: LpIndex) -> bool {
        match idx {
            LpIndex::Low => true,
            LpIndex::Band(k) => (self.k_min..=self.k_max).contains(&k),
        }
    }
}

/// Multiplier of `P_k` at eigenvalue `λ`.
pub fn lp_symbol(idx: LpIndex, lam: f64) -> f64 {
    match idx {
        LpIndex::Low => (-lam).exp(),
        LpIndex::Band(k) => {
            let hi = 4f64.powi(-(k as i32 + 1));
            let lo = 4f64.powi(-(k as i32));
            (-hi * lam).exp() - (-lo * lam).exp()
        }
    }
}

pub fn lp_project(f: &LeafField, idx: LpIndex, g: &MetricField) -> Result<LeafField> {
    let stack = LpStack::for_metric(g);
    if !stack.contains(idx) {
        return invalid(format!("projection level {idx:?} outside 0..={}", stack.k_max));
    }
    apply_multiplier(f, g, |lam| lp_symbol(idx, lam))
}

/// `‖P f‖_{L²}` for every level: low block first, then `k = k_min..=k_max`.
pub fn lp_norms(f: &LeafField, g: &MetricField) -> Result<(f64, Vec<f64>)> {
    let stack = LpStack::for_metric(g);
    let energy = spectral_energy(f, g)?;
    let norm = |idx: LpIndex| {
        energy.iter().map(|(lam, e)| lp_symbol(idx, *lam).powi(2) * e).sum::<f64>().sqrt()
    };
    let low = norm(LpIndex::Low);
    let bands = stack.levels().map(|k| norm(LpIndex::Band(k))).collect();
    Ok((low, bands))
}

fn check_index(a: f64) -> Result<()> {
    if !(0.0..=2.0).contains(&a) {
        return invalid(format!("regularity index must lie in [0, 2], got {a}"));
    }
    Ok(())
}

/// `Σ_{k≥0} 2^{ak}‖P_k f‖ + ‖P_{<0} f‖`.
pub fn besov_norm(f: &LeafField, a: f64, g: &MetricField) -> Result<f64> {
    check_index(a)?;
    let (low, bands) = lp_norms(f, g)?;
    let sum: f64 = bands.iter().enumerate().map(|(k, n)| 2f64.powf(a * k as f64) * n).sum();
    Ok(sum + low)
}

/// `(Σ_{k≥0} 4^{ak}‖P_k f‖²)^{1/2} + ‖P_{<0} f‖`.
pub fn sobolev_norm(f: &LeafField, a: f64, g: &MetricField) -> Result<f64> {
    check_index(a)?;
    let (low, bands) = lp_norms(f, g)?;
    let sum: f64 = bands.iter().enumerate().map(|(k, n)| 4f64.powf(a * k as f64) * n * n).sum();
    Ok(sum.sqrt() + low)
}

/// One leaf of an evolution history: affine parameter, metric and a scalar
/// sampled in transported coordinates.
#[derive(Debug, Clone, Copy)]
pub struct LeafSample<'a> {
    pub s: f64,
    pub metric: &'a MetricField,
    pub field: &'a LeafField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorReport {
    pub a: f64,
    pub eps: f64,
    /// `‖Λ^{−a}(K − 1/r²)‖_{L^∞_t L²_x}`.
    pub k_a: f64,
    /// `1 + K_a^{1/(1−a)} + K_a^{1/2}`.
    pub i_a: f64,
    /// `‖[∇_L, Λ^{−a}] f‖_{L¹_t L²_x}`.
    pub lhs_norm: f64,
    /// `I_a^ε ‖f‖_{L²_t L²_x}`.
    pub rhs_norm: f64,
    pub ratio: f64,
}

fn derivative(s: &[f64], values: &[LeafField], i: usize) -> LeafField {
    let (lo, w) = derivative_stencil(s, i, 3);
    let mut out = values[lo].scale(w[0]);
    for (j, c) in w.iter().enumerate().skip(1) {
        out = out.axpy(*c, &values[lo + j]);
    }
    out
}

/// Trapezoid rule on the sample parameters.
fn trapezoid(s: &[f64], v: &[f64]) -> f64 {
    s.windows(2).zip(v.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Measures `‖[∇_L, Λ^{−a}] f‖_{L¹_tL²_x}` against `I_a^ε ‖f‖_{L²_tL²_x}`.
///
/// On transported coordinates `∇_L f = ∂_s f` for scalars, realized by
/// second-order differences across the samples.
pub fn commutator_diag(samples: &[LeafSample<'_>], a: f64, eps: f64) -> Result<CommutatorReport> {
    if samples.len() < 3 {
        return invalid(format!("commutator needs at least 3 leaves, got {}", samples.len()));
    }
    if !(a > 0.0 && a < 1.0) {
        return invalid(format!("commutator power must lie in (0, 1), got {a}"));
    }
    if !(eps >= 0.0) {
        return invalid("eps must be non-negative");
    }
    let s: Vec<f64> = samples.iter().map(|x| x.s).collect();
    if s.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("sample parameters must increase strictly");
    }
    for x in samples {
        x.field.expect_rank(crate::sphere_core::Rank::Scalar, "commutator field")?;
    }
    let fields: Vec<LeafField> = samples.iter().map(|x| x.field.clone()).collect();
    let smoothed = samples
        .iter()
        .map(|x| lambda_pow(x.field, -a, x.metric))
        .collect::<Result<Vec<_>>>()?;
    let mut k_a: f64 = 0.0;
    let mut comm = Vec::with_capacity(samples.len());
    let mut mass = Vec::with_capacity(samples.len());
    for (i, x) in samples.iter().enumerate() {
        let g = x.metric;
        let r = g.area_radius();
        let dev = gauss_curvature(g).map(|k| k - 1.0 / (r * r));
        k_a = k_a.max(l2_norm(&lambda_pow(&dev, -a, g)?, g));
        let df = derivative(&s, &fields, i);
        let c = derivative(&s, &smoothed, i).sub(&lambda_pow(&df, -a, g)?);
        comm.push(l2_norm(&c, g));
        mass.push(l2_norm(x.field, g).powi(2));
    }
    let i_a = 1.0 + k_a.powf(1.0 / (1.0 - a)) + k_a.sqrt();
    let lhs_norm = trapezoid(&s, &comm);
    let rhs_norm = i_a.powf(eps) * trapezoid(&s, &mass).sqrt();
    let ratio = if rhs_norm > 0.0 { lhs_norm / rhs_norm } else if lhs_norm == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(CommutatorReport { a, eps, k_a, i_a, lhs_norm, rhs_norm, ratio })
}
