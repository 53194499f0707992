use std::sync::Arc;

use crate::error::{invalid, numeric, NullfolError, Result};
use crate::sphere_core::calculus::{div, hat_otimes_grad};
use crate::sphere_core::tensor::{inv2, mat_mul, trace_free, Mat2};
use crate::sphere_core::{LeafField, MetricField, Rank, SphereGrid};

use super::curvature::{CurvatureInput, CurvatureSample};
use super::state::FoliationState;

/// Step control for [`evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveParams {
    /// Nominal step; the controller never exceeds it.
    pub h: f64,
    /// Bound on the mixed local error `max |y₂ − y₁| / (1 + |y₂|)`.
    pub tol: f64,
    pub caustic_threshold: f64,
    /// Consecutive rejections allowed before giving up.
    pub max_halvings: u32,
    /// Keep every `record_stride`-th accepted leaf (the first and last are always kept).
    pub record_stride: usize,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self { h: 1e-2, tol: 1e-9, caustic_threshold: 1e6, max_halvings: 60, record_stride: 1 }
    }
}

impl EvolveParams {
    pub fn with_step(h: f64) -> Self {
        Self { h, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return invalid(format!("step size must be positive, got {}", self.h));
        }
        if !(self.tol > 0.0) || !(self.caustic_threshold > 0.0) || self.record_stride == 0 {
            return invalid("tolerance, caustic threshold and record stride must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    /// `max |trχ|` crossed the threshold at `s`.
    Caustic { s: f64 },
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub history: Vec<FoliationState>,
    pub termination: Termination,
    pub accepted: usize,
    pub rejected: usize,
}

impl Evolution {
    pub fn s_grid(&self) -> Vec<f64> {
        self.history.iter().map(|st| st.s).collect()
    }
    pub fn last(&self) -> &FoliationState {
        self.history.last().expect("history holds the initial leaf")
    }
}

/// Offsets of the packed state `[γ | trχ | χ̂ | ζ | trχ̲ | χ̲̂]`.
#[derive(Clone, Copy)]
pub(crate) struct Layout {
    n: usize,
}

impl Layout {
    pub(crate) fn new(n: usize) -> Self {
        Self { n }
    }
    fn gamma(&self) -> usize {
        0
    }
    fn trchi(&self) -> usize {
        4 * self.n
    }
    fn chih(&self) -> usize {
        5 * self.n
    }
    fn zeta(&self) -> usize {
        9 * self.n
    }
    fn trchib(&self) -> usize {
        11 * self.n
    }
    fn chibh(&self) -> usize {
        12 * self.n
    }
    pub(crate) fn len(&self) -> usize {
        16 * self.n
    }

    pub(crate) fn pack(&self, st: &FoliationState) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.len());
        y.extend_from_slice(st.gamma.components());
        y.extend_from_slice(st.trchi.values());
        y.extend_from_slice(st.chih.values());
        y.extend_from_slice(st.zeta.values());
        y.extend_from_slice(st.trchib.values());
        y.extend_from_slice(st.chibh.values());
        y
    }

    /// Rebuilds a leaf; `v` is taken relative to `sqrt_det0`.
    pub(crate) fn unpack(&self, y: &[f64], s: f64, like: &MetricField, sqrt_det0: &[f64]) -> Result<FoliationState> {
        let n = self.n;
        let gamma = MetricField::from_components(like.grid().clone(), y[..4 * n].to_vec(), like.round_radius(), like.amplitude())?;
        let v = LeafField::scalar(gamma.sqrt_det().iter().zip(sqrt_det0).map(|(a, b)| a / b).collect());
        let field = |rank: Rank, lo: usize, len: usize| LeafField::new(rank, y[lo..lo + len].to_vec());
        FoliationState::new(
            s,
            Arc::new(gamma),
            field(Rank::Scalar, self.trchi(), n),
            field(Rank::SymTraceless2, self.chih(), 4 * n),
            field(Rank::OneForm, self.zeta(), 2 * n),
            field(Rank::Scalar, self.trchib(), n),
            field(Rank::SymTraceless2, self.chibh(), 4 * n),
            v,
        )
    }
}

fn mat(y: &[f64], lo: usize) -> Mat2 {
    [y[lo], y[lo + 1], y[lo + 2], y[lo + 3]]
}

/// Right-hand side of the structure equations in transported coordinates:
/// `∂_s U_ab = ∇_L U_ab + χ_a^c U_cb + χ_b^c U_ac`.
pub(crate) struct Rhs<'a> {
    pub grid: &'a Arc<SphereGrid>,
    pub layout: Layout,
    pub curv: &'a CurvatureInput,
    pub round_radius: f64,
}

impl Rhs<'_> {
    pub(crate) fn eval(&self, s: f64, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.layout.len()];
        self.eval_into(s, y, &mut out)?;
        Ok(out)
    }

    /// Writes every entry of `out`.
    fn eval_into(&self, s: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let lay = self.layout;
        let n = lay.n;
        let zeta_vals = &y[lay.zeta()..lay.zeta() + 2 * n];
        let spatial = zeta_vals.iter().any(|v| *v != 0.0);
        let needs_metric = spatial || !self.curv.is_zero();
        let metric = if needs_metric {
            Some(MetricField::from_components(self.grid.clone(), y[..4 * n].to_vec(), self.round_radius, 0.0)?)
        } else {
            None
        };
        let (divz, hess) = match (&metric, spatial) {
            (Some(g), true) => {
                let z = LeafField::one_form(zeta_vals.to_vec());
                (Some(div(&z, g)), Some(hat_otimes_grad(&z, g)))
            }
            _ => (None, None),
        };
        let curv: Option<CurvatureSample> = metric.as_ref().filter(|_| !self.curv.is_zero()).map(|g| self.curv.sample(s, g));

        let (d_gamma, rest) = out.split_at_mut(lay.trchi());
        let (d_trchi, rest) = rest.split_at_mut(n);
        let (d_chih, rest) = rest.split_at_mut(4 * n);
        let (d_zeta, rest) = rest.split_at_mut(2 * n);
        let (d_trchib, d_chibh) = rest.split_at_mut(n);
        let gamma = &y[..4 * n];
        let trchi = &y[lay.trchi()..lay.trchi() + n];
        let chih = &y[lay.chih()..lay.chih() + 4 * n];
        let trchib = &y[lay.trchib()..lay.trchib() + n];
        let chibh = &y[lay.chibh()..lay.chibh() + 4 * n];
        for k in 0..n {
            let g = mat(gamma, 4 * k);
            let inv = inv2(&g);
            let tr = trchi[k];
            let ch = mat(chih, 4 * k);
            let z = [zeta_vals[2 * k], zeta_vals[2 * k + 1]];
            let trb = trchib[k];
            let cbh = mat(chibh, 4 * k);

            // χ̂ with both indices raised serves both contractions.
            let up = mat_mul(&mat_mul(&inv, &ch), &[inv[0], inv[2], inv[1], inv[3]]);
            let chih_sq = ch[0] * up[0] + ch[1] * up[1] + ch[2] * up[2] + ch[3] * up[3];
            let chih_chibh = cbh[0] * up[0] + cbh[1] * up[1] + cbh[2] * up[2] + cbh[3] * up[3];
            let zup = [inv[0] * z[0] + inv[1] * z[1], inv[2] * z[0] + inv[3] * z[1]];
            let z_sq = z[0] * zup[0] + z[1] * zup[1];
            let chih_z = [ch[0] * zup[0] + ch[1] * zup[1], ch[2] * zup[0] + ch[3] * zup[1]];
            let zz = trace_free(&g, &inv, &[2.0 * z[0] * z[0], 2.0 * z[0] * z[1], 2.0 * z[0] * z[1], 2.0 * z[1] * z[1]]);

            let (alpha, beta, rho) = match &curv {
                Some(c) => (mat(c.alpha.values(), 4 * k), [c.beta.at(k)[0], c.beta.at(k)[1]], c.rho.values()[k]),
                None => ([0.0; 4], [0.0; 2], 0.0),
            };
            let dz = divz.as_ref().map_or(0.0, |d| d.values()[k]);
            let hz = hess.as_ref().map_or([0.0; 4], |h| mat(h.values(), 4 * k));

            let (dg, dch, dcb) = (&mut d_gamma[4 * k..4 * k + 4], &mut d_chih[4 * k..4 * k + 4], &mut d_chibh[4 * k..4 * k + 4]);
            for i in 0..4 {
                dg[i] = 2.0 * ch[i] + tr * g[i];
                dch[i] = chih_sq * g[i] - alpha[i];
                dcb[i] = -hz[i] + 0.5 * tr * cbh[i] - 0.5 * trb * ch[i] + zz[i] + chih_chibh * g[i];
            }
            d_trchi[k] = -0.5 * tr * tr - chih_sq;
            let dzeta = &mut d_zeta[2 * k..2 * k + 2];
            for a in 0..2 {
                dzeta[a] = -0.5 * tr * z[a] - chih_z[a] - beta[a];
            }
            d_trchib[k] = -0.5 * tr * trb - 2.0 * dz - chih_chibh + 2.0 * z_sq + 2.0 * rho;
        }
        Ok(())
    }
}

fn axpy_into(y: &[f64], a: f64, k: &[f64], out: &mut [f64]) {
    for ((o, y), k) in out.iter_mut().zip(y).zip(k) {
        *o = y + a * k;
    }
}

/// Stage buffers reused across steps.
struct Stages {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stages {
    fn new(len: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; len]), tmp: vec![0.0; len] }
    }
}

/// One classical RK4 step into `out`; `k1 = f(s, y)` is passed in so step
/// doubling can share it.
fn rk4(rhs: &Rhs, s: f64, y: &[f64], k1: &[f64], h: f64, st: &mut Stages, out: &mut [f64]) -> Result<()> {
    let [k2, k3, k4, _] = &mut st.k;
    axpy_into(y, 0.5 * h, k1, &mut st.tmp);
    rhs.eval_into(s + 0.5 * h, &st.tmp, k2)?;
    axpy_into(y, 0.5 * h, k2, &mut st.tmp);
    rhs.eval_into(s + 0.5 * h, &st.tmp, k3)?;
    axpy_into(y, h, k3, &mut st.tmp);
    rhs.eval_into(s + h, &st.tmp, k4)?;
    let c = h / 6.0;
    for (i, o) in out.iter_mut().enumerate() {
        *o = y[i] + c * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

/// Symmetrizes `γ`, `χ̂`, `χ̲̂` and removes the round-off trace of the hatted tensors.
fn clean(lay: Layout, y: &mut [f64]) {
    for k in 0..lay.n {
        let gi = lay.gamma() + 4 * k;
        let off = 0.5 * (y[gi + 1] + y[gi + 2]);
        y[gi + 1] = off;
        y[gi + 2] = off;
        let g = mat(y, gi);
        let inv = inv2(&g);
        for lo in [lay.chih() + 4 * k, lay.chibh() + 4 * k] {
            let t = mat(y, lo);
            let o = 0.5 * (t[1] + t[2]);
            let tf = trace_free(&g, &inv, &[t[0], o, o, t[3]]);
            y[lo..lo + 4].copy_from_slice(&tf);
        }
    }
}

fn max_abs_trchi(lay: Layout, y: &[f64]) -> f64 {
    y[lay.trchi()..lay.trchi() + lay.n].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn rejection_failure(e: &NullfolError) -> bool {
    matches!(e, NullfolError::InvalidArgument(_))
}

/// Integrates the structure equations from `initial.s` to `s_end` with
/// step-doubling RK4.
///
/// Steps are capped so that `max|trχ|·h ≤ 0.1`; the run ends early with
/// [`Termination::Caustic`] once `max|trχ|` exceeds the threshold.
pub fn evolve(initial: &FoliationState, curv: &CurvatureInput, s_end: f64, params: &EvolveParams) -> Result<Evolution> {
    params.validate()?;
    if !(s_end >= initial.s) || !s_end.is_finite() {
        return invalid(format!("s_end = {s_end} must not precede the initial leaf at {}", initial.s));
    }
    let n = initial.n_nodes();
    let lay = Layout::new(n);
    let like = initial.gamma.clone();
    let sqrt_det0: Vec<f64> = initial.gamma.sqrt_det().iter().zip(initial.v.values()).map(|(d, v)| d / v).collect();
    let rhs = Rhs { grid: initial.grid(), layout: lay, curv, round_radius: like.round_radius() };

    let mut y = lay.pack(initial);
    let mut s = initial.s;
    let mut h = params.h;
    let mut history = vec![initial.clone()];
    let (mut accepted, mut rejected, mut streak) = (0usize, 0usize, 0u32);
    let span = (s_end - initial.s).max(1.0);

    let mut stages = Stages::new(lay.len());
    let (mut k1, mut full, mut half, mut next) = (y.clone(), y.clone(), y.clone(), y.clone());
    while s_end - s > 1e-14 * span {
        let mut step = h.min(s_end - s);
        let tmax = max_abs_trchi(lay, &y);
        while tmax * step > 0.1 {
            step *= 0.5;
        }
        let mut attempt = || -> Result<f64> {
            rhs.eval_into(s, &y, &mut k1)?;
            rk4(&rhs, s, &y, &k1, step, &mut stages, &mut full)?;
            rk4(&rhs, s, &y, &k1, 0.5 * step, &mut stages, &mut half)?;
            rhs.eval_into(s + 0.5 * step, &half, &mut k1)?;
            rk4(&rhs, s + 0.5 * step, &half, &k1, 0.5 * step, &mut stages, &mut next)?;
            Ok(full.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / (1.0 + b.abs()))))
        };
        let ok = match attempt() {
            Ok(err) if err.is_finite() && next.iter().all(|v| v.is_finite()) && err <= params.tol => Some(err),
            Ok(_) => None,
            Err(e) if rejection_failure(&e) => None,
            Err(e) => return Err(e),
        };
        let Some(err) = ok else {
            rejected += 1;
            streak += 1;
            if streak > params.max_halvings {
                return numeric(format!("step rejected {streak} times in a row at s = {s}"), step);
            }
            h = 0.5 * step;
            continue;
        };
        streak = 0;
        accepted += 1;
        clean(lay, &mut next);
        s = if s_end - (s + step) <= 1e-14 * span { s_end } else { s + step };
        std::mem::swap(&mut y, &mut next);
        if err < params.tol / 64.0 {
            h = (2.0 * h).min(params.h);
        }
        let caustic = max_abs_trchi(lay, &y) > params.caustic_threshold;
        if caustic || s == s_end || accepted % params.record_stride == 0 {
            history.push(lay.unpack(&y, s, &like, &sqrt_det0)?);
        }
        if caustic {
            return Ok(Evolution { history, termination: Termination::Caustic { s }, accepted, rejected });
        }
    }
    Ok(Evolution { history, termination: Termination::Completed, accepted, rejected })
}
