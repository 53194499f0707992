use crate::error::{invalid, Result};
use crate::interp::{cubic_stencil, interval_weights};
use crate::sphere_core::calculus::{mean, norm_sq};
use crate::sphere_core::LeafField;

use super::diagnostics::{need_samples, s_grid};
use super::state::FoliationState;

fn combine(fields: &[LeafField], lo: usize, w: &[f64]) -> LeafField {
    let mut acc = fields[lo].scale(w[0]);
    for (j, wj) in w.iter().enumerate().skip(1) {
        acc = acc.axpy(*wj, &fields[lo + j]);
    }
    acc
}

fn interpolate(s: &[f64], fields: &[LeafField], x: f64) -> LeafField {
    let (lo, w) = cubic_stencil(s, x);
    combine(fields, lo, &w)
}

/// Running integrals `∫_{s_0}^{s_i} f` of the cubic interpolant.
fn cumulative(s: &[f64], fields: &[LeafField]) -> Vec<LeafField> {
    let mut out = vec![fields[0].scale(0.0)];
    for i in 0..s.len() - 1 {
        let (lo, w) = interval_weights(s, i);
        out.push(out[i].add(&combine(fields, lo, &w)));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// Integrating-factor solution `v^{−k}(f₀ + ∫ v^k g)` at each sample.
    pub values: Vec<LeafField>,
    /// Direct RK4 solution with interpolated coefficients.
    pub rk4: Vec<LeafField>,
    /// `max |values − rk4|` over samples and components.
    pub discrepancy: f64,
}

/// Solves `df/ds + k trχ f = g` along the generators.
///
/// `kappa` is the `trχ` history on the sample grid `s`; `v` is rebuilt from
/// `log v = ∫trχ`, so the integrating factor and the direct scheme share
/// only the interpolated data.
pub fn transport_solve(k: f64, s: &[f64], kappa: &[LeafField], f0: &LeafField, g: &[LeafField]) -> Result<TransportSolution> {
    if s.len() < 2 || kappa.len() != s.len() || g.len() != s.len() {
        return invalid("transport data must give trχ and g at every one of at least two samples");
    }
    if s.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("sample grid must increase strictly");
    }
    if !k.is_finite() {
        return invalid("transport exponent must be finite");
    }
    let nc = f0.rank().n_comp();
    if g.iter().any(|gi| gi.values().len() != f0.values().len()) || kappa.iter().any(|c| c.values().len() * nc != f0.values().len()) {
        return invalid("f₀, g and trχ must live on one grid with matching ranks");
    }
    let logv = cumulative(s, kappa);
    let weight: Vec<LeafField> = logv.iter().map(|l| l.map(|x| (k * x).exp())).collect();
    let weighted: Vec<LeafField> = g.iter().zip(&weight).map(|(g, w)| g.mul_scalar(w)).collect();
    let acc = cumulative(s, &weighted);
    let values: Vec<LeafField> =
        acc.iter().zip(&weight).map(|(a, w)| f0.add(a).mul_scalar(&w.map(|x| 1.0 / x))).collect();

    let deriv = |kap: &LeafField, gi: &LeafField, f: &LeafField| gi.sub(&f.mul_scalar(kap).scale(k));
    let mut rk4 = vec![f0.clone()];
    for i in 0..s.len() - 1 {
        let h = s[i + 1] - s[i];
        let mid = 0.5 * (s[i] + s[i + 1]);
        let (km, gm) = (interpolate(s, kappa, mid), interpolate(s, g, mid));
        let f = &rk4[i];
        let k1 = deriv(&kappa[i], &g[i], f);
        let k2 = deriv(&km, &gm, &f.axpy(0.5 * h, &k1));
        let k3 = deriv(&km, &gm, &f.axpy(0.5 * h, &k2));
        let k4 = deriv(&kappa[i + 1], &g[i + 1], &f.axpy(h, &k3));
        let next = f.axpy(h / 6.0, &k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4));
        rk4.push(next);
    }
    let discrepancy = values.iter().zip(&rk4).map(|(a, b)| a.sub(b).max_abs()).fold(0.0, f64::max);
    Ok(TransportSolution { values, rk4, discrepancy })
}

/// Split of `trχ − 2/r` into its mean `W` and oscillation `V`, each carried
/// by its own transport equation.
#[derive(Debug, Clone)]
pub struct AverageSplit {
    pub s: Vec<f64>,
    pub v: Vec<LeafField>,
    pub w: Vec<f64>,
    /// `sup_S |V + W − (trχ − 2/r)|` at each sample.
    pub residual: Vec<f64>,
}

impl AverageSplit {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }
}

/// Integrates
/// `W' = −½ tr̄χ W + ½ mean(V²) − mean|χ̂|²` and
/// `V' = −½(trχ + tr̄χ)V − (|χ̂|² − mean|χ̂|²) − ½ mean(V²)`
/// with RK4 over the history intervals, coefficients interpolated cubically.
pub fn average_split(history: &[FoliationState]) -> Result<AverageSplit> {
    need_samples(history, 2)?;
    let s = s_grid(history);
    let grid = history[0].grid().clone();
    let weights = grid.quad_weights();
    let trchi: Vec<LeafField> = history.iter().map(|st| st.trchi.clone()).collect();
    let chih_sq: Vec<LeafField> = history.iter().map(|st| norm_sq(&st.chih, &st.gamma)).collect();
    let area: Vec<LeafField> = history.iter().map(|st| LeafField::scalar(st.gamma.sqrt_det().to_vec())).collect();

    let avg = |f: &LeafField, da: &LeafField| -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for ((f, a), w) in f.values().iter().zip(da.values()).zip(weights) {
            num += w * a * f;
            den += w * a;
        }
        num / den
    };
    // Coefficients (trχ, |χ̂|², dA) at a sample or an interpolated point.
    let rhs = |tr: &LeafField, sq: &LeafField, da: &LeafField, v: &LeafField, w: f64| -> (LeafField, f64) {
        let tbar = avg(tr, da);
        let sq_bar = avg(sq, da);
        let v2 = avg(&v.map(|x| x * x), da);
        let dw = -0.5 * tbar * w + 0.5 * v2 - sq_bar;
        let dv = v
            .mul_scalar(&tr.map(|t| -0.5 * (t + tbar)))
            .sub(&sq.map(|x| x - sq_bar))
            .map(|x| x - 0.5 * v2);
        (dv, dw)
    };

    let first = &history[0];
    let t0 = mean(&first.trchi, &first.gamma);
    let mut vs = vec![first.trchi.map(|t| t - t0)];
    let mut ws = vec![t0 - 2.0 / first.r];
    for i in 0..s.len() - 1 {
        let h = s[i + 1] - s[i];
        let mid = 0.5 * (s[i] + s[i + 1]);
        let (tm, qm, am) = (interpolate(&s, &trchi, mid), interpolate(&s, &chih_sq, mid), interpolate(&s, &area, mid));
        let (v, w) = (&vs[i], ws[i]);
        let (a1, b1) = rhs(&trchi[i], &chih_sq[i], &area[i], v, w);
        let (a2, b2) = rhs(&tm, &qm, &am, &v.axpy(0.5 * h, &a1), w + 0.5 * h * b1);
        let (a3, b3) = rhs(&tm, &qm, &am, &v.axpy(0.5 * h, &a2), w + 0.5 * h * b2);
        let (a4, b4) = rhs(&trchi[i + 1], &chih_sq[i + 1], &area[i + 1], &v.axpy(h, &a3), w + h * b3);
        vs.push(v.axpy(h / 6.0, &a1.add(&a2.scale(2.0)).add(&a3.scale(2.0)).add(&a4)));
        ws.push(w + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4));
    }
    let residual = history
        .iter()
        .zip(vs.iter().zip(&ws))
        .map(|(st, (v, w))| v.map(|x| x + w).sub(&st.trchi.map(|t| t - 2.0 / st.r)).max_abs())
        .collect();
    Ok(AverageSplit { s, v: vs, w: ws, residual })
}
