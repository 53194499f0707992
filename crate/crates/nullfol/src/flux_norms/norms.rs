use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::heat_lp::lp_norms;
use crate::interp::cumulative_integrals;
use crate::null_evolution::{CurvatureInput, FoliationState};
use crate::sphere_core::calculus::{covariant_derivative, l2_norm, norm_sq};
use crate::sphere_core::LeafField;

use super::history::HistoryField;

/// Largest value of a prefix series; `0` for an empty one.
pub(crate) fn last(v: &[f64]) -> f64 {
    v.last().copied().unwrap_or(0.0)
}

fn root(x: f64) -> f64 {
    x.max(0.0).sqrt()
}

/// Pointwise `|F|_γ` at every node of every sample.
fn pointwise(f: &HistoryField) -> Vec<Vec<f64>> {
    f.fields()
        .iter()
        .zip(f.metrics())
        .map(|(x, g)| norm_sq(x, g).values().iter().map(|v| root(*v)).collect())
        .collect()
}

/// `(∫_0^{s_i} v)^{1/2}` for every `i`.
fn prefix_l2_in_s(s: &[f64], sq: &[f64]) -> Vec<f64> {
    cumulative_integrals(s, sq).into_iter().map(root).collect()
}

/// `‖F‖_{L²(H_{s_i})}` for every `i`, with the evolving area element.
pub(crate) fn prefix_l2_h(f: &HistoryField) -> Vec<f64> {
    let sq: Vec<f64> = f.fields().iter().zip(f.metrics()).map(|(x, g)| l2_norm(x, g).powi(2)).collect();
    prefix_l2_in_s(f.s_grid(), &sq)
}

pub fn l2_h(f: &HistoryField) -> f64 {
    last(&prefix_l2_h(f))
}

/// Square root of the summed squared `L²(H)` norms of `α, β, ρ, σ, β̲` over a run.
pub fn curvature_flux(history: &[FoliationState], curv: &CurvatureInput) -> Result<f64> {
    if history.is_empty() {
        return invalid("curvature flux needs at least one leaf");
    }
    if history.windows(2).any(|w| !(w[1].s > w[0].s)) {
        return invalid("leaves must be ordered by strictly increasing s");
    }
    let s: Vec<f64> = history.iter().map(|st| st.s).collect();
    let sq: Vec<f64> = history
        .iter()
        .map(|st| {
            let g = &st.gamma;
            let c = curv.sample(st.s, g);
            [&c.alpha, &c.beta, &c.rho, &c.sigma, &c.betab].iter().map(|x| l2_norm(x, g).powi(2)).sum()
        })
        .collect();
    Ok(last(&prefix_l2_in_s(&s, &sq)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormLevel {
    One,
    Two,
}

/// Per-leaf squared `L²(S_s)` norms of the pieces of `N₁` (`F, ∇F, ∇_L F`)
/// and, for `N₂`, also `∇²F, ∇∇_L F`.
fn n_pieces(f: &HistoryField, level: NormLevel) -> Result<Vec<Vec<f64>>> {
    let lf = f.nabla_l()?;
    let rows = f
        .fields()
        .par_iter()
        .zip(f.metrics().par_iter())
        .zip(lf.par_iter())
        .map(|((x, g), l)| {
            let dx = covariant_derivative(x, g);
            let mut row = vec![l2_norm(x, g).powi(2), l2_norm(&dx, g).powi(2), l2_norm(l, g).powi(2)];
            if level == NormLevel::Two {
                row.push(l2_norm(&covariant_derivative(&dx, g), g).powi(2));
                row.push(l2_norm(&covariant_derivative(l, g), g).powi(2));
            }
            row
        })
        .collect();
    Ok(rows)
}

/// `N₁` or `N₂` on every prefix `H_{s_i}`.
pub(crate) fn prefix_n_norm(f: &HistoryField, level: NormLevel) -> Result<Vec<f64>> {
    let rows = n_pieces(f, level)?;
    let mut out = vec![0.0; f.len()];
    for j in 0..rows[0].len() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        for (o, v) in out.iter_mut().zip(prefix_l2_in_s(f.s_grid(), &col)) {
            *o += v;
        }
    }
    Ok(out)
}

/// `N₁(F) = ‖F‖ + ‖∇F‖ + ‖∇_L F‖`, `N₂` adding `‖∇²F‖ + ‖∇∇_L F‖`, all in `L²(H)`.
pub fn n_norms(f: &HistoryField, level: NormLevel) -> Result<f64> {
    Ok(last(&prefix_n_norm(f, level)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MixedKind {
    LxInfLt2,
    Lx2LtInf,
    LtInfLx2,
    LtInfLxp,
    Lt2Lxp,
}

impl MixedKind {
    pub fn name(self) -> &'static str {
        match self {
            MixedKind::LxInfLt2 => "LxInf_Lt2",
            MixedKind::Lx2LtInf => "Lx2_LtInf",
            MixedKind::LtInfLx2 => "LtInf_Lx2",
            MixedKind::LtInfLxp => "LtInf_Lxp",
            MixedKind::Lt2Lxp => "Lt2_Lxp",
        }
    }

    fn takes_p(self) -> bool {
        matches!(self, MixedKind::LtInfLxp | MixedKind::Lt2Lxp)
    }
}

/// `‖·‖_{L^p(S_0)}` of nodal values against the initial area weights; `p = ∞` is the node maximum.
fn lx(values: &[f64], weights: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(*v));
    }
    let sum: f64 = values.iter().zip(weights).map(|(v, w)| w * v.powf(p)).sum();
    sum.max(0.0).powf(1.0 / p)
}

/// `‖F‖_{L_t^q L_x^p}` on every prefix; `q` or `p` may be infinite.
pub(crate) fn prefix_lt_lx(f: &HistoryField, q: f64, p: f64) -> Vec<f64> {
    let w = f.initial_area_weights();
    let per_leaf: Vec<f64> = pointwise(f).iter().map(|v| lx(v, &w, p)).collect();
    if q.is_infinite() {
        let mut m = 0.0f64;
        return per_leaf.iter().map(|v| {
            m = m.max(*v);
            m
        }).collect();
    }
    let pow: Vec<f64> = per_leaf.iter().map(|v| v.powf(q)).collect();
    cumulative_integrals(f.s_grid(), &pow).into_iter().map(|x| x.max(0.0).powf(1.0 / q)).collect()
}

/// `sup_ω (∫ |F|² ds)^{1/2}` on every prefix.
pub(crate) fn prefix_lxinf_lt2(f: &HistoryField) -> Vec<f64> {
    let pw = pointwise(f);
    let n = pw[0].len();
    let sq: Vec<LeafField> = pw.iter().map(|v| LeafField::scalar(v.iter().map(|x| x * x).collect())).collect();
    let mut acc = vec![0.0; n];
    let mut out = vec![0.0];
    let s = f.s_grid();
    for i in 0..s.len().saturating_sub(1) {
        let (lo, w) = crate::interp::interval_weights(s, i);
        for (j, wj) in w.iter().enumerate() {
            acc.iter_mut().zip(sq[lo + j].values()).for_each(|(a, v)| *a += wj * v);
        }
        out.push(acc.iter().fold(0.0f64, |m, v| m.max(root(*v))));
    }
    out
}

/// `‖sup_s |F|‖_{L²(S_0)}` on every prefix.
pub(crate) fn prefix_lx2_ltinf(f: &HistoryField) -> Vec<f64> {
    let w = f.initial_area_weights();
    let mut sup = vec![0.0f64; w.len()];
    pointwise(f)
        .iter()
        .map(|v| {
            sup.iter_mut().zip(v).for_each(|(m, x)| *m = m.max(*x));
            lx(&sup, &w, 2.0)
        })
        .collect()
}

/// The mixed space-time norms on `[0, s_end] × S_0`, measured with the
/// initial area element. Suprema over `s` and `ω` are maxima over samples
/// and nodes.
pub fn mixed_norm(f: &HistoryField, kind: MixedKind, p: Option<f64>) -> Result<f64> {
    let p = match (kind.takes_p(), p) {
        (true, Some(p)) if (2.0..f64::INFINITY).contains(&p) => p,
        (true, Some(p)) => return invalid(format!("{} needs p in [2, ∞), got {p}", kind.name())),
        (true, None) => return invalid(format!("{} needs an exponent p", kind.name())),
        (false, Some(_)) => return invalid(format!("{} takes no exponent", kind.name())),
        (false, None) => 2.0,
    };
    Ok(last(&match kind {
        MixedKind::LxInfLt2 => prefix_lxinf_lt2(f),
        MixedKind::Lx2LtInf => prefix_lx2_ltinf(f),
        MixedKind::LtInfLx2 | MixedKind::LtInfLxp => prefix_lt_lx(f, f64::INFINITY, p),
        MixedKind::Lt2Lxp => prefix_lt_lx(f, 2.0, p),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptKind {
    /// Sup in `s` of each Littlewood–Paley piece.
    B,
    /// `L²` in `s` of each piece.
    P,
}

/// Per-leaf `(‖P_{<0}F‖, ‖P_kF‖)` padded to a common number of levels.
fn leaf_lp_norms(f: &HistoryField) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = f
        .fields()
        .par_iter()
        .zip(f.metrics().par_iter())
        .map(|(x, g)| {
            let (low, bands) = lp_norms(x, g)?;
            Ok(std::iter::once(low).chain(bands).collect())
        })
        .collect::<Result<_>>()?;
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    Ok(rows.into_iter().map(|mut r| {
        r.resize(width, 0.0);
        r
    }).collect())
}

/// `𝓑^θ` or `𝓟^θ` on every prefix.
pub(crate) fn prefix_script(f: &HistoryField, which: ScriptKind, theta: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&theta) {
        return invalid(format!("θ must lie in [0, 1], got {theta}"));
    }
    let rows = leaf_lp_norms(f)?;
    let mut out = vec![0.0; f.len()];
    for j in 0..rows[0].len() {
        // Column 0 is the low block; band k sits in column k + 1.
        let weight = if j == 0 { 1.0 } else { 2f64.powf(theta * (j - 1) as f64) };
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let series = match which {
            ScriptKind::B => {
                let mut m = 0.0f64;
                col.iter().map(|v| {
                    m = m.max(*v);
                    m
                }).collect()
            }
            ScriptKind::P => prefix_l2_in_s(f.s_grid(), &col.iter().map(|v| v * v).collect::<Vec<_>>()),
        };
        out.iter_mut().zip(series).for_each(|(o, v)| *o += weight * v);
    }
    Ok(out)
}

/// `𝓑^θ = Σ_k 2^{kθ} sup_s ‖P_kF‖ + sup_s ‖P_{<0}F‖`; `𝓟^θ` with `L²(H)` in place of `sup_s`.
pub fn script_norm(f: &HistoryField, which: ScriptKind, theta: f64) -> Result<f64> {
    Ok(last(&prefix_script(f, which, theta)?))
}
