use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::heat_lp::{besov_norm, lambda_pow};
use crate::hodge_ops::{invert, HodgeField, HodgeKind};
use crate::sphere_core::calculus::{covariant_derivative, dot, norm_sq};
use crate::sphere_core::harmonics::random_scalar;
use crate::sphere_core::{make_grid, LeafField, MetricField, Rank};

use super::history::HistoryField;
use super::norms::{last, prefix_lt_lx, prefix_lxinf_lt2};

/// The calculus inequalities audited as `LHS / RHS` ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inequality {
    /// `‖f‖_{L²} ≲ ‖∇f‖_{L¹} + ‖f‖_{L¹}`.
    Isoperimetric,
    /// `‖f‖_{L^∞} ≲ ‖∇²f‖_{L¹} + ‖f‖_{L¹}`.
    SharpSob,
    /// `‖F‖_{L^p} ≲ ‖∇F‖_{L²}^{1−2/p}‖F‖_{L²}^{2/p} + ‖F‖_{L²}`.
    Gn { p: f64 },
    /// `‖F‖_{L^∞} ≲ ‖∇²F‖_{L²}^{1/2}‖F‖_{L²}^{1/2} + ‖F‖_{L²}`.
    LinftyL2,
    /// `‖F‖_{L_t^∞L_x^4} ≲ t^{−1/2}‖F‖_{L_t^2L_x^4} + ‖F‖_{L_x^∞L_t^2}^{1/2}‖∇_LF‖_{L_t^2L_x^2}^{1/2}`.
    Lx4,
    /// `‖F‖_{L_t^∞L_x^4} ≲ t^{−1/2}(‖F‖ + ‖∇F‖) + t^{1/2}‖∇_LF‖`, right side in `L_t^2L_x^2`.
    LtinftyLx4,
    /// `‖F‖_{L_t^6L_x^6} ≲ t^{−1/3}(‖F‖ + ‖∇F‖) + t^{2/3}‖∇_LF‖`, right side in `L_t^2L_x^2`.
    SobL6,
    /// `‖F‖_{L_t^∞L_x^∞} ≲ t^{−1/2}(‖F‖ + ‖∇²F‖) + t^{1/2}(‖∇_LF‖_{L_x^∞L_t^2} + ‖∇∇_LF‖)`.
    LxLtinfty,
    /// `‖f‖_{L^∞} ≲ ‖f‖_{B¹_{2,1}}`.
    BesovSob,
    /// `‖f‖_{B¹_{2,1}} ≲ ‖f‖_{L²} + ‖∇f‖_{B⁰_{2,1}}`.
    EstimB1,
    /// `‖Λ^a(F·G)‖ ≲ ‖ΛF‖‖Λ^aG‖ + ‖Λ^aF‖‖ΛG‖`, all in `L²`.
    Prodga { a: f64 },
    /// `‖F‖_{L^p} ≲ ‖Λ^sF‖_{L²}` for `2 < p < ∞`, `s > 1 − 2/p`.
    NonsharpSob { p: f64, s: f64 },
    /// `‖D₂⁻¹F‖_{B⁰_{2,1}} ≲ ‖F‖_{L^p}` for `1 < p ≤ 2`.
    Lt2LxpDinv { p: f64 },
}

impl Inequality {
    pub fn name(&self) -> &'static str {
        match self {
            Inequality::Isoperimetric => "isoperimetric",
            Inequality::SharpSob => "sharp_sob",
            Inequality::Gn { .. } => "GN",
            Inequality::LinftyL2 => "LinftyL2",
            Inequality::Lx4 => "Lx4",
            Inequality::LtinftyLx4 => "LtinftyLx4",
            Inequality::SobL6 => "SobL6",
            Inequality::LxLtinfty => "LxLtinfty",
            Inequality::BesovSob => "besov_sob",
            Inequality::EstimB1 => "estimB1",
            Inequality::Prodga { .. } => "prodga",
            Inequality::NonsharpSob { .. } => "nonsharp_sob",
            Inequality::Lt2LxpDinv { .. } => "Lt2Lxp_Dinv",
        }
    }

    /// Every identifier with its default parameters (`p = 4`, `a = ½`, `s = ¾`, `p = 3/2`).
    pub fn all() -> [Inequality; 13] {
        [
            Inequality::Isoperimetric,
            Inequality::SharpSob,
            Inequality::Gn { p: 4.0 },
            Inequality::LinftyL2,
            Inequality::Lx4,
            Inequality::LtinftyLx4,
            Inequality::SobL6,
            Inequality::LxLtinfty,
            Inequality::BesovSob,
            Inequality::EstimB1,
            Inequality::Prodga { a: 0.5 },
            Inequality::NonsharpSob { p: 4.0, s: 0.75 },
            Inequality::Lt2LxpDinv { p: 1.5 },
        ]
    }

    pub fn from_name(name: &str) -> Result<Inequality> {
        match Inequality::all().into_iter().find(|i| i.name() == name) {
            Some(i) => Ok(i),
            None => invalid(format!("unknown inequality {name:?}")),
        }
    }

    fn is_history(&self) -> bool {
        matches!(self, Inequality::Lx4 | Inequality::LtinftyLx4 | Inequality::SobL6 | Inequality::LxLtinfty)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Inequality::Gn { p } => (2.0..f64::INFINITY).contains(&p),
            Inequality::Prodga { a } => (0.0..=1.0).contains(&a),
            Inequality::NonsharpSob { p, s } => p > 2.0 && p.is_finite() && s > 1.0 - 2.0 / p && s <= 2.0,
            Inequality::Lt2LxpDinv { p } => p > 1.0 && p <= 2.0,
            _ => true,
        };
        if !ok {
            return invalid(format!("parameters out of range for {self:?}"));
        }
        Ok(())
    }
}

/// Operands of an inequality audit.
#[derive(Debug, Clone, Copy)]
pub enum AuditInput<'a> {
    Leaf { field: &'a LeafField, metric: &'a MetricField },
    Pair { f: &'a LeafField, g: &'a LeafField, metric: &'a MetricField },
    History(&'a HistoryField),
}

/// `LHS / RHS`, with `0/0 = 0` and `x/0 = ∞` flagging a degenerate discretization.
fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// `‖F‖_{L^p(S, γ)}` with nodal maxima for `p = ∞`.
fn lp(f: &LeafField, g: &MetricField, p: f64) -> f64 {
    let abs: Vec<f64> = norm_sq(f, g).values().iter().map(|v| v.max(0.0).sqrt()).collect();
    if p.is_infinite() {
        return abs.iter().fold(0.0, |m, v| m.max(*v));
    }
    let sum: f64 = abs.iter().zip(g.area_weights()).map(|(v, w)| w * v.powf(p)).sum();
    sum.max(0.0).powf(1.0 / p)
}

fn need_scalar(f: &LeafField, which: &Inequality) -> Result<()> {
    f.expect_rank(Rank::Scalar, which.name())
}

fn leaf_ratio(which: &Inequality, f: &LeafField, g: &MetricField) -> Result<f64> {
    let l2 = |x: &LeafField| lp(x, g, 2.0);
    let grad = || covariant_derivative(f, g);
    let hess = || covariant_derivative(&covariant_derivative(f, g), g);
    Ok(match *which {
        Inequality::Isoperimetric => {
            need_scalar(f, which)?;
            ratio(l2(f), lp(&grad(), g, 1.0) + lp(f, g, 1.0))
        }
        Inequality::SharpSob => {
            need_scalar(f, which)?;
            ratio(lp(f, g, f64::INFINITY), lp(&hess(), g, 1.0) + lp(f, g, 1.0))
        }
        Inequality::Gn { p } => {
            let n = l2(f);
            ratio(lp(f, g, p), l2(&grad()).powf(1.0 - 2.0 / p) * n.powf(2.0 / p) + n)
        }
        Inequality::LinftyL2 => {
            let n = l2(f);
            ratio(lp(f, g, f64::INFINITY), (l2(&hess()) * n).sqrt() + n)
        }
        Inequality::BesovSob => {
            need_scalar(f, which)?;
            ratio(lp(f, g, f64::INFINITY), besov_norm(f, 1.0, g)?)
        }
        Inequality::EstimB1 => {
            need_scalar(f, which)?;
            ratio(besov_norm(f, 1.0, g)?, l2(f) + besov_norm(&grad(), 0.0, g)?)
        }
        Inequality::NonsharpSob { p, s } => ratio(lp(f, g, p), l2(&lambda_pow(f, s, g)?)),
        Inequality::Lt2LxpDinv { p } => {
            f.expect_rank(Rank::OneForm, which.name())?;
            let u = invert(HodgeKind::D2, &HodgeField::Single(f.clone()), g)?;
            let u = u.single().expect("D2 inverse is a single tensor");
            ratio(besov_norm(u, 0.0, g)?, lp(f, g, p))
        }
        _ => return invalid(format!("{} does not take a single leaf field", which.name())),
    })
}

fn pair_ratio(a: f64, f: &LeafField, h: &LeafField, g: &MetricField) -> Result<f64> {
    if f.rank().order() != h.rank().order() {
        return invalid("prodga needs two fields of one rank");
    }
    let l2 = |x: &LeafField| lp(x, g, 2.0);
    let lhs = l2(&lambda_pow(&dot(f, h, g), a, g)?);
    let rhs = l2(&lambda_pow(f, 1.0, g)?) * l2(&lambda_pow(h, a, g)?) + l2(&lambda_pow(f, a, g)?) * l2(&lambda_pow(h, 1.0, g)?);
    Ok(ratio(lhs, rhs))
}

fn history_ratio(which: &Inequality, f: &HistoryField) -> Result<f64> {
    let s = f.s_grid();
    let t = s[s.len() - 1] - s[0];
    if !(t > 0.0) {
        return invalid("history inequalities need a nondegenerate s-interval");
    }
    let lf = HistoryField::new(s.to_vec(), f.nabla_l()?, f.metrics().to_vec())?;
    let l2l2 = |x: &HistoryField| last(&prefix_lt_lx(x, 2.0, 2.0));
    let grad = || f.map(covariant_derivative);
    let hess = || f.map(|x, g| covariant_derivative(&covariant_derivative(x, g), g));
    let inf4 = last(&prefix_lt_lx(f, f64::INFINITY, 4.0));
    Ok(match which {
        Inequality::Lx4 => {
            let rhs = t.powf(-0.5) * last(&prefix_lt_lx(f, 2.0, 4.0)) + (last(&prefix_lxinf_lt2(f)) * l2l2(&lf)).sqrt();
            ratio(inf4, rhs)
        }
        Inequality::LtinftyLx4 => ratio(inf4, t.powf(-0.5) * (l2l2(f) + l2l2(&grad()?)) + t.sqrt() * l2l2(&lf)),
        Inequality::SobL6 => {
            let lhs = last(&prefix_lt_lx(f, 6.0, 6.0));
            ratio(lhs, t.powf(-1.0 / 3.0) * (l2l2(f) + l2l2(&grad()?)) + t.powf(2.0 / 3.0) * l2l2(&lf))
        }
        Inequality::LxLtinfty => {
            let lhs = last(&prefix_lt_lx(f, f64::INFINITY, f64::INFINITY));
            let d_lf = lf.map(covariant_derivative)?;
            let rhs = t.powf(-0.5) * (l2l2(f) + l2l2(&hess()?)) + t.sqrt() * (last(&prefix_lxinf_lt2(&lf)) + l2l2(&d_lf));
            ratio(lhs, rhs)
        }
        _ => unreachable!("leaf inequality routed to history"),
    })
}

/// `LHS / RHS` of the chosen inequality; never compared with a constant.
pub fn inequality_audit(which: Inequality, input: AuditInput<'_>) -> Result<f64> {
    which.validate()?;
    match (which, input) {
        (Inequality::Prodga { a }, AuditInput::Pair { f, g, metric }) => pair_ratio(a, f, g, metric),
        (w, AuditInput::History(h)) if w.is_history() => history_ratio(&w, h),
        (w, AuditInput::Leaf { field, metric }) if !w.is_history() && !matches!(w, Inequality::Prodga { .. }) => {
            leaf_ratio(&w, field, metric)
        }
        (w, _) => invalid(format!("{} was given the wrong kind of input", w.name())),
    }
}

/// Band limit of the corpus grid.
pub const CORPUS_BAND: usize = 12;
pub const CORPUS_SIZE: usize = 50;
/// s-samples of each corpus history on `[0, 1]`.
const CORPUS_SAMPLES: usize = 21;

/// Largest ratio over the deterministic corpus and where it occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConstant {
    pub which: &'static str,
    pub max_ratio: f64,
    pub argmax: usize,
    pub ratios: Vec<f64>,
}

/// Fifty band-limited scalars on the unit round sphere: member `j` has
/// uniform random coefficients on degrees `0..=1 + j mod 10`.
pub fn corpus_functions(seed: u64) -> Result<(Arc<MetricField>, Vec<LeafField>)> {
    let grid = make_grid(CORPUS_BAND)?;
    let metric = Arc::new(MetricField::round(grid.clone(), 1.0)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = (0..CORPUS_SIZE).map(|j| random_scalar(&grid, 1 + j % 10, 0, &mut rng)).collect();
    Ok((metric, fields))
}

/// Member `j` of the history corpus: `f_j cos(π k s) + f_{j+1} s` with
/// `k = 1 + j mod 3` on the frozen unit sphere.
fn corpus_history(metric: &Arc<MetricField>, fields: &[LeafField], j: usize) -> Result<HistoryField> {
    let s: Vec<f64> = (0..CORPUS_SAMPLES).map(|i| i as f64 / (CORPUS_SAMPLES - 1) as f64).collect();
    let k = (1 + j % 3) as f64;
    let (a, b) = (&fields[j], &fields[(j + 1) % fields.len()]);
    let samples = s.iter().map(|x| a.scale((std::f64::consts::PI * k * x).cos()).axpy(*x, b)).collect();
    HistoryField::frozen(s, samples, metric.clone())
}

/// Audits `which` over the corpus. Scalar-only inequalities see each
/// function, one-form ones its gradient, `prodga` consecutive pairs and
/// history inequalities [`corpus_history`].
pub fn corpus_constant(which: Inequality, seed: u64) -> Result<CorpusConstant> {
    let (metric, fields) = corpus_functions(seed)?;
    let g = metric.as_ref();
    let ratios = (0..fields.len())
        .map(|j| {
            let f = &fields[j];
            match which {
                Inequality::Prodga { .. } => {
                    inequality_audit(which, AuditInput::Pair { f, g: &fields[(j + 1) % fields.len()], metric: g })
                }
                Inequality::Lt2LxpDinv { .. } => {
                    let df = covariant_derivative(f, g);
                    inequality_audit(which, AuditInput::Leaf { field: &df, metric: g })
                }
                w if w.is_history() => inequality_audit(w, AuditInput::History(&corpus_history(&metric, &fields, j)?)),
                w => inequality_audit(w, AuditInput::Leaf { field: f, metric: g }),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let (argmax, max_ratio) = ratios
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
    Ok(CorpusConstant { which: which.name(), max_ratio, argmax, ratios })
}
