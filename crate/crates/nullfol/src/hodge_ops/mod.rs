//! Hodge operators `D1, D2, *D1, *D2`, their inverses on their ranges and the
//! exact identities relating them to the Laplacian.
//!
//! Inverses are computed by GMRES on round-harmonic coefficients of degree
//! `≤ band_limit`, preconditioned by the round-sphere diagonal. The discrete
//! operator is not symmetric in coefficient space, so conjugate gradients do
//! not apply.

mod krylov;

use crate::error::{invalid, Result};
use crate::sphere_core::calculus::{
    covariant_derivative, curl, div, dual, grad, hat_otimes_grad, integral, l2_inner, l2_norm, laplacian, norm_sq,
    round_representative, traceless_part,
};
use crate::sphere_core::grid::lm_index;
use crate::sphere_core::spectral::{degree_eigenvalue, round_analyze, round_synthesize};
use crate::sphere_core::{LeafField, MetricField, Rank};

pub const SOLVER_RTOL: f64 = 1e-10;
pub const SOLVER_MAX_ITER: usize = 500;
const RESTART: usize = 80;
/// Relative cutoff below which a conformal Killing candidate is dropped.
pub const KERNEL_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HodgeKind {
    D1,
    D2,
    D1Star,
    D2Star,
}

/// A Hodge operand: a single tensor field or a pair of scalars `(ρ, σ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum HodgeField {
    Single(LeafField),
    Pair(LeafField, LeafField),
}

impl HodgeField {
    pub fn single(&self) -> Option<&LeafField> {
        match self {
            HodgeField::Single(f) => Some(f),
            HodgeField::Pair(..) => None,
        }
    }

    pub fn pair(&self) -> Option<(&LeafField, &LeafField)> {
        match self {
            HodgeField::Pair(a, b) => Some((a, b)),
            HodgeField::Single(_) => None,
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            HodgeField::Single(f) => f.max_abs(),
            HodgeField::Pair(a, b) => a.max_abs().max(b.max_abs()),
        }
    }

    pub fn sub(&self, other: &HodgeField) -> HodgeField {
        match (self, other) {
            (HodgeField::Single(a), HodgeField::Single(b)) => HodgeField::Single(a.sub(b)),
            (HodgeField::Pair(a, b), HodgeField::Pair(c, d)) => HodgeField::Pair(a.sub(c), b.sub(d)),
            _ => panic!("mismatched Hodge operands"),
        }
    }

    /// `L²` norm, pairs with the unweighted sum of squares.
    pub fn l2(&self, g: &MetricField) -> f64 {
        match self {
            HodgeField::Single(f) => l2_norm(f, g),
            HodgeField::Pair(a, b) => (l2_norm(a, g).powi(2) + l2_norm(b, g).powi(2)).sqrt(),
        }
    }

    pub fn inner(&self, other: &HodgeField, g: &MetricField) -> f64 {
        match (self, other) {
            (HodgeField::Single(a), HodgeField::Single(b)) => l2_inner(a, b, g),
            (HodgeField::Pair(a, b), HodgeField::Pair(c, d)) => l2_inner(a, c, g) + l2_inner(b, d, g),
            _ => panic!("mismatched Hodge operands"),
        }
    }
}

fn want(f: &LeafField, rank: Rank, what: &str) -> Result<()> {
    f.expect_rank(rank, what)
}

/// `D1 F = (div F, curl F)`.
pub fn d1(f: &LeafField, g: &MetricField) -> Result<(LeafField, LeafField)> {
    want(f, Rank::OneForm, "D1")?;
    Ok((div(f, g), curl(f, g)))
}

/// `D2 U = div U`.
pub fn d2(u: &LeafField, g: &MetricField) -> Result<LeafField> {
    want(u, Rank::SymTraceless2, "D2")?;
    Ok(div(u, g))
}

/// `*D1(ρ, σ) = −∇ρ + ⋆∇σ`.
pub fn d1_star(rho: &LeafField, sigma: &LeafField, g: &MetricField) -> Result<LeafField> {
    want(rho, Rank::Scalar, "*D1")?;
    want(sigma, Rank::Scalar, "*D1")?;
    Ok(dual(&grad(sigma, g), g).sub(&grad(rho, g)))
}

/// `*D2 F = −½ ∇⊗̂F`.
pub fn d2_star(f: &LeafField, g: &MetricField) -> Result<LeafField> {
    want(f, Rank::OneForm, "*D2")?;
    Ok(hat_otimes_grad(f, g).scale(-0.5))
}

pub fn apply(kind: HodgeKind, f: &HodgeField, g: &MetricField) -> Result<HodgeField> {
    match (kind, f) {
        (HodgeKind::D1, HodgeField::Single(x)) => d1(x, g).map(|(a, b)| HodgeField::Pair(a, b)),
        (HodgeKind::D2, HodgeField::Single(x)) => d2(x, g).map(HodgeField::Single),
        (HodgeKind::D1Star, HodgeField::Pair(r, s)) => d1_star(r, s, g).map(HodgeField::Single),
        (HodgeKind::D2Star, HodgeField::Single(x)) => d2_star(x, g).map(HodgeField::Single),
        (k, _) => invalid(format!("{k:?} applied to the wrong operand shape")),
    }
}

/// Coefficient layout of an operand: `parts` blocks of degrees `lmin..=band`.
#[derive(Debug, Clone, Copy)]
struct Layout {
    shape: Shape,
    lmin: usize,
    band: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Scalar,
    OneForm,
    Stt,
    Pair,
}

impl Layout {
    fn block(&self) -> usize {
        (self.band + 1) * (self.band + 1) - self.lmin * self.lmin
    }

    fn parts_of(&self, g: &MetricField, f: &HodgeField) -> Vec<Vec<f64>> {
        let grid = g.grid();
        match (self.shape, f) {
            (Shape::Pair, HodgeField::Pair(a, b)) => vec![grid.analyze(a.values()), grid.analyze(b.values())],
            (Shape::Stt, HodgeField::Single(x)) => round_analyze(grid, &round_representative(x, g)),
            (_, HodgeField::Single(x)) => round_analyze(grid, x),
            _ => panic!("layout/operand mismatch"),
        }
    }

    fn pack(&self, g: &MetricField, f: &HodgeField) -> Vec<f64> {
        let parts = self.parts_of(g, f);
        let lo = self.lmin * self.lmin;
        let hi = (self.band + 1) * (self.band + 1);
        parts.iter().flat_map(|p| p[lo..hi].iter().copied()).collect()
    }

    fn unpack(&self, g: &MetricField, x: &[f64]) -> HodgeField {
        let grid = g.grid();
        let nc = grid.n_coeffs();
        let lo = self.lmin * self.lmin;
        let blk = self.block();
        let nparts = if self.shape == Shape::Scalar { 1 } else { 2 };
        let parts: Vec<Vec<f64>> = (0..nparts)
            .map(|i| {
                let mut p = vec![0.0; nc];
                p[lo..lo + blk].copy_from_slice(&x[i * blk..(i + 1) * blk]);
                p
            })
            .collect();
        match self.shape {
            Shape::Scalar => HodgeField::Single(round_synthesize(grid, Rank::Scalar, &parts)),
            Shape::OneForm => HodgeField::Single(round_synthesize(grid, Rank::OneForm, &parts)),
            Shape::Stt => HodgeField::Single(traceless_part(&round_synthesize(grid, Rank::SymTraceless2, &parts), g)),
            Shape::Pair => HodgeField::Pair(
                LeafField::scalar(grid.synthesize(&parts[0])),
                LeafField::scalar(grid.synthesize(&parts[1])),
            ),
        }
    }

    /// Degree of each packed coefficient.
    fn degrees(&self) -> Vec<usize> {
        let mut one = Vec::with_capacity(self.block());
        for l in self.lmin..=self.band {
            one.extend(std::iter::repeat_n(l, 2 * l + 1));
        }
        let nparts = if self.shape == Shape::Scalar { 1 } else { 2 };
        one.iter().cycle().take(nparts * one.len()).copied().collect()
    }
}

/// Round-sphere magnitude of an operator on a degree-`l` mode, radius `r`,
/// in the harmonic coefficients used by [`Layout`].
fn round_symbol(kind: Option<HodgeKind>, l: usize, r: f64) -> f64 {
    let lam = degree_eigenvalue(l);
    match kind {
        None | Some(HodgeKind::D1) => lam / (r * r),
        Some(HodgeKind::D2) => 0.5 * (lam - 2.0) / (r * r),
        Some(HodgeKind::D1Star) | Some(HodgeKind::D2Star) => 1.0,
    }
}

struct System {
    domain: Layout,
    range: Layout,
    kind: Option<HodgeKind>,
}

impl System {
    fn new(kind: Option<HodgeKind>, band: usize) -> Self {
        let lay = |shape, lmin| Layout { shape, lmin, band };
        let (domain, range) = match kind {
            None => (lay(Shape::Scalar, 1), lay(Shape::Scalar, 1)),
            Some(HodgeKind::D1) => (lay(Shape::OneForm, 1), lay(Shape::Pair, 1)),
            Some(HodgeKind::D1Star) => (lay(Shape::Pair, 1), lay(Shape::OneForm, 1)),
            Some(HodgeKind::D2) => (lay(Shape::Stt, 2), lay(Shape::OneForm, 2)),
            Some(HodgeKind::D2Star) => (lay(Shape::OneForm, 2), lay(Shape::Stt, 2)),
        };
        Self { domain, range, kind }
    }

    fn forward(&self, x: &HodgeField, g: &MetricField) -> HodgeField {
        match self.kind {
            None => match x {
                HodgeField::Single(u) => HodgeField::Single(laplacian(u, g).scale(-1.0)),
                _ => unreachable!(),
            },
            Some(k) => apply(k, x, g).expect("layout shapes match the operator"),
        }
    }

    fn solve(&self, rhs: &HodgeField, g: &MetricField) -> Result<HodgeField> {
        let b = self.range.pack(g, rhs);
        let r = if g.round_radius() > 0.0 { g.round_radius() } else { g.area_radius() };
        let pre: Vec<f64> = self.domain.degrees().iter().map(|l| 1.0 / round_symbol(self.kind, *l, r)).collect();
        let op = |x: &[f64]| {
            let f = self.domain.unpack(g, x);
            self.range.pack(g, &self.forward(&f, g))
        };
        let sol = krylov::gmres(op, &b, &pre, SOLVER_RTOL, SOLVER_MAX_ITER, RESTART)?;
        Ok(self.domain.unpack(g, &sol.x))
    }
}

fn remove_mean(f: &LeafField, g: &MetricField) -> LeafField {
    let m = integral(f.values(), g) / g.area();
    f.map(|v| v - m)
}

/// `γ`-orthonormal basis of conformal Killing fields of `g`.
pub fn conformal_killing_basis(g: &MetricField) -> Result<Vec<LeafField>> {
    if let Some(b) = g.conformal_killing_slot().get() {
        return Ok(b.clone());
    }
    let grid = g.grid().clone();
    let mut candidates = Vec::with_capacity(6);
    for m in -1..=1i64 {
        let mut c = vec![0.0; grid.n_coeffs()];
        c[lm_index(1, m)] = 1.0;
        let v = LeafField::one_form(grid.synthesize_gradient(&c));
        candidates.push(v.clone());
        candidates.push(LeafField::one_form(
            (0..grid.n_nodes()).flat_map(|k| [v.at(k)[1], -v.at(k)[0]]).collect(),
        ));
    }
    if g.exact_round().is_none() {
        let sys = System::new(Some(HodgeKind::D2Star), grid.band_limit());
        let mut fixed = Vec::with_capacity(6);
        for v0 in candidates {
            let z = d2_star(&v0, g)?;
            let delta = sys.solve(&HodgeField::Single(z.scale(-1.0)), g)?;
            fixed.push(v0.add(delta.single().expect("one-form")));
        }
        candidates = fixed;
    }
    let mut basis: Vec<LeafField> = Vec::with_capacity(6);
    let scale = candidates.iter().map(|c| l2_norm(c, g)).fold(0.0, f64::max);
    for mut v in candidates {
        for _ in 0..2 {
            for b in &basis {
                v = v.axpy(-l2_inner(&v, b, g), b);
            }
        }
        let n = l2_norm(&v, g);
        if n > KERNEL_CUTOFF * scale {
            basis.push(v.scale(1.0 / n));
        }
    }
    Ok(g.conformal_killing_slot().get_or_init(|| basis).clone())
}

/// Removes the conformal Killing component of a one-form.
pub fn project_off_conformal_killing(f: &LeafField, g: &MetricField) -> Result<LeafField> {
    let mut out = f.clone();
    for v in conformal_killing_basis(g)? {
        out = out.axpy(-l2_inner(&out, &v, g), &v);
    }
    Ok(out)
}

/// Projects an operand onto the range of `kind`.
pub fn project_range(kind: HodgeKind, f: &HodgeField, g: &MetricField) -> Result<HodgeField> {
    match (kind, f) {
        (HodgeKind::D1, HodgeField::Pair(a, b)) => Ok(HodgeField::Pair(remove_mean(a, g), remove_mean(b, g))),
        (HodgeKind::D2, HodgeField::Single(x)) => {
            want(x, Rank::OneForm, "range of D2")?;
            Ok(HodgeField::Single(project_off_conformal_killing(x, g)?))
        }
        (HodgeKind::D1Star, HodgeField::Single(x)) => {
            want(x, Rank::OneForm, "range of *D1")?;
            Ok(f.clone())
        }
        (HodgeKind::D2Star, HodgeField::Single(x)) => {
            want(x, Rank::SymTraceless2, "range of *D2")?;
            Ok(f.clone())
        }
        (k, _) => invalid(format!("{k:?}^-1 applied to the wrong operand shape")),
    }
}

/// `U` with `apply(kind, U)` equal to the range projection of `F` and `U`
/// orthogonal to the kernel of `kind`.
pub fn invert(kind: HodgeKind, f: &HodgeField, g: &MetricField) -> Result<HodgeField> {
    let rhs = project_range(kind, f, g)?;
    let sys = System::new(Some(kind), g.grid().band_limit());
    let u = sys.solve(&rhs, g)?;
    match (kind, u) {
        (HodgeKind::D1Star, HodgeField::Pair(a, b)) => Ok(HodgeField::Pair(remove_mean(&a, g), remove_mean(&b, g))),
        (HodgeKind::D2Star, HodgeField::Single(x)) => Ok(HodgeField::Single(project_off_conformal_killing(&x, g)?)),
        (_, u) => Ok(u),
    }
}

/// Mean-zero `u` with `−Δu = f − mean(f)`.
pub fn laplace_inverse(f: &LeafField, g: &MetricField) -> Result<LeafField> {
    want(f, Rank::Scalar, "laplace_inverse")?;
    let rhs = remove_mean(f, g);
    let sys = System::new(None, g.grid().band_limit());
    let u = sys.solve(&HodgeField::Single(rhs), g)?;
    Ok(remove_mean(u.single().expect("scalar"), g))
}

/// Exact identities audited as relative residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Identity {
    Dcal1,
    Dcal2,
    HodgeI,
    HodgeII,
    HodgeIII,
    HodgeIV,
    BochnerScalar,
}

impl Identity {
    pub const ALL: [Identity; 7] = [
        Identity::Dcal1,
        Identity::Dcal2,
        Identity::HodgeI,
        Identity::HodgeII,
        Identity::HodgeIII,
        Identity::HodgeIV,
        Identity::BochnerScalar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::Dcal1 => "dcal_1",
            Identity::Dcal2 => "dcal_2",
            Identity::HodgeI => "hodge_i",
            Identity::HodgeII => "hodge_ii",
            Identity::HodgeIII => "hodge_iii",
            Identity::HodgeIV => "hodge_iv",
            Identity::BochnerScalar => "bochner_scalar",
        }
    }
}

/// Inputs for [`identity_residual`]; each identity reads what it needs.
#[derive(Debug, Clone)]
pub struct IdentityInputs {
    pub scalar: LeafField,
    pub one_form: LeafField,
    pub stt: LeafField,
    pub pair: (LeafField, LeafField),
}

/// `γ^{ab}∇_a∇_b T`.
pub fn rough_laplacian(t: &LeafField, g: &MetricField) -> LeafField {
    let dd = covariant_derivative(&covariant_derivative(t, g), g);
    let order = t.rank().order();
    let nc = 1usize << order;
    let n = g.n_nodes();
    let mut out = vec![0.0; n * nc];
    for k in 0..n {
        let inv = g.inverse_at(k);
        let d = dd.at(k);
        for i in 0..nc {
            let mut v = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    v += inv[2 * a + b] * d[(2 * a + b) * nc + i];
                }
            }
            out[k * nc + i] = v;
        }
    }
    LeafField::new(t.rank(), out)
}

fn h2_norm(t: &LeafField, g: &MetricField) -> f64 {
    let d = covariant_derivative(t, g);
    let dd = covariant_derivative(&d, g);
    (l2_norm(t, g).powi(2) + l2_norm(&d, g).powi(2) + l2_norm(&dd, g).powi(2)).sqrt()
}

fn int_k_sq(t: &LeafField, k: &LeafField, g: &MetricField) -> f64 {
    integral(norm_sq(t, g).mul_scalar(k).values(), g)
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Relative residual of the named identity.
pub fn identity_residual(which: Identity, inputs: &IdentityInputs, g: &MetricField) -> Result<f64> {
    let k = LeafField::scalar(g.gauss_curvature_values().to_vec());
    let (rho, sigma) = (&inputs.pair.0, &inputs.pair.1);
    match which {
        Identity::Dcal1 => {
            let f = &inputs.one_form;
            let (a, b) = d1(f, g)?;
            let lhs = d1_star(&a, &b, g)?;
            let rhs = rough_laplacian(f, g).scale(-1.0).add(&f.mul_scalar(&k));
            let r1 = ratio(l2_norm(&lhs.sub(&rhs), g), h2_norm(f, g));
            let w = d1_star(rho, sigma, g)?;
            let (x, y) = d1(&w, g)?;
            let ex = laplacian(rho, g).scale(-1.0);
            let ey = laplacian(sigma, g).scale(-1.0);
            let num = (l2_norm(&x.sub(&ex), g).powi(2) + l2_norm(&y.sub(&ey), g).powi(2)).sqrt();
            let den = (h2_norm(rho, g).powi(2) + h2_norm(sigma, g).powi(2)).sqrt();
            Ok(r1.max(ratio(num, den)))
        }
        Identity::Dcal2 => {
            let u = &inputs.stt;
            let lhs = d2_star(&d2(u, g)?, g)?;
            let rhs = rough_laplacian(u, g).scale(-0.5).add(&u.mul_scalar(&k));
            let r1 = ratio(l2_norm(&lhs.sub(&rhs), g), h2_norm(u, g));
            let f = &inputs.one_form;
            let lhs = d2(&d2_star(f, g)?, g)?;
            let rhs = rough_laplacian(f, g).add(&f.mul_scalar(&k)).scale(-0.5);
            Ok(r1.max(ratio(l2_norm(&lhs.sub(&rhs), g), h2_norm(f, g))))
        }
        Identity::HodgeI => {
            let f = &inputs.one_form;
            let lhs = l2_norm(&covariant_derivative(f, g), g).powi(2) + int_k_sq(f, &k, g);
            let (a, b) = d1(f, g)?;
            let rhs = l2_norm(&a, g).powi(2) + l2_norm(&b, g).powi(2);
            Ok(ratio((lhs - rhs).abs(), rhs))
        }
        Identity::HodgeII => {
            let u = &inputs.stt;
            let lhs = l2_norm(&covariant_derivative(u, g), g).powi(2) + 2.0 * int_k_sq(u, &k, g);
            let rhs = 2.0 * l2_norm(&d2(u, g)?, g).powi(2);
            Ok(ratio((lhs - rhs).abs(), rhs))
        }
        Identity::HodgeIII => {
            let lhs = l2_norm(&grad(rho, g), g).powi(2) + l2_norm(&grad(sigma, g), g).powi(2);
            let rhs = l2_norm(&d1_star(rho, sigma, g)?, g).powi(2);
            Ok(ratio((lhs - rhs).abs(), rhs))
        }
        Identity::HodgeIV => {
            let f = &inputs.one_form;
            let grad_sq = l2_norm(&covariant_derivative(f, g), g).powi(2);
            let lhs = grad_sq - int_k_sq(f, &k, g);
            let rhs = 2.0 * l2_norm(&d2_star(f, g)?, g).powi(2);
            Ok(ratio((lhs - rhs).abs(), rhs.max(grad_sq)))
        }
        Identity::BochnerScalar => {
            let f = &inputs.scalar;
            let df = grad(f, g);
            let hess = covariant_derivative(&df, g);
            let lap = laplacian(f, g);
            let lhs = l2_norm(&hess, g).powi(2);
            let rhs = l2_norm(&lap, g).powi(2) - int_k_sq(&df, &k, g);
            Ok(ratio((lhs - rhs).abs(), l2_norm(&lap, g).powi(2)))
        }
    }
}
