use crate::error::{invalid, Result};
use crate::sphere_core::calculus::{
    covariant_derivative, div, dot, grad, l2_norm, laplacian, slot_contract, tensor_dot_form, tensor_mul, times_metric,
};
use crate::sphere_core::{LeafField, MetricField, Rank};

use super::curvature::CurvatureInput;
use super::diagnostics::{fd_field, need_samples, s_grid};
use super::state::FoliationState;

/// Which commutator `[∇_L, ·]` to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Commutation {
    /// `∇_L∇f − ∇(df/ds) = −χ·∇f`.
    ScalarGrad,
    /// `d/ds div F − div ∇_L F = −χ·∇F + (β − ½trχ ζ + χ̂·ζ)·F`.
    Div,
    /// `d/ds Δf − Δ(df/ds) = −2χ·∇²f + (2β − ∇trχ − trχ ζ + 2χ̂·ζ)·∇f`.
    Laplacian,
    /// `∇_L∇_b F_a − ∇_b∇_L F_a = −χ_b^c ∇_c F_a + γ_ab E·F − F_b E_a`
    /// with `E = β − ½trχ ζ + χ̂·ζ`, the coefficient of the divergence case.
    General,
}

impl Commutation {
    pub fn name(self) -> &'static str {
        match self {
            Commutation::ScalarGrad => "scalar_grad",
            Commutation::Div => "div",
            Commutation::Laplacian => "laplacian",
            Commutation::General => "general",
        }
    }

    fn input_rank(self) -> Rank {
        match self {
            Commutation::ScalarGrad | Commutation::Laplacian => Rank::Scalar,
            Commutation::Div | Commutation::General => Rank::OneForm,
        }
    }
}

/// Three-point stencil keeps the check second order in the s-spacing.
const STENCIL: usize = 3;

/// `∇_L` of a covariant tensor in transported coordinates: `∂_s` minus `χ` on every slot.
fn nabla_l(ds: &LeafField, t: &LeafField, chi: &LeafField, g: &MetricField) -> LeafField {
    ds.sub(&slot_contract(chi, t, g))
}

/// `E = β − ½trχ ζ + χ̂·ζ`, which by Codazzi equals `∇trχ − div χ`.
fn coeff(st: &FoliationState, beta: &LeafField) -> LeafField {
    let g = &st.gamma;
    beta.axpy(-0.5, &st.zeta.mul_scalar(&st.trchi)).add(&tensor_dot_form(&st.chih, &st.zeta, g))
}

/// Outer product `A_b B_a` stored with `b` first.
fn outer(a: &LeafField, b: &LeafField) -> LeafField {
    let n = a.n_nodes();
    let mut out = Vec::with_capacity(4 * n);
    for k in 0..n {
        let (x, y) = (a.at(k), b.at(k));
        out.extend_from_slice(&[x[0] * y[0], x[0] * y[1], x[1] * y[0], x[1] * y[1]]);
    }
    LeafField::new(Rank::Tensor(2), out)
}

/// Largest `L²(S_s)` residual of the chosen commutation formula over the
/// interior leaves, with s-derivatives from centered three-point differences.
///
/// `fields` holds one field per leaf of `history`.
pub fn commutation_check(
    history: &[FoliationState],
    curv: &CurvatureInput,
    fields: &[LeafField],
    which: Commutation,
) -> Result<f64> {
    need_samples(history, 3)?;
    if fields.len() != history.len() {
        return invalid("one field per leaf is required");
    }
    for f in fields {
        f.expect_rank(which.input_rank(), which.name())?;
    }
    let s = s_grid(history);
    let derived: Vec<LeafField> = history
        .iter()
        .zip(fields)
        .map(|(st, f)| {
            let g = &st.gamma;
            match which {
                Commutation::ScalarGrad => grad(f, g),
                Commutation::Div => div(f, g),
                Commutation::Laplacian => laplacian(f, g),
                Commutation::General => covariant_derivative(f, g),
            }
        })
        .collect();

    let mut worst = 0.0f64;
    for i in 1..history.len() - 1 {
        let st = &history[i];
        let g = &st.gamma;
        let f = &fields[i];
        let chi = st.chi();
        let beta = curv.sample(st.s, g).beta;
        let df = fd_field(&s, fields, i, STENCIL);
        let dd = fd_field(&s, &derived, i, STENCIL);
        let residual = match which {
            Commutation::ScalarGrad => {
                let lhs = nabla_l(&dd, &derived[i], &chi, g).sub(&grad(&df, g));
                lhs.add(&tensor_dot_form(&chi, &derived[i], g))
            }
            Commutation::Div => {
                let lf = nabla_l(&df, f, &chi, g);
                let lhs = dd.sub(&div(&lf, g));
                let rhs = dot(&chi, &covariant_derivative(f, g), g).scale(-1.0).add(&dot(&coeff(st, &beta), f, g));
                lhs.sub(&rhs)
            }
            Commutation::Laplacian => {
                let lhs = dd.sub(&laplacian(&df, g));
                let grad_f = grad(f, g);
                let c = coeff(st, &beta).scale(2.0).sub(&grad(&st.trchi, g));
                let hess = covariant_derivative(&grad_f, g);
                let rhs = dot(&chi, &hess, g).scale(-2.0).add(&dot(&c, &grad_f, g));
                lhs.sub(&rhs)
            }
            Commutation::General => {
                let t = &derived[i];
                let lf = nabla_l(&df, f, &chi, g);
                let lhs = nabla_l(&dd, t, &chi, g).sub(&covariant_derivative(&lf, g));
                let e = coeff(st, &beta);
                let rhs = tensor_mul(&chi, t, g)
                    .scale(-1.0)
                    .add(&times_metric(&dot(&e, f, g), g))
                    .sub(&outer(f, &e));
                lhs.sub(&rhs)
            }
        };
        worst = worst.max(l2_norm(&residual, g));
    }
    Ok(worst)
}
