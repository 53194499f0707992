//! Covariant calculus on a leaf.
//!
//! Round derivatives go through the ambient embedding: a tangent tensor is
//! written in Cartesian components, each component is differentiated
//! spectrally, and the result is projected back onto the round frame.
//! Metric derivatives then subtract the connection difference `C^c_ab`.

use rayon::prelude::*;

use super::field::{LeafField, Rank};
use super::grid::SphereGrid;
use super::metric::MetricField;
use super::tensor::{apply_slot, dual_matrix, inner, mat_mul, trace, trace_free};
use crate::error::{invalid, Result};

/// First-order operators exposed through [`differential`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Differential {
    Grad,
    Div,
    Curl,
    Hessian,
    HatOtimes,
    Laplacian,
}

fn pow3(k: usize) -> usize {
    3usize.pow(k as u32)
}

/// `∇°T` for node-major round-frame components of order `order`.
/// The derivative index is slot 0 of the result.
pub fn round_derivative(grid: &SphereGrid, values: &[f64], order: usize) -> Vec<f64> {
    let n = grid.n_nodes();
    let nc = 1usize << order;
    let na = pow3(order);
    debug_assert_eq!(values.len(), n * nc);

    // Products Π e_{a_i}^{I_i} per node, indexed [a_idx * na + I].
    let weight = |k: usize| -> Vec<f64> {
        let e = grid.frame(k);
        let mut w = vec![1.0; nc * na];
        for a_idx in 0..nc {
            for big in 0..na {
                let mut p = 1.0;
                let mut rem = big;
                for slot in (0..order).rev() {
                    let ii = rem % 3;
                    rem /= 3;
                    let a = (a_idx >> (order - 1 - slot)) & 1;
                    p *= e[a][ii];
                }
                w[a_idx * na + big] = p;
            }
        }
        w
    };

    let ambient: Vec<Vec<f64>> = (0..na)
        .into_par_iter()
        .map(|big| {
            let mut comp = vec![0.0; n];
            for (k, c) in comp.iter_mut().enumerate() {
                let w = weight(k);
                let t = &values[k * nc..(k + 1) * nc];
                *c = (0..nc).map(|a| t[a] * w[a * na + big]).sum();
            }
            if comp.iter().all(|v| *v == 0.0) {
                return vec![0.0; 2 * n];
            }
            grid.synthesize_gradient(&grid.analyze(&comp))
        })
        .collect();

    let mut out = vec![0.0; 2 * nc * n];
    for k in 0..n {
        let w = weight(k);
        for c in 0..2 {
            for a_idx in 0..nc {
                let mut v = 0.0;
                for (big, grad) in ambient.iter().enumerate() {
                    v += w[a_idx * na + big] * grad[2 * k + c];
                }
                out[k * 2 * nc + c * nc + a_idx] = v;
            }
        }
    }
    out
}

/// `∇F` with the derivative index first.
pub fn covariant_derivative(f: &LeafField, g: &MetricField) -> LeafField {
    let order = f.rank().order();
    let nc = 1usize << order;
    let out_rank = Rank::of_order(order + 1);
    let n = g.n_nodes();
    if f.is_zero() {
        return LeafField::zeros(out_rank, n);
    }
    let mut d = round_derivative(g.grid(), f.values(), order);
    if g.exact_round().is_none() && order > 0 {
        let c = g.christoffel();
        for k in 0..n {
            let t = f.at(k);
            let ck = &c[8 * k..8 * k + 8];
            let dk = &mut d[k * 2 * nc..(k + 1) * 2 * nc];
            for cc in 0..2 {
                for a_idx in 0..nc {
                    let mut corr = 0.0;
                    for slot in 0..order {
                        let shift = order - 1 - slot;
                        let ai = (a_idx >> shift) & 1;
                        let base = a_idx & !(1 << shift);
                        for dd in 0..2 {
                            corr += ck[dd * 4 + cc * 2 + ai] * t[base | (dd << shift)];
                        }
                    }
                    dk[cc * nc + a_idx] -= corr;
                }
            }
        }
    }
    LeafField::new(out_rank, d)
}

fn check_nodes(f: &LeafField, g: &MetricField) -> Result<()> {
    if f.n_nodes() != g.n_nodes() || f.values().len() != g.n_nodes() * f.rank().n_comp() {
        return invalid(format!(
            "field with {} values does not live on a grid of {} nodes",
            f.values().len(),
            g.n_nodes()
        ));
    }
    Ok(())
}

/// Metric trace over the first two slots of an order-2 or order-3 tensor.
fn trace_leading(t: &LeafField, g: &MetricField) -> LeafField {
    let order = t.rank().order();
    let n = g.n_nodes();
    match order {
        2 => LeafField::scalar((0..n).map(|k| trace(g.inverse_at(k), t.at(k))).collect()),
        3 => {
            let mut out = vec![0.0; 2 * n];
            for k in 0..n {
                let inv = g.inverse_at(k);
                let tk = t.at(k);
                for b in 0..2 {
                    let mut v = 0.0;
                    for c in 0..2 {
                        for a in 0..2 {
                            v += inv[2 * c + a] * tk[c * 4 + a * 2 + b];
                        }
                    }
                    out[2 * k + b] = v;
                }
            }
            LeafField::one_form(out)
        }
        _ => unreachable!("trace of order {order}"),
    }
}

/// The operators `grad, div, curl, ∇², ∇⊗̂, Δ` of the metric `g`.
pub fn differential(kind: Differential, f: &LeafField, g: &MetricField) -> Result<LeafField> {
    check_nodes(f, g)?;
    let order = f.rank().order();
    let n = g.n_nodes();
    match kind {
        Differential::Grad => {
            f.expect_rank(Rank::Scalar, "grad")?;
            Ok(covariant_derivative(f, g))
        }
        Differential::Hessian => {
            f.expect_rank(Rank::Scalar, "hessian")?;
            Ok(covariant_derivative(&covariant_derivative(f, g), g))
        }
        Differential::Laplacian => {
            f.expect_rank(Rank::Scalar, "laplacian")?;
            let h = covariant_derivative(&covariant_derivative(f, g), g);
            Ok(trace_leading(&h, g))
        }
        Differential::Div => match order {
            1 | 2 => Ok(trace_leading(&covariant_derivative(f, g), g)),
            _ => invalid(format!("div needs a one-form or 2-tensor, got {:?}", f.rank())),
        },
        Differential::Curl => {
            f.expect_rank(Rank::OneForm, "curl")?;
            let d = covariant_derivative(f, g);
            Ok(LeafField::scalar(
                (0..n)
                    .map(|k| {
                        let dk = d.at(k);
                        (dk[1] - dk[2]) / g.sqrt_det()[k]
                    })
                    .collect(),
            ))
        }
        Differential::HatOtimes => {
            f.expect_rank(Rank::OneForm, "hat_otimes")?;
            let d = covariant_derivative(f, g);
            let mut out = vec![0.0; 4 * n];
            for k in 0..n {
                let dk = d.at(k);
                let sym = [2.0 * dk[0], dk[1] + dk[2], dk[1] + dk[2], 2.0 * dk[3]];
                let tf = trace_free(&g.at(k), g.inverse_at(k), &sym);
                out[4 * k..4 * k + 4].copy_from_slice(&tf);
            }
            Ok(LeafField::new(Rank::SymTraceless2, out))
        }
    }
}

pub fn grad(f: &LeafField, g: &MetricField) -> LeafField {
    covariant_derivative(f, g)
}

pub fn div(f: &LeafField, g: &MetricField) -> LeafField {
    trace_leading(&covariant_derivative(f, g), g)
}

pub fn curl(f: &LeafField, g: &MetricField) -> LeafField {
    differential(Differential::Curl, f, g).expect("curl of a one-form")
}

pub fn laplacian(f: &LeafField, g: &MetricField) -> LeafField {
    differential(Differential::Laplacian, f, g).expect("laplacian of a scalar")
}

pub fn hat_otimes_grad(f: &LeafField, g: &MetricField) -> LeafField {
    differential(Differential::HatOtimes, f, g).expect("hat_otimes of a one-form")
}

/// Hodge dual `⋆F_a = ∈_ab F^b` of a one-form, or `(⋆U)_ab = ∈_ac U^c_b`.
pub fn hodge_dual(f: &LeafField, g: &MetricField) -> Result<LeafField> {
    check_nodes(f, g)?;
    let order = f.rank().order();
    if order == 0 || order > 2 {
        return invalid(format!("hodge dual needs a one-form or 2-tensor, got {:?}", f.rank()));
    }
    let nc = 1usize << order;
    let mut out = vec![0.0; f.values().len()];
    for k in 0..g.n_nodes() {
        let j = dual_matrix(g.inverse_at(k), g.sqrt_det()[k]);
        apply_slot(&j, f.at(k), order, 0, &mut out[k * nc..(k + 1) * nc]);
    }
    Ok(LeafField::new(f.rank(), out))
}

pub(crate) fn dual(f: &LeafField, g: &MetricField) -> LeafField {
    hodge_dual(f, g).expect("dual of a one-form or 2-tensor")
}

/// `∫_S f dA_γ`.
pub fn integrate(f: &LeafField, g: &MetricField) -> Result<f64> {
    check_nodes(f, g)?;
    f.expect_rank(Rank::Scalar, "integrate")?;
    Ok(integral(f.values(), g))
}

pub(crate) fn integral(f: &[f64], g: &MetricField) -> f64 {
    let w = g.grid().quad_weights();
    let s = g.sqrt_det();
    f.iter().zip(w).zip(s).map(|((f, w), s)| f * w * s).sum()
}

/// Area-weighted mean.
pub fn mean(f: &LeafField, g: &MetricField) -> f64 {
    integral(f.values(), g) / g.area()
}

/// Pointwise `γ(A, B)` for tensors of equal order.
pub fn dot(a: &LeafField, b: &LeafField, g: &MetricField) -> LeafField {
    let order = a.rank().order();
    assert_eq!(order, b.rank().order());
    LeafField::scalar((0..g.n_nodes()).map(|k| inner(g.inverse_at(k), a.at(k), b.at(k), order)).collect())
}

/// Pointwise `|A|²_γ`.
pub fn norm_sq(a: &LeafField, g: &MetricField) -> LeafField {
    dot(a, a, g)
}

pub fn l2_inner(a: &LeafField, b: &LeafField, g: &MetricField) -> f64 {
    integral(dot(a, b, g).values(), g)
}

/// `‖A‖_{L²(S, γ)}`.
pub fn l2_norm(a: &LeafField, g: &MetricField) -> f64 {
    l2_inner(a, a, g).max(0.0).sqrt()
}

/// `‖A‖_{L^∞}` of the pointwise `γ`-norm.
pub fn sup_norm(a: &LeafField, g: &MetricField) -> f64 {
    norm_sq(a, g).values().iter().fold(0.0f64, |m, v| m.max(v.max(0.0).sqrt()))
}

/// `(A·F)_a = A_ab F^b` for a 2-tensor and a one-form.
pub fn tensor_dot_form(a: &LeafField, f: &LeafField, g: &MetricField) -> LeafField {
    let n = g.n_nodes();
    let mut out = vec![0.0; 2 * n];
    for k in 0..n {
        let inv = g.inverse_at(k);
        let (ak, fk) = (a.at(k), f.at(k));
        let up = [inv[0] * fk[0] + inv[1] * fk[1], inv[2] * fk[0] + inv[3] * fk[1]];
        out[2 * k] = ak[0] * up[0] + ak[1] * up[1];
        out[2 * k + 1] = ak[2] * up[0] + ak[3] * up[1];
    }
    LeafField::one_form(out)
}

/// `Σ_i A_{a_i}^c T_{a_1…c…a_k}`: a 2-tensor acting on every slot of `T`.
pub fn slot_contract(a: &LeafField, t: &LeafField, g: &MetricField) -> LeafField {
    let order = t.rank().order();
    let nc = 1usize << order;
    let mut out = vec![0.0; t.values().len()];
    if order == 0 {
        return LeafField::new(t.rank(), out);
    }
    let mut buf = vec![0.0; nc];
    for k in 0..g.n_nodes() {
        let mixed = mat_mul(a.at(k).try_into().expect("2-tensor"), g.inverse_at(k));
        let dst = &mut out[k * nc..(k + 1) * nc];
        for slot in 0..order {
            apply_slot(&mixed, t.at(k), order, slot, &mut buf);
            dst.iter_mut().zip(&buf).for_each(|(d, b)| *d += b);
        }
    }
    LeafField::new(t.rank(), out)
}

/// `(A·B)_ab = A_ac B^c_b`, not symmetrized.
pub fn tensor_mul(a: &LeafField, b: &LeafField, g: &MetricField) -> LeafField {
    let n = g.n_nodes();
    let mut out = vec![0.0; 4 * n];
    for k in 0..n {
        let inv = g.inverse_at(k);
        let (ak, bk) = (a.at(k), b.at(k));
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for c in 0..2 {
                    for d in 0..2 {
                        v += ak[2 * i + c] * inv[2 * c + d] * bk[2 * d + j];
                    }
                }
                out[4 * k + 2 * i + j] = v;
            }
        }
    }
    LeafField::new(Rank::Tensor(2), out)
}

/// `A ∧ B = ∈^{ab} A_ac B^c_b`.
pub fn wedge(a: &LeafField, b: &LeafField, g: &MetricField) -> LeafField {
    let m = tensor_mul(a, b, g);
    LeafField::scalar((0..g.n_nodes()).map(|k| (m.at(k)[1] - m.at(k)[2]) / g.sqrt_det()[k]).collect())
}

/// `A ⊗̂ B = A⊗B + B⊗A − γ(A, B) γ` for one-forms.
pub fn hat_product(a: &LeafField, b: &LeafField, g: &MetricField) -> LeafField {
    let n = g.n_nodes();
    let mut out = vec![0.0; 4 * n];
    for k in 0..n {
        let (x, y) = (a.at(k), b.at(k));
        let t = [2.0 * x[0] * y[0], x[0] * y[1] + x[1] * y[0], x[0] * y[1] + x[1] * y[0], 2.0 * x[1] * y[1]];
        out[4 * k..4 * k + 4].copy_from_slice(&trace_free(&g.at(k), g.inverse_at(k), &t));
    }
    LeafField::new(Rank::SymTraceless2, out)
}

/// Symmetric, `γ`-traceless part of a 2-tensor.
pub fn traceless_part(t: &LeafField, g: &MetricField) -> LeafField {
    let n = g.n_nodes();
    let mut out = vec![0.0; 4 * n];
    for k in 0..n {
        let tk = t.at(k);
        let sym = [tk[0], 0.5 * (tk[1] + tk[2]), 0.5 * (tk[1] + tk[2]), tk[3]];
        out[4 * k..4 * k + 4].copy_from_slice(&trace_free(&g.at(k), g.inverse_at(k), &sym));
    }
    LeafField::new(Rank::SymTraceless2, out)
}

/// Round-traceless `A` with `traceless_part(A) = U` for a `γ`-traceless `U`:
/// `A = U − (tr°U / tr°γ) γ`.
pub fn round_representative(u: &LeafField, g: &MetricField) -> LeafField {
    if g.exact_round().is_some() {
        return u.clone();
    }
    let n = g.n_nodes();
    let mut out = vec![0.0; 4 * n];
    for k in 0..n {
        let (uk, gk) = (u.at(k), g.at(k));
        let c = (uk[0] + uk[3]) / (gk[0] + gk[3]);
        for i in 0..4 {
            out[4 * k + i] = uk[i] - c * gk[i];
        }
    }
    LeafField::new(Rank::SymTraceless2, out)
}

/// `γ^{ab} T_ab`.
pub fn metric_trace(t: &LeafField, g: &MetricField) -> LeafField {
    LeafField::scalar((0..g.n_nodes()).map(|k| trace(g.inverse_at(k), t.at(k))).collect())
}

/// `f γ_ab`.
pub fn times_metric(f: &LeafField, g: &MetricField) -> LeafField {
    let n = g.n_nodes();
    let mut out = Vec::with_capacity(4 * n);
    for k in 0..n {
        let gk = g.at(k);
        out.extend(gk.iter().map(|v| v * f.values()[k]));
    }
    LeafField::new(Rank::Tensor(2), out)
}

/// Gauss curvature `K` of `g` as a scalar field.
pub fn gauss_curvature(g: &MetricField) -> LeafField {
    LeafField::scalar(g.gauss_curvature_values().to_vec())
}

/// `F ∧ H = ∈^{ab} F_a H_b` for one-forms.
pub fn form_wedge(a: &LeafField, b: &LeafField, g: &MetricField) -> LeafField {
    LeafField::scalar(
        (0..g.n_nodes())
            .map(|k| {
                let (x, y) = (a.at(k), b.at(k));
                (x[0] * y[1] - x[1] * y[0]) / g.sqrt_det()[k]
            })
            .collect(),
    )
}

