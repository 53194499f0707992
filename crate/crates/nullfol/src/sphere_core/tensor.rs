//! Pointwise index algebra for covariant tensors with `2^k` components.
//!
//! Component index bits: slot 0 is the most significant bit.

pub(crate) type Mat2 = [f64; 4];

#[inline]
pub(crate) fn det2(m: &Mat2) -> f64 {
    m[0] * m[3] - m[1] * m[2]
}

#[inline]
pub(crate) fn inv2(m: &Mat2) -> Mat2 {
    let r = 1.0 / det2(m);
    [m[3] * r, -m[1] * r, -m[2] * r, m[0] * r]
}

/// Contracts matrix `m` (as `m[b][a]`) into `slot` of `t`.
pub(crate) fn apply_slot(m: &Mat2, t: &[f64], order: usize, slot: usize, out: &mut [f64]) {
    let shift = order - 1 - slot;
    let bit = 1usize << shift;
    for idx in 0..(1usize << order) {
        let b = (idx >> shift) & 1;
        let base = idx & !bit;
        out[idx] = m[2 * b] * t[base] + m[2 * b + 1] * t[base | bit];
    }
}

/// Applies `m` to every slot of `t`.
pub(crate) fn apply_all(m: &Mat2, t: &[f64], order: usize, out: &mut [f64]) {
    let n = 1usize << order;
    if order == 0 {
        out[0] = t[0];
        return;
    }
    let mut a = [0.0; 32];
    let mut b = [0.0; 32];
    a[..n].copy_from_slice(&t[..n]);
    for slot in 0..order {
        apply_slot(m, &a[..n], order, slot, &mut b[..n]);
        a[..n].copy_from_slice(&b[..n]);
    }
    out[..n].copy_from_slice(&a[..n]);
}

/// `γ`-inner product of two order-`k` covariant tensors at one node.
pub(crate) fn inner(inv: &Mat2, a: &[f64], b: &[f64], order: usize) -> f64 {
    match order {
        0 => return a[0] * b[0],
        1 => return a[0] * (inv[0] * b[0] + inv[1] * b[1]) + a[1] * (inv[2] * b[0] + inv[3] * b[1]),
        2 => {
            let ib = mat_mul(inv, &[b[0], b[1], b[2], b[3]]);
            let r = mat_mul(&ib, &[inv[0], inv[2], inv[1], inv[3]]);
            return a[0] * r[0] + a[1] * r[1] + a[2] * r[2] + a[3] * r[3];
        }
        _ => {}
    }
    let n = 1usize << order;
    let mut raised = [0.0; 32];
    apply_all(inv, b, order, &mut raised);
    a[..n].iter().zip(&raised[..n]).map(|(x, y)| x * y).sum()
}

/// Area form `∈_ab = √|γ| ∈°_ab` in the round frame.
#[inline]
pub(crate) fn area_form(sqrt_det: f64) -> Mat2 {
    [0.0, sqrt_det, -sqrt_det, 0.0]
}

/// `(∈·γ⁻¹)` so that `(⋆F)_a = Σ_b J[a][b] F_b`.
#[inline]
pub(crate) fn dual_matrix(inv: &Mat2, sqrt_det: f64) -> Mat2 {
    let e = area_form(sqrt_det);
    mat_mul(&e, inv)
}

#[inline]
pub(crate) fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// Removes the `γ`-trace of a symmetric 2-tensor.
#[inline]
pub(crate) fn trace_free(g: &Mat2, inv: &Mat2, t: &[f64]) -> [f64; 4] {
    let tr = inv[0] * t[0] + inv[1] * t[1] + inv[2] * t[2] + inv[3] * t[3];
    [
        t[0] - 0.5 * tr * g[0],
        t[1] - 0.5 * tr * g[1],
        t[2] - 0.5 * tr * g[2],
        t[3] - 0.5 * tr * g[3],
    ]
}

#[inline]
pub(crate) fn trace(inv: &Mat2, t: &[f64]) -> f64 {
    inv[0] * t[0] + inv[1] * t[1] + inv[2] * t[2] + inv[3] * t[3]
}
