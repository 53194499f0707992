//! Spectral calculus of the rough Laplacian `−Δ` on scalars, one-forms and
//! symmetric traceless 2-tensors.
//!
//! Round metrics use the closed-form harmonic decomposition
//! `F = ∇p + ⋆∇q` and `U = ∇̂²u + ⋆∇̂²v`. Other metrics use a Galerkin
//! eigenbasis built from the round harmonics of degree `≤ band_limit`, so
//! every multiplier `m(−Δ)` is applied exactly on that subspace.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::calculus::{covariant_derivative, round_derivative};
use super::field::{LeafField, Rank};
use super::grid::{lm_index, n_coeffs, SphereGrid};
use super::metric::MetricField;
use super::tensor::{apply_all, trace_free};
use crate::error::{numeric, Result};

/// `l(l+1)`.
#[inline]
pub fn degree_eigenvalue(l: usize) -> f64 {
    (l * (l + 1)) as f64
}

/// Eigenvalue of `−Δ` on the unit round sphere for a degree-`l` mode.
pub fn round_eigenvalue(rank: Rank, l: usize) -> f64 {
    let lam = degree_eigenvalue(l);
    match rank.order() {
        0 => lam,
        1 => lam - 1.0,
        _ => lam - 4.0,
    }
}

/// Lowest degree carried by a rank.
pub fn min_degree(rank: Rank) -> usize {
    rank.order().min(2)
}

fn star_round(f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for k in 0..f.len() / 2 {
        out[2 * k] = f[2 * k + 1];
        out[2 * k + 1] = -f[2 * k];
    }
    out
}

/// `(p, q)` with `F = ∇°p + ⋆°∇°q` (degree `≥ 1`).
pub fn one_form_analyze(grid: &SphereGrid, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut p = grid.analyze_gradient(f);
    // ⟨F, ⋆∇Y⟩ = ⟨−⋆F, ∇Y⟩
    let minus_star: Vec<f64> = star_round(f).iter().map(|v| -v).collect();
    let mut q = grid.analyze_gradient(&minus_star);
    p[0] = 0.0;
    q[0] = 0.0;
    for l in 1..=grid.work_band() {
        let lam = degree_eigenvalue(l);
        for idx in lm_index(l, -(l as i64))..=lm_index(l, l as i64) {
            p[idx] /= lam;
            q[idx] /= lam;
        }
    }
    (p, q)
}

pub fn one_form_synthesize(grid: &SphereGrid, p: &[f64], q: &[f64]) -> Vec<f64> {
    let gp = grid.synthesize_gradient(p);
    let gq = grid.synthesize_gradient(q);
    let sq = star_round(&gq);
    gp.iter().zip(&sq).map(|(a, b)| a + b).collect()
}

fn round_div_stt(grid: &SphereGrid, u: &[f64]) -> Vec<f64> {
    let d = round_derivative(grid, u, 2);
    let n = grid.n_nodes();
    let mut out = vec![0.0; 2 * n];
    for k in 0..n {
        let dk = &d[8 * k..8 * k + 8];
        out[2 * k] = dk[0] + dk[6];
        out[2 * k + 1] = dk[1] + dk[7];
    }
    out
}

/// `(u, v)` with `U = ∇̂²u + ⋆∇̂²v` on the unit round sphere (degree `≥ 2`).
pub fn stt_analyze(grid: &SphereGrid, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (mut p, mut q) = one_form_analyze(grid, &round_div_stt(grid, u));
    for l in 0..=grid.work_band() {
        let c = if l < 2 { 0.0 } else { -2.0 / (degree_eigenvalue(l) - 2.0) };
        for idx in lm_index(l, -(l as i64))..=lm_index(l, l as i64) {
            p[idx] *= c;
            q[idx] *= c;
        }
    }
    (p, q)
}

pub fn stt_synthesize(grid: &SphereGrid, u: &[f64], v: &[f64]) -> Vec<f64> {
    let f = one_form_synthesize(grid, u, v);
    let d = round_derivative(grid, &f, 1);
    let n = grid.n_nodes();
    let mut out = vec![0.0; 4 * n];
    for k in 0..n {
        let dk = &d[4 * k..4 * k + 4];
        let off = 0.5 * (dk[1] + dk[2]);
        let half = 0.5 * (dk[0] - dk[3]);
        out[4 * k..4 * k + 4].copy_from_slice(&[half, off, off, -half]);
    }
    out
}

/// Round harmonic coefficients of a field: one part for scalars, two otherwise.
pub fn round_analyze(grid: &SphereGrid, f: &LeafField) -> Vec<Vec<f64>> {
    match f.rank().order() {
        0 => vec![grid.analyze(f.values())],
        1 => {
            let (p, q) = one_form_analyze(grid, f.values());
            vec![p, q]
        }
        _ => {
            let (u, v) = stt_analyze(grid, f.values());
            vec![u, v]
        }
    }
}

pub fn round_synthesize(grid: &SphereGrid, rank: Rank, parts: &[Vec<f64>]) -> LeafField {
    match rank.order() {
        0 => LeafField::scalar(grid.synthesize(&parts[0])),
        1 => LeafField::one_form(one_form_synthesize(grid, &parts[0], &parts[1])),
        _ => LeafField::new(Rank::SymTraceless2, stt_synthesize(grid, &parts[0], &parts[1])),
    }
}

/// Applies `m(λ)` degree by degree, `λ` the eigenvalue of `−Δ` on a round
/// sphere of radius `r`.
pub fn round_multiplier(grid: &SphereGrid, f: &LeafField, r: f64, m: impl Fn(f64) -> f64) -> LeafField {
    let rank = f.rank();
    let mut parts = round_analyze(grid, f);
    let lmin = min_degree(rank);
    for l in 0..=grid.work_band() {
        let factor = if l < lmin { 0.0 } else { m(round_eigenvalue(rank, l) / (r * r)) };
        for part in parts.iter_mut() {
            for idx in lm_index(l, -(l as i64))..=lm_index(l, l as i64) {
                part[idx] *= factor;
            }
        }
    }
    round_synthesize(grid, rank, &parts)
}

/// Galerkin eigenpairs of `−Δ_γ` on one tensor rank.
#[derive(Debug)]
pub struct Spectrum {
    rank: Rank,
    eigenvalues: Vec<f64>,
    /// Row `k` holds the nodal values of the `γ`-orthonormal mode `φ_k`.
    modes: DMatrix<f64>,
    /// Same modes with indices raised and multiplied by the area weights.
    duals: DMatrix<f64>,
}

impl Spectrum {
    pub fn rank(&self) -> Rank {
        self.rank
    }

    /// Eigenvalues of `−Δ_γ`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `⟨φ_k, F⟩_γ` for every mode.
    pub fn coefficients(&self, f: &LeafField) -> Vec<f64> {
        let v = DVector::from_column_slice(f.values());
        (&self.duals * v).as_slice().to_vec()
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> LeafField {
        let c = DVector::from_column_slice(coeffs);
        let out = self.modes.tr_mul(&c);
        LeafField::new(self.rank, out.as_slice().to_vec())
    }

    pub fn apply(&self, f: &LeafField, m: impl Fn(f64) -> f64) -> LeafField {
        let mut c = self.coefficients(f);
        for (ck, lam) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= m(*lam);
        }
        self.synthesize(&c)
    }
}

fn rank_slot(rank: Rank) -> usize {
    rank.order().min(2)
}

fn spectral_rank(order: usize) -> Rank {
    match order {
        0 => Rank::Scalar,
        1 => Rank::OneForm,
        _ => Rank::SymTraceless2,
    }
}

/// Galerkin basis functions of degree `≤ band` for a rank, nodal.
fn basis(g: &MetricField, order: usize, band: usize) -> Vec<LeafField> {
    let grid = g.grid();
    let lmin = order.min(2);
    let mut specs = Vec::new();
    for l in lmin..=band {
        for m in -(l as i64)..=(l as i64) {
            for part in 0..if order == 0 { 1 } else { 2 } {
                specs.push((l, m, part));
            }
        }
    }
    specs
        .par_iter()
        .map(|&(l, m, part)| {
            let mut c = vec![0.0; n_coeffs(grid.work_band())];
            c[lm_index(l, m)] = 1.0;
            let zero = vec![0.0; c.len()];
            match order {
                0 => LeafField::scalar(grid.synthesize(&c)),
                1 => {
                    let v = if part == 0 { one_form_synthesize(grid, &c, &zero) } else { one_form_synthesize(grid, &zero, &c) };
                    LeafField::one_form(v)
                }
                _ => {
                    let v = if part == 0 { stt_synthesize(grid, &c, &zero) } else { stt_synthesize(grid, &zero, &c) };
                    let mut out = v.clone();
                    for k in 0..g.n_nodes() {
                        let tf = trace_free(&g.at(k), g.inverse_at(k), &v[4 * k..4 * k + 4]);
                        out[4 * k..4 * k + 4].copy_from_slice(&tf);
                    }
                    LeafField::new(Rank::SymTraceless2, out)
                }
            }
        })
        .collect()
}

/// Index-raised, area-weighted copy of a field of the given order.
pub(crate) fn weighted_dual(f: &[f64], order: usize, g: &MetricField) -> Vec<f64> {
    let nc = 1usize << order;
    let w = g.grid().quad_weights();
    let s = g.sqrt_det();
    let mut out = vec![0.0; f.len()];
    for k in 0..g.n_nodes() {
        apply_all(g.inverse_at(k), &f[k * nc..(k + 1) * nc], order, &mut out[k * nc..(k + 1) * nc]);
        out[k * nc..(k + 1) * nc].iter_mut().for_each(|v| *v *= w[k] * s[k]);
    }
    out
}

fn gram(a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    let n = a.len();
    let len = a.first().map_or(0, |v| v.len());
    let am = DMatrix::from_fn(n, len, |i, j| a[i][j]);
    let bm = DMatrix::from_fn(n, len, |i, j| b[i][j]);
    let mut g = &am * bm.transpose();
    let sym = (&g + g.transpose()) * 0.5;
    g.copy_from(&sym);
    g
}

/// Builds the Galerkin spectrum of `−Δ_γ` on the given rank.
pub fn galerkin_spectrum(g: &MetricField, rank: Rank, band: usize) -> Result<Spectrum> {
    let order = rank.order().min(2);
    let b = basis(g, order, band);
    let db: Vec<LeafField> = b.par_iter().map(|f| covariant_derivative(f, g)).collect();
    let bw: Vec<Vec<f64>> = b.par_iter().map(|f| weighted_dual(f.values(), order, g)).collect();
    let dbw: Vec<Vec<f64>> = db.par_iter().map(|f| weighted_dual(f.values(), order + 1, g)).collect();
    let bv: Vec<Vec<f64>> = b.iter().map(|f| f.values().to_vec()).collect();
    let dbv: Vec<Vec<f64>> = db.iter().map(|f| f.values().to_vec()).collect();
    let mass = gram(&bv, &bw);
    let stiff = gram(&dbv, &dbw);
    let chol = match mass.clone().cholesky() {
        Some(c) => c,
        None => return numeric("Galerkin mass matrix is not positive definite", f64::NAN),
    };
    let l = chol.l();
    let l_inv = match l.clone().try_inverse() {
        Some(m) => m,
        None => return numeric("Galerkin mass factor is singular", f64::NAN),
    };
    let a = &l_inv * &stiff * l_inv.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();
    let mut order_idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order_idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let coeffs = l_inv.transpose() * &eig.eigenvectors;
    let n_modes = order_idx.len();
    let len = bv.first().map_or(0, |v| v.len());
    let basis_m = DMatrix::from_fn(n_modes, len, |i, j| bv[i][j]);
    let basis_w = DMatrix::from_fn(n_modes, len, |i, j| bw[i][j]);
    let sorted = DMatrix::from_fn(n_modes, n_modes, |i, k| coeffs[(i, order_idx[k])]);
    let modes = sorted.transpose() * basis_m;
    let duals = sorted.transpose() * basis_w;
    let eigenvalues = order_idx.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    Ok(Spectrum {
        rank: spectral_rank(order),
        eigenvalues,
        modes,
        duals,
    })
}

/// Cached Galerkin spectrum of `g` on `rank`.
pub fn spectrum(g: &MetricField, rank: Rank) -> Result<Arc<Spectrum>> {
    let slot = g.spectrum_slot(rank_slot(rank));
    if let Some(s) = slot.get() {
        return Ok(s.clone());
    }
    let s = Arc::new(galerkin_spectrum(g, rank, g.grid().band_limit())?);
    Ok(slot.get_or_init(|| s).clone())
}

/// `m(−Δ_γ) F`: exact on round metrics, Galerkin otherwise.
pub fn apply_multiplier(f: &LeafField, g: &MetricField, m: impl Fn(f64) -> f64) -> Result<LeafField> {
    match g.exact_round() {
        Some(r) => Ok(round_multiplier(g.grid(), f, r, m)),
        None => Ok(spectrum(g, f.rank())?.apply(f, m)),
    }
}

/// All eigenvalues available to [`apply_multiplier`] for a rank.
pub fn eigenvalues(g: &MetricField, rank: Rank) -> Result<Vec<f64>> {
    match g.exact_round() {
        Some(r) => {
            let mut out = Vec::new();
            for l in min_degree(rank)..=g.grid().work_band() {
                out.push(round_eigenvalue(rank, l) / (r * r));
            }
            Ok(out)
        }
        None => Ok(spectrum(g, rank)?.eigenvalues().to_vec()),
    }
}

/// `(λ_j, e_j)` with `Σ_j m(λ_j)² e_j = ‖m(−Δ)F‖²_{L²}` for every multiplier.
pub fn spectral_energy(f: &LeafField, g: &MetricField) -> Result<Vec<(f64, f64)>> {
    match g.exact_round() {
        Some(r) => {
            let grid = g.grid();
            let rank = f.rank();
            let parts = round_analyze(grid, f);
            let r2 = r * r;
            let mut out = Vec::with_capacity(grid.work_band() + 1);
            for l in min_degree(rank)..=grid.work_band() {
                let lam = degree_eigenvalue(l);
                let norm = match rank.order() {
                    0 => r2,
                    1 => lam,
                    _ => 0.5 * lam * (lam - 2.0) / r2,
                };
                let mut e = 0.0;
                for part in &parts {
                    for idx in lm_index(l, -(l as i64))..=lm_index(l, l as i64) {
                        e += part[idx] * part[idx];
                    }
                }
                out.push((round_eigenvalue(rank, l) / r2, norm * e));
            }
            Ok(out)
        }
        None => {
            let s = spectrum(g, f.rank())?;
            let c = s.coefficients(f);
            Ok(s.eigenvalues().iter().zip(&c).map(|(l, c)| (*l, c * c)).collect())
        }
    }
}
