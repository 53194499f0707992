use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::calculus::round_derivative;
use super::field::{LeafField, Rank};
use super::grid::SphereGrid;
use super::harmonics::{random_scalar, random_stt};
use super::spectral::Spectrum;
use super::tensor::{det2, inv2, Mat2};
use crate::error::{invalid, Result};

/// Leaf metric `γ_ab` in the round frame, with lazily derived geometry.
///
/// Invariant: every node carries a symmetric positive-definite 2×2 block.
#[derive(Debug)]
pub struct MetricField {
    grid: Arc<SphereGrid>,
    gamma: Vec<f64>,
    inv: Vec<Mat2>,
    sqrt_det: Vec<f64>,
    round_radius: f64,
    amplitude: f64,
    exact_round: Option<f64>,
    dgamma: OnceLock<Vec<f64>>,
    christoffel: OnceLock<Vec<f64>>,
    curvature: OnceLock<Vec<f64>>,
    spectra: [OnceLock<Arc<Spectrum>>; 3],
    conformal_killing: OnceLock<Vec<LeafField>>,
}

impl Clone for MetricField {
    fn clone(&self) -> Self {
        Self::build(self.grid.clone(), self.gamma.clone(), self.round_radius, self.amplitude)
            .expect("cloned metric stays valid")
    }
}

impl MetricField {
    fn build(grid: Arc<SphereGrid>, gamma: Vec<f64>, round_radius: f64, amplitude: f64) -> Result<Self> {
        let n = grid.n_nodes();
        if gamma.len() != 4 * n {
            return invalid(format!("metric has {} components, grid needs {}", gamma.len(), 4 * n));
        }
        let mut inv = Vec::with_capacity(n);
        let mut sqrt_det = Vec::with_capacity(n);
        for k in 0..n {
            let g: Mat2 = [gamma[4 * k], gamma[4 * k + 1], gamma[4 * k + 2], gamma[4 * k + 3]];
            let d = det2(&g);
            if !(g[0] > 0.0 && d > 0.0) || !d.is_finite() || (g[1] - g[2]).abs() > 1e-12 * (g[0] + g[3]) {
                return invalid(format!("metric not symmetric positive at node {k}"));
            }
            inv.push(inv2(&g));
            sqrt_det.push(d.sqrt());
        }
        let g0 = gamma[0];
        let round = gamma.chunks(4).all(|g| {
            g[1] == 0.0 && g[2] == 0.0 && (g[0] - g0).abs() <= 1e-14 * g0 && (g[3] - g0).abs() <= 1e-14 * g0
        });
        let exact_round = round.then(|| g0.sqrt());
        Ok(Self {
            grid,
            gamma,
            inv,
            sqrt_det,
            round_radius,
            amplitude,
            exact_round,
            dgamma: OnceLock::new(),
            christoffel: OnceLock::new(),
            curvature: OnceLock::new(),
            spectra: Default::default(),
            conformal_killing: OnceLock::new(),
        })
    }

    /// Round metric of radius `r`.
    pub fn round(grid: Arc<SphereGrid>, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return invalid(format!("round radius must be positive, got {r}"));
        }
        let n = grid.n_nodes();
        let mut gamma = Vec::with_capacity(4 * n);
        for _ in 0..n {
            gamma.extend_from_slice(&[r * r, 0.0, 0.0, r * r]);
        }
        Self::build(grid, gamma, r, 0.0)
    }

    /// Arbitrary metric from per-node `[γ_θθ, γ_θφ, γ_φθ, γ_φφ]` blocks.
    pub fn from_components(grid: Arc<SphereGrid>, gamma: Vec<f64>, round_radius: f64, amplitude: f64) -> Result<Self> {
        Self::build(grid, gamma, round_radius, amplitude)
    }

    /// `γ = R²(1 + εψ)γ° + R²ε T` with band-limited `ψ` and round-traceless `T`.
    pub fn perturbed_with(grid: Arc<SphereGrid>, r: f64, eps: f64, psi: &LeafField, t: &LeafField) -> Result<Self> {
        psi.expect_rank(Rank::Scalar, "perturbation profile")?;
        t.expect_rank(Rank::SymTraceless2, "perturbation tensor")?;
        let n = grid.n_nodes();
        let mut gamma = Vec::with_capacity(4 * n);
        let r2 = r * r;
        for k in 0..n {
            let c = r2 * (1.0 + eps * psi.values()[k]);
            let tk = t.at(k);
            gamma.extend_from_slice(&[c + r2 * eps * tk[0], r2 * eps * tk[1], r2 * eps * tk[2], c + r2 * eps * tk[3]]);
        }
        Self::build(grid, gamma, r, eps)
    }

    /// Seeded random perturbation with profiles of degree `≤ band`, each
    /// normalized to unit sup norm.
    pub fn perturbed(grid: Arc<SphereGrid>, r: f64, eps: f64, band: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_scalar(&grid, band, 1, &mut rng);
        let psi = psi.scale(1.0 / psi.max_abs().max(f64::MIN_POSITIVE));
        let t = random_stt(&grid, band.max(2), &mut rng);
        let t = t.scale(1.0 / t.max_abs().max(f64::MIN_POSITIVE));
        Self::perturbed_with(grid, r, eps, &psi, &t)
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }
    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }
    pub fn components(&self) -> &[f64] {
        &self.gamma
    }
    pub fn at(&self, k: usize) -> Mat2 {
        [self.gamma[4 * k], self.gamma[4 * k + 1], self.gamma[4 * k + 2], self.gamma[4 * k + 3]]
    }
    pub fn inverse_at(&self, k: usize) -> &Mat2 {
        &self.inv[k]
    }
    /// Area element relative to the unit round sphere.
    pub fn sqrt_det(&self) -> &[f64] {
        &self.sqrt_det
    }
    pub fn round_radius(&self) -> f64 {
        self.round_radius
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    /// `Some(R)` when `γ = R²γ°` at every node.
    pub fn exact_round(&self) -> Option<f64> {
        self.exact_round
    }

    /// Node weights of `dA_γ`.
    pub fn area_weights(&self) -> Vec<f64> {
        self.grid.quad_weights().iter().zip(&self.sqrt_det).map(|(w, s)| w * s).collect()
    }

    pub fn area(&self) -> f64 {
        self.grid.quad_weights().iter().zip(&self.sqrt_det).map(|(w, s)| w * s).sum()
    }

    /// Area radius `√(Area/4π)`.
    pub fn area_radius(&self) -> f64 {
        (self.area() / (4.0 * std::f64::consts::PI)).sqrt()
    }

    /// `∇°_e γ_ab`, order 3.
    pub fn round_gradient(&self) -> &[f64] {
        self.dgamma.get_or_init(|| {
            if self.exact_round.is_some() {
                vec![0.0; 8 * self.n_nodes()]
            } else {
                round_derivative(&self.grid, &self.gamma, 2)
            }
        })
    }

    /// Connection difference `C^c_ab = Γ^c_ab − Γ°^c_ab`, stored at `c·4 + a·2 + b`.
    pub fn christoffel(&self) -> &[f64] {
        self.christoffel.get_or_init(|| {
            let n = self.n_nodes();
            if self.exact_round.is_some() {
                return vec![0.0; 8 * n];
            }
            let dg = self.round_gradient();
            let mut out = vec![0.0; 8 * n];
            for k in 0..n {
                let d = &dg[8 * k..8 * k + 8];
                let inv = &self.inv[k];
                let low = |dd: usize, a: usize, b: usize| d[a * 4 + b * 2 + dd] + d[b * 4 + a * 2 + dd] - d[dd * 4 + a * 2 + b];
                for c in 0..2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            let mut v = 0.0;
                            for dd in 0..2 {
                                v += inv[2 * c + dd] * low(dd, a, b);
                            }
                            out[8 * k + c * 4 + a * 2 + b] = 0.5 * v;
                        }
                    }
                }
            }
            out
        })
    }

    /// Gauss curvature at each node.
    pub fn gauss_curvature_values(&self) -> &[f64] {
        self.curvature.get_or_init(|| match self.exact_round {
            Some(r) => vec![1.0 / (r * r); self.n_nodes()],
            None => self.curvature_from_connection(),
        })
    }

    fn curvature_from_connection(&self) -> Vec<f64> {
        let n = self.n_nodes();
        let dg = self.round_gradient();
        let ddg = round_derivative(&self.grid, dg, 3);
        let c = self.christoffel();
        let mut out = vec![0.0; n];
        for k in 0..n {
            let inv = &self.inv[k];
            let d = &dg[8 * k..8 * k + 8];
            let dd = &ddg[16 * k..16 * k + 16];
            let ck = &c[8 * k..8 * k + 8];
            // G_dab = ∇_a γ_bd + ∇_b γ_ad − ∇_d γ_ab and its derivative.
            let g_low = |x: usize, a: usize, b: usize| d[a * 4 + b * 2 + x] + d[b * 4 + a * 2 + x] - d[x * 4 + a * 2 + b];
            let dg_low = |f: usize, x: usize, a: usize, b: usize| {
                dd[f * 8 + a * 4 + b * 2 + x] + dd[f * 8 + b * 4 + a * 2 + x] - dd[f * 8 + x * 4 + a * 2 + b]
            };
            // ∇°_f C^c_ab
            let mut dc = [0.0; 16];
            for f in 0..2 {
                for cc in 0..2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            let mut v = 0.0;
                            for x in 0..2 {
                                let mut dinv = 0.0;
                                for p in 0..2 {
                                    for q in 0..2 {
                                        dinv -= inv[2 * cc + p] * inv[2 * x + q] * d[f * 4 + p * 2 + q];
                                    }
                                }
                                v += dinv * g_low(x, a, b) + inv[2 * cc + x] * dg_low(f, x, a, b);
                            }
                            dc[f * 8 + cc * 4 + a * 2 + b] = 0.5 * v;
                        }
                    }
                }
            }
            let cf = |a: usize, b: usize, cc: usize| ck[a * 4 + b * 2 + cc];
            // Ric_bd = Σ_a R^a_bad with R^a_bcd = R°^a_bcd + ∇_c C^a_db − ∇_d C^a_cb + C^a_ce C^e_db − C^a_de C^e_cb.
            let mut ric = [0.0; 4];
            for b in 0..2 {
                for dd_ in 0..2 {
                    let mut v = 0.0;
                    for a in 0..2 {
                        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                        v += delta(a, a) * delta(b, dd_) - delta(a, dd_) * delta(b, a);
                        v += dc[a * 8 + a * 4 + dd_ * 2 + b] - dc[dd_ * 8 + a * 4 + a * 2 + b];
                        for e in 0..2 {
                            v += cf(a, a, e) * cf(e, dd_, b) - cf(a, dd_, e) * cf(e, a, b);
                        }
                    }
                    ric[2 * b + dd_] = v;
                }
            }
            out[k] = 0.5 * (inv[0] * ric[0] + inv[1] * ric[1] + inv[2] * ric[2] + inv[3] * ric[3]);
        }
        out
    }

    pub(crate) fn spectrum_slot(&self, idx: usize) -> &OnceLock<Arc<Spectrum>> {
        &self.spectra[idx]
    }

    pub(crate) fn conformal_killing_slot(&self) -> &OnceLock<Vec<LeafField>> {
        &self.conformal_killing
    }
}
