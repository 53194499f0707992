//! Gauss–Legendre × equispaced grid and the real spherical-harmonic transform.
//!
//! Real harmonics are orthonormal on the unit sphere:
//! `Y_l0 = P̄_l0`, `Y_lm = √2 P̄_lm cos mφ`, `Y_l,-m = √2 P̄_lm sin mφ` (m > 0),
//! without the Condon–Shortley phase. Coefficients are stored at `l² + l + m`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Result};

/// Smallest admissible band limit.
pub const MIN_BAND: usize = 4;
/// Extra degrees carried by the working band so that frame factors and a few
/// derivatives of band-limited data stay exactly representable.
pub const BAND_PADDING: usize = 4;

#[derive(Debug, Clone)]
pub struct SphereGrid {
    band_limit: usize,
    work_band: usize,
    n_lat: usize,
    n_lon: usize,
    colatitudes: Vec<f64>,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    longitudes: Vec<f64>,
    ring_weights: Vec<f64>,
    quad_weights: Vec<f64>,
    plm: Vec<f64>,
    dplm: Vec<f64>,
    trig_cos: Vec<f64>,
    trig_sin: Vec<f64>,
    frames: Vec<[[f64; 3]; 2]>,
}

/// Index of `(l, m)`, `|m| ≤ l`, in a coefficient vector.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

#[inline]
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Number of coefficients for band `band`.
#[inline]
pub fn n_coeffs(band: usize) -> usize {
    (band + 1) * (band + 1)
}

/// Gauss–Legendre nodes (descending in `x`) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Normalized associated Legendre values `P̄_lm(cos θ)` and `∂_θ P̄_lm` for
/// `0 ≤ m ≤ l ≤ band`, packed by `tri(l, m)`.
fn legendre_table(band: usize, x: f64, s: f64) -> (Vec<f64>, Vec<f64>) {
    let n = tri(band, band) + 1;
    let mut p = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=band {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        p[tri(m, m)] = pmm;
        if m < band {
            p[tri(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * pmm;
        }
        for l in (m + 2)..=band {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[tri(l, m)] = a * (x * p[tri(l - 1, m)] - b * p[tri(l - 2, m)]);
        }
    }
    for l in 0..=band {
        for m in 0..=l {
            let lf = l as f64;
            let mut v = lf * x * p[tri(l, m)];
            if l > m {
                let c = ((2.0 * lf + 1.0) / (2.0 * lf - 1.0) * (lf * lf - (m * m) as f64)).sqrt();
                v -= c * p[tri(l - 1, m)];
            }
            dp[tri(l, m)] = v / s;
        }
    }
    (p, dp)
}

impl SphereGrid {
    /// Grid resolving band `band_limit` with `BAND_PADDING` extra working degrees.
    pub fn new(band_limit: usize) -> Result<Self> {
        if band_limit < MIN_BAND {
            return invalid(format!("band limit {band_limit} below minimum {MIN_BAND}"));
        }
        let work_band = band_limit + BAND_PADDING;
        let n_lat = work_band + 1;
        let n_lon = 2 * work_band + 2;
        let (x, w) = gauss_legendre(n_lat);
        let colatitudes: Vec<f64> = x.iter().map(|v| v.acos()).collect();
        let cos_theta = x.clone();
        let sin_theta: Vec<f64> = x.iter().map(|v| (1.0 - v * v).sqrt()).collect();
        let dphi = 2.0 * PI / n_lon as f64;
        let longitudes: Vec<f64> = (0..n_lon).map(|j| j as f64 * dphi).collect();
        let ring_weights: Vec<f64> = w.iter().map(|wi| wi * dphi).collect();
        let mut quad_weights = Vec::with_capacity(n_lat * n_lon);
        for rw in &ring_weights {
            quad_weights.extend(std::iter::repeat_n(*rw, n_lon));
        }
        let ntri = tri(work_band, work_band) + 1;
        let mut plm = Vec::with_capacity(n_lat * ntri);
        let mut dplm = Vec::with_capacity(n_lat * ntri);
        for i in 0..n_lat {
            let (p, dp) = legendre_table(work_band, cos_theta[i], sin_theta[i]);
            plm.extend(p);
            dplm.extend(dp);
        }
        let mut trig_cos = Vec::with_capacity((work_band + 1) * n_lon);
        let mut trig_sin = Vec::with_capacity((work_band + 1) * n_lon);
        for m in 0..=work_band {
            for phi in &longitudes {
                trig_cos.push((m as f64 * phi).cos());
                trig_sin.push((m as f64 * phi).sin());
            }
        }
        let mut frames = Vec::with_capacity(n_lat * n_lon);
        for i in 0..n_lat {
            for phi in &longitudes {
                let (sp, cp) = phi.sin_cos();
                frames.push([
                    [cos_theta[i] * cp, cos_theta[i] * sp, -sin_theta[i]],
                    [-sp, cp, 0.0],
                ]);
            }
        }
        Ok(Self {
            band_limit,
            work_band,
            n_lat,
            n_lon,
            colatitudes,
            cos_theta,
            sin_theta,
            longitudes,
            ring_weights,
            quad_weights,
            plm,
            dplm,
            trig_cos,
            trig_sin,
            frames,
        })
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }
    pub fn work_band(&self) -> usize {
        self.work_band
    }
    pub fn n_lat(&self) -> usize {
        self.n_lat
    }
    pub fn n_lon(&self) -> usize {
        self.n_lon
    }
    pub fn n_nodes(&self) -> usize {
        self.n_lat * self.n_lon
    }
    pub fn n_coeffs(&self) -> usize {
        n_coeffs(self.work_band)
    }
    pub fn colatitudes(&self) -> &[f64] {
        &self.colatitudes
    }
    pub fn longitudes(&self) -> &[f64] {
        &self.longitudes
    }
    /// Node weights of the unit round sphere; they sum to 4π.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }
    /// `(θ, φ)` of node `k`.
    pub fn node_angles(&self, k: usize) -> (f64, f64) {
        (self.colatitudes[k / self.n_lon], self.longitudes[k % self.n_lon])
    }
    pub fn sin_theta_at(&self, k: usize) -> f64 {
        self.sin_theta[k / self.n_lon]
    }
    pub fn cos_theta_at(&self, k: usize) -> f64 {
        self.cos_theta[k / self.n_lon]
    }
    /// Unit vectors `e_θ`, `e_φ/sinθ` at node `k`, as ambient 3-vectors.
    pub fn frame(&self, k: usize) -> &[[f64; 3]; 2] {
        &self.frames[k]
    }
    /// Outward unit normal at node `k`.
    pub fn normal(&self, k: usize) -> [f64; 3] {
        let (t, p) = self.node_angles(k);
        [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
    }

    fn ntri(&self) -> usize {
        tri(self.work_band, self.work_band) + 1
    }

    fn ring_fourier(&self, row: &[f64], c: &mut [f64], s: &mut [f64]) {
        let n = self.n_lon;
        for m in 0..=self.work_band {
            let tc = &self.trig_cos[m * n..(m + 1) * n];
            let ts = &self.trig_sin[m * n..(m + 1) * n];
            let mut acc_c = 0.0;
            let mut acc_s = 0.0;
            for j in 0..n {
                acc_c += row[j] * tc[j];
                acc_s += row[j] * ts[j];
            }
            c[m] = acc_c;
            s[m] = acc_s;
        }
    }

    fn ring_inverse_fourier(&self, a: &[f64], b: &[f64], row: &mut [f64]) {
        let n = self.n_lon;
        row.iter_mut().for_each(|v| *v = 0.0);
        for m in 0..=self.work_band {
            let (am, bm) = (a[m], b[m]);
            if am == 0.0 && bm == 0.0 {
                continue;
            }
            let tc = &self.trig_cos[m * n..(m + 1) * n];
            let ts = &self.trig_sin[m * n..(m + 1) * n];
            for j in 0..n {
                row[j] += am * tc[j] + bm * ts[j];
            }
        }
    }

    /// Quadrature projection onto `Y_lm`, `l ≤ work_band`.
    pub fn analyze(&self, f: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.n_nodes());
        let lc = self.work_band;
        let ntri = self.ntri();
        let mut out = vec![0.0; n_coeffs(lc)];
        let mut c = vec![0.0; lc + 1];
        let mut s = vec![0.0; lc + 1];
        for i in 0..self.n_lat {
            self.ring_fourier(&f[i * self.n_lon..(i + 1) * self.n_lon], &mut c, &mut s);
            let w = self.ring_weights[i];
            let p = &self.plm[i * ntri..(i + 1) * ntri];
            for m in 0..=lc {
                let (cm, sm) = if m == 0 { (w * c[0], 0.0) } else { (SQRT_2 * w * c[m], SQRT_2 * w * s[m]) };
                for l in m..=lc {
                    let pv = p[tri(l, m)];
                    out[l * l + l + m] += pv * cm;
                    if m > 0 {
                        out[l * l + l - m] += pv * sm;
                    }
                }
            }
        }
        out
    }

    /// Nodal values of `Σ c_lm Y_lm`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let lc = self.work_band;
        let ntri = self.ntri();
        let mut out = vec![0.0; self.n_nodes()];
        let mut a = vec![0.0; lc + 1];
        let mut b = vec![0.0; lc + 1];
        for i in 0..self.n_lat {
            let p = &self.plm[i * ntri..(i + 1) * ntri];
            for m in 0..=lc {
                let (mut sa, mut sb) = (0.0, 0.0);
                for l in m..=lc {
                    let pv = p[tri(l, m)];
                    sa += pv * coeffs[l * l + l + m];
                    if m > 0 {
                        sb += pv * coeffs[l * l + l - m];
                    }
                }
                if m == 0 {
                    a[0] = sa;
                    b[0] = 0.0;
                } else {
                    a[m] = SQRT_2 * sa;
                    b[m] = SQRT_2 * sb;
                }
            }
            self.ring_inverse_fourier(&a, &b, &mut out[i * self.n_lon..(i + 1) * self.n_lon]);
        }
        out
    }

    /// Round-frame components `(∂_θ f, ∂_φ f / sinθ)` of `f = Σ c_lm Y_lm`,
    /// interleaved per node.
    pub fn synthesize_gradient(&self, coeffs: &[f64]) -> Vec<f64> {
        let lc = self.work_band;
        let ntri = self.ntri();
        let n = self.n_lon;
        let mut out = vec![0.0; 2 * self.n_nodes()];
        let mut a = vec![0.0; lc + 1];
        let mut b = vec![0.0; lc + 1];
        let mut ga = vec![0.0; lc + 1];
        let mut gb = vec![0.0; lc + 1];
        let mut row_t = vec![0.0; n];
        let mut row_p = vec![0.0; n];
        for i in 0..self.n_lat {
            let p = &self.plm[i * ntri..(i + 1) * ntri];
            let dp = &self.dplm[i * ntri..(i + 1) * ntri];
            let inv_s = 1.0 / self.sin_theta[i];
            for m in 0..=lc {
                let (mut sa, mut sb, mut da, mut db) = (0.0, 0.0, 0.0, 0.0);
                for l in m..=lc {
                    let cp = coeffs[l * l + l + m];
                    let cn = if m > 0 { coeffs[l * l + l - m] } else { 0.0 };
                    sa += p[tri(l, m)] * cp;
                    sb += p[tri(l, m)] * cn;
                    da += dp[tri(l, m)] * cp;
                    db += dp[tri(l, m)] * cn;
                }
                let k = if m == 0 { 1.0 } else { SQRT_2 };
                a[m] = k * da;
                b[m] = k * db;
                let mf = m as f64 * inv_s * k;
                ga[m] = mf * sb;
                gb[m] = -mf * sa;
            }
            self.ring_inverse_fourier(&a, &b, &mut row_t);
            self.ring_inverse_fourier(&ga, &gb, &mut row_p);
            for j in 0..n {
                let k = i * n + j;
                out[2 * k] = row_t[j];
                out[2 * k + 1] = row_p[j];
            }
        }
        out
    }

    /// Adjoint of [`synthesize_gradient`](Self::synthesize_gradient):
    /// `c_lm = Σ w (F_θ ∂_θ Y_lm + F_φ ∂_φ Y_lm / sinθ)` for an interleaved
    /// round-frame one-form `F`.
    pub fn analyze_gradient(&self, f: &[f64]) -> Vec<f64> {
        let lc = self.work_band;
        let ntri = self.ntri();
        let n = self.n_lon;
        let mut out = vec![0.0; n_coeffs(lc)];
        let mut rt = vec![0.0; n];
        let mut rp = vec![0.0; n];
        let (mut tc, mut ts, mut pc, mut ps) =
            (vec![0.0; lc + 1], vec![0.0; lc + 1], vec![0.0; lc + 1], vec![0.0; lc + 1]);
        for i in 0..self.n_lat {
            for j in 0..n {
                let k = i * n + j;
                rt[j] = f[2 * k];
                rp[j] = f[2 * k + 1];
            }
            self.ring_fourier(&rt, &mut tc, &mut ts);
            self.ring_fourier(&rp, &mut pc, &mut ps);
            let w = self.ring_weights[i];
            let inv_s = 1.0 / self.sin_theta[i];
            let p = &self.plm[i * ntri..(i + 1) * ntri];
            let dp = &self.dplm[i * ntri..(i + 1) * ntri];
            for m in 0..=lc {
                let k = if m == 0 { w } else { SQRT_2 * w };
                let mf = m as f64 * inv_s;
                for l in m..=lc {
                    let (pv, dv) = (p[tri(l, m)], dp[tri(l, m)]);
                    out[l * l + l + m] += k * (dv * tc[m] - mf * pv * ps[m]);
                    if m > 0 {
                        out[l * l + l - m] += k * (dv * ts[m] + mf * pv * pc[m]);
                    }
                }
            }
        }
        out
    }

    /// Nodal values of the single real harmonic `Y_lm`.
    pub fn harmonic(&self, l: usize, m: i64) -> Vec<f64> {
        assert!(l <= self.work_band && m.unsigned_abs() as usize <= l);
        let mut c = vec![0.0; self.n_coeffs()];
        c[lm_index(l, m)] = 1.0;
        self.synthesize(&c)
    }
}
