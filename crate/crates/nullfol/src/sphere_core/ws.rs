//! Chart-wise weak-sphericity audit.
//!
//! Two charts cover the sphere: ordinary spherical coordinates about the
//! z-axis and rotated spherical coordinates about the x-axis, each restricted
//! to polar angles in `[π/6, 5π/6]` so neither chart touches its own poles.

use std::f64::consts::PI;

use super::metric::MetricField;

const CHART_MIN: f64 = PI / 6.0;
const CHART_MAX: f64 = 5.0 * PI / 6.0;

/// Audit outcome. `pass` depends only on `sph_deviation`.
#[derive(Debug, Clone, PartialEq)]
pub struct WsReport {
    /// `max(λ_max, 1/λ_min)` of the coordinate metric over both charts.
    pub c_bound: f64,
    /// `max_U Σ ∫_U |∂γ_ab|² dx`.
    pub deriv_l2: f64,
    /// `max_U (Σ ∫_U |∂(γ − R²γ°)_ab|² dx)^{1/2}`.
    pub sph_deviation: f64,
    pub radius: f64,
    /// `½ ≤ R ≤ 2`.
    pub radius_in_range: bool,
    pub pass: bool,
    pub charts: &'static str,
}

pub const CHART_DESCRIPTION: &str =
    "spherical (theta,phi) about z and about x, polar angle in [pi/6, 5pi/6]";

struct ChartPoint {
    /// Coordinate vectors in the round frame, `A[i][a]`.
    a: [[f64; 2]; 2],
    /// `Γ^m_ki` of the unit round metric in these coordinates.
    christoffel: [[[f64; 2]; 2]; 2],
    /// Coordinate area weight `w / sinθ'`.
    weight: f64,
}

fn spherical_christoffel(theta: f64) -> [[[f64; 2]; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let mut g = [[[0.0; 2]; 2]; 2];
    // g[m][k][i] = Γ^m_ki
    g[0][1][1] = -s * c;
    g[1][0][1] = c / s;
    g[1][1][0] = c / s;
    g
}

fn chart_points(metric: &MetricField, rotated: bool) -> Vec<Option<ChartPoint>> {
    let grid = metric.grid();
    (0..grid.n_nodes())
        .map(|k| {
            let n = grid.normal(k);
            let (tp, dt, dp) = if rotated {
                let tp = n[0].clamp(-1.0, 1.0).acos();
                let pp = n[2].atan2(n[1]);
                let (st, ct) = tp.sin_cos();
                let (sp, cp) = pp.sin_cos();
                (tp, [-st, ct * cp, ct * sp], [0.0, -st * sp, st * cp])
            } else {
                let (t, p) = grid.node_angles(k);
                let (st, ct) = t.sin_cos();
                let (sp, cp) = p.sin_cos();
                (t, [ct * cp, ct * sp, -st], [-st * sp, st * cp, 0.0])
            };
            if !(CHART_MIN..=CHART_MAX).contains(&tp) {
                return None;
            }
            let e = grid.frame(k);
            let proj = |v: &[f64; 3], a: usize| v[0] * e[a][0] + v[1] * e[a][1] + v[2] * e[a][2];
            Some(ChartPoint {
                a: [[proj(&dt, 0), proj(&dt, 1)], [proj(&dp, 0), proj(&dp, 1)]],
                christoffel: spherical_christoffel(tp),
                weight: grid.quad_weights()[k] / tp.sin(),
            })
        })
        .collect()
}

/// Coordinate components `G_ij` and partials `∂_k G_ij` of a frame 2-tensor.
fn coordinate_jet(p: &ChartPoint, t: &[f64], dt: &[f64]) -> ([[f64; 2]; 2], [[[f64; 2]; 2]; 2]) {
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut v = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    v += p.a[i][a] * p.a[j][b] * t[2 * a + b];
                }
            }
            g[i][j] = v;
        }
    }
    let mut dg = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for c in 0..2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            v += p.a[k][c] * p.a[i][a] * p.a[j][b] * dt[4 * c + 2 * a + b];
                        }
                    }
                }
                for m in 0..2 {
                    v += p.christoffel[m][k][i] * g[m][j] + p.christoffel[m][k][j] * g[i][m];
                }
                dg[k][i][j] = v;
            }
        }
    }
    (g, dg)
}

/// Discrete weak-sphericity audit with `R` the exact round radius when the
/// metric is exactly round and the area radius otherwise.
pub fn ws_audit(metric: &MetricField, threshold: f64) -> WsReport {
    let radius = metric.exact_round().unwrap_or_else(|| metric.area_radius());
    let dgamma = metric.round_gradient();
    let mut c_bound: f64 = 1.0;
    let mut deriv_l2: f64 = 0.0;
    let mut sph: f64 = 0.0;
    for rotated in [false, true] {
        let pts = chart_points(metric, rotated);
        let (mut d_full, mut d_dev) = (0.0, 0.0);
        for (k, p) in pts.iter().enumerate() {
            let Some(p) = p else { continue };
            let gk = metric.at(k);
            let dk = &dgamma[8 * k..8 * k + 8];
            let (gc, dgc) = coordinate_jet(p, &gk, dk);
            let r2 = radius * radius;
            let dev = [gk[0] - r2, gk[1], gk[2], gk[3] - r2];
            let (_, ddev) = coordinate_jet(p, &dev, dk);
            let tr = gc[0][0] + gc[1][1];
            let det = gc[0][0] * gc[1][1] - gc[0][1] * gc[1][0];
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            let (lmax, lmin) = (0.5 * tr + disc, 0.5 * tr - disc);
            c_bound = c_bound.max(lmax).max(1.0 / lmin);
            let sq = |d: &[[[f64; 2]; 2]; 2]| d.iter().flatten().flatten().map(|v| v * v).sum::<f64>();
            d_full += p.weight * sq(&dgc);
            d_dev += p.weight * sq(&ddev);
        }
        deriv_l2 = deriv_l2.max(d_full);
        sph = sph.max(d_dev);
    }
    let sph_deviation = sph.sqrt();
    WsReport {
        c_bound,
        deriv_l2,
        sph_deviation,
        radius,
        radius_in_range: (0.5..=2.0).contains(&radius),
        pass: sph_deviation <= threshold,
        charts: CHART_DESCRIPTION,
    }
}
