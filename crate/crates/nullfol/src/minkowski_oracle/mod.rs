//! Closed-form null cones of flat space with homogeneous initial data.
//!
//! `χ` has constant eigenvalues `λ₀ ≤ μ₀` on `S₀`, and each eigenvalue solves
//! the scalar Riccati equation `y' = −y²`, so `y(s) = y₀/(1 + s y₀)`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, NullfolError, Result};

/// Homogeneous initial data on a round `S₀` of radius `r0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinkowskiData {
    pub trchi0: f64,
    /// `|χ̂(0)|` in the metric norm.
    pub chih0_norm: f64,
    /// Smaller eigenvalue of `χ(0)`.
    pub lambda0: f64,
    pub mu0: f64,
    pub r0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactState {
    pub trchi: f64,
    pub chih_norm: f64,
    /// Volume ratio `Δ(s) = (1 + sλ₀)(1 + sμ₀)`.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpNorms {
    pub trchi_lp: f64,
    pub chih_lp: f64,
}

impl MinkowskiData {
    /// Data on the unit sphere.
    pub fn new(trchi0: f64, chih0_norm: f64) -> Result<Self> {
        Self::with_radius(trchi0, chih0_norm, 1.0)
    }

    pub fn with_radius(trchi0: f64, chih0_norm: f64, r0: f64) -> Result<Self> {
        if !trchi0.is_finite() || !(chih0_norm >= 0.0) || !chih0_norm.is_finite() {
            return invalid("Minkowski data needs finite trχ₀ and |χ̂₀| ≥ 0");
        }
        if !(r0 > 0.0) || !r0.is_finite() {
            return invalid("initial radius must be positive");
        }
        let split = SQRT_2 * chih0_norm;
        Ok(Self {
            trchi0,
            chih0_norm,
            lambda0: 0.5 * (trchi0 - split),
            mu0: 0.5 * (trchi0 + split),
            r0,
        })
    }

    /// Round cone through a sphere of radius `r0`: `trχ₀ = 2/r0`, `χ̂₀ = 0`.
    pub fn round(r0: f64) -> Result<Self> {
        Self::with_radius(2.0 / r0, 0.0, r0)
    }

    /// `E(s) = trχ₀ + s(½trχ₀² − |χ̂₀|²)`, the numerator of `trχ(s)`.
    pub fn numerator(&self, s: f64) -> f64 {
        self.trchi0 + s * (0.5 * self.trchi0 * self.trchi0 - self.chih0_norm * self.chih0_norm)
    }

    pub fn delta(&self, s: f64) -> f64 {
        (1.0 + s * self.lambda0) * (1.0 + s * self.mu0)
    }
}

/// First `s > 0` where `Δ` vanishes, if any.
pub fn caustic_time(d: &MinkowskiData) -> Option<f64> {
    (d.lambda0 < 0.0).then(|| -1.0 / d.lambda0)
}

fn check_domain(d: &MinkowskiData, s: f64) -> Result<()> {
    if !s.is_finite() {
        return invalid("parameter must be finite");
    }
    // Both factors of Δ must stay positive on the segment from 0 to s.
    if 1.0 + s * d.lambda0 <= 0.0 || 1.0 + s * d.mu0 <= 0.0 {
        return Err(NullfolError::DomainError(format!("s = {s} lies at or past a caustic")));
    }
    Ok(())
}

pub fn exact_state(d: &MinkowskiData, s: f64) -> Result<ExactState> {
    check_domain(d, s)?;
    if s == 0.0 {
        return Ok(ExactState { trchi: d.trchi0, chih_norm: d.chih0_norm, delta: 1.0 });
    }
    let delta = d.delta(s);
    Ok(ExactState { trchi: d.numerator(s) / delta, chih_norm: d.chih0_norm / delta, delta })
}

/// `‖trχ‖_{L^p(S_s)}` and `‖χ̂‖_{L^p(S_s)}`, using `dA_s = Δ(s) dA₀`.
pub fn lp_norm_evolution(d: &MinkowskiData, p: f64, s: f64) -> Result<LpNorms> {
    if !(p >= 2.0) {
        return invalid(format!("exponent must be at least 2, got {p}"));
    }
    let st = exact_state(d, s)?;
    let area0 = 4.0 * PI * d.r0 * d.r0;
    let norm = |pointwise: f64| {
        if p.is_infinite() {
            pointwise.abs()
        } else {
            (area0 * st.delta).powf(1.0 / p) * pointwise.abs()
        }
    };
    Ok(LpNorms { trchi_lp: norm(st.trchi), chih_lp: norm(st.chih_norm) })
}
