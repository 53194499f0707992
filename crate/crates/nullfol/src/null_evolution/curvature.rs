use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::sphere_core::calculus::{dot, tensor_dot_form, traceless_part, wedge};
use crate::sphere_core::harmonics::{random_one_form, random_scalar, random_stt};
use crate::sphere_core::{LeafField, MetricField, Rank, SphereGrid};

use super::state::FoliationState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureMode {
    Zero,
    Synthetic,
}

/// Null curvature components on one leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSample {
    pub alpha: LeafField,
    pub beta: LeafField,
    pub rho: LeafField,
    pub sigma: LeafField,
    pub betab: LeafField,
}

impl CurvatureSample {
    pub fn zero(n: usize) -> Self {
        Self {
            alpha: LeafField::zeros(Rank::SymTraceless2, n),
            beta: LeafField::zeros(Rank::OneForm, n),
            rho: LeafField::zeros(Rank::Scalar, n),
            sigma: LeafField::zeros(Rank::Scalar, n),
            betab: LeafField::zeros(Rank::OneForm, n),
        }
    }

    fn scale(&self, c: f64) -> Self {
        Self {
            alpha: self.alpha.scale(c),
            beta: self.beta.scale(c),
            rho: self.rho.scale(c),
            sigma: self.sigma.scale(c),
            betab: self.betab.scale(c),
        }
    }

    pub fn is_zero(&self) -> bool {
        [&self.alpha, &self.beta, &self.rho, &self.sigma, &self.betab].iter().all(|f| f.is_zero())
    }
}

/// Curvature supplied along the null hypersurface.
///
/// Synthetic input is a fixed spatial profile times `(1 + s)^{-decay}`;
/// `α` is made `γ(s)`-traceless at sampling time.
#[derive(Debug, Clone)]
pub struct CurvatureInput {
    mode: CurvatureMode,
    profile: CurvatureSample,
    decay: f64,
}

fn unit(f: LeafField) -> LeafField {
    let m = f.max_abs();
    if m > 0.0 {
        f.scale(1.0 / m)
    } else {
        f
    }
}

impl CurvatureInput {
    pub fn zero() -> Self {
        Self { mode: CurvatureMode::Zero, profile: CurvatureSample::zero(0), decay: 0.0 }
    }

    /// Seeded band-limited components of sup norm `amplitude`, decaying like `1/(1+s)`.
    pub fn synthetic(grid: &SphereGrid, band: usize, amplitude: f64, seed: u64) -> Result<Self> {
        if !amplitude.is_finite() {
            return invalid("curvature amplitude must be finite");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = CurvatureSample {
            alpha: unit(random_stt(grid, band.max(2), &mut rng)),
            beta: unit(random_one_form(grid, band, &mut rng)),
            rho: unit(random_scalar(grid, band, 0, &mut rng)),
            sigma: unit(random_scalar(grid, band, 0, &mut rng)),
            betab: unit(random_one_form(grid, band, &mut rng)),
        }
        .scale(amplitude);
        Ok(Self { mode: CurvatureMode::Synthetic, profile, decay: 1.0 })
    }

    /// Explicit profile scaled by `(1 + s)^{-decay}`.
    pub fn from_profile(profile: CurvatureSample, decay: f64) -> Result<Self> {
        if !decay.is_finite() {
            return invalid("decay exponent must be finite");
        }
        let n = profile.rho.n_nodes();
        let shapes = [
            (&profile.alpha, Rank::SymTraceless2),
            (&profile.beta, Rank::OneForm),
            (&profile.rho, Rank::Scalar),
            (&profile.sigma, Rank::Scalar),
            (&profile.betab, Rank::OneForm),
        ];
        for (f, rank) in shapes {
            f.expect_rank(rank, "curvature component")?;
            if f.n_nodes() != n || !f.all_finite() {
                return invalid("curvature components must be finite fields on one grid");
            }
        }
        Ok(Self { mode: CurvatureMode::Synthetic, profile, decay })
    }

    pub fn mode(&self) -> CurvatureMode {
        self.mode
    }

    pub fn is_zero(&self) -> bool {
        self.mode == CurvatureMode::Zero || self.profile.is_zero()
    }

    /// Same profile multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { mode: self.mode, profile: self.profile.scale(c), decay: self.decay }
    }

    /// Components on the leaf `(s, g)`.
    pub fn sample(&self, s: f64, g: &MetricField) -> CurvatureSample {
        let n = g.n_nodes();
        if self.is_zero() {
            return CurvatureSample::zero(n);
        }
        let c = (1.0 + s).powf(-self.decay);
        let mut out = self.profile.scale(c);
        out.alpha = traceless_part(&out.alpha, g);
        out
    }
}

/// `ρ̌ = ρ − ½χ̂·χ̲̂`, `σ̌ = σ − ½χ̂∧χ̲̂`, `β̲̌ = β̲ + 2χ̲̂·ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormalizedCurvature {
    pub rho_check: LeafField,
    pub sigma_check: LeafField,
    pub betab_check: LeafField,
}

impl RenormalizedCurvature {
    pub fn new(state: &FoliationState, curv: &CurvatureSample) -> Self {
        let g = &state.gamma;
        Self {
            rho_check: curv.rho.axpy(-0.5, &dot(&state.chih, &state.chibh, g)),
            sigma_check: curv.sigma.axpy(-0.5, &wedge(&state.chih, &state.chibh, g)),
            betab_check: curv.betab.axpy(2.0, &tensor_dot_form(&state.chibh, &state.zeta, g)),
        }
    }
}
