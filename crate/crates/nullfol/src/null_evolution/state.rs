use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::hodge_ops::{invert, HodgeField, HodgeKind};
use crate::minkowski_oracle::MinkowskiData;
use crate::sphere_core::calculus::{gauss_curvature, grad, times_metric};
use crate::sphere_core::harmonics::random_scalar;
use crate::sphere_core::{LeafField, MetricField, Rank, SphereGrid};

use super::frame::frame_rescale;

/// One leaf `S_s` of a geodesic foliation.
///
/// `η̲ = −ζ` is implied and not stored. Tensor components refer to
/// coordinates transported along the generators.
#[derive(Debug, Clone)]
pub struct FoliationState {
    pub s: f64,
    pub gamma: Arc<MetricField>,
    pub trchi: LeafField,
    pub chih: LeafField,
    pub zeta: LeafField,
    pub trchib: LeafField,
    pub chibh: LeafField,
    /// Area radius `√(Area/4π)`.
    pub r: f64,
    /// Volume ratio `√|γ(s)| / √|γ(0)|`.
    pub v: LeafField,
}

fn check(f: &LeafField, rank: Rank, n: usize, what: &str) -> Result<()> {
    f.expect_rank(rank, what)?;
    if f.n_nodes() != n {
        return invalid(format!("{what} has {} nodes, metric has {n}", f.n_nodes()));
    }
    if !f.all_finite() {
        return invalid(format!("{what} is not finite"));
    }
    Ok(())
}

impl FoliationState {
    /// Assembles a leaf, checking shapes and `v > 0`; `r` is derived from `gamma`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        s: f64,
        gamma: Arc<MetricField>,
        trchi: LeafField,
        chih: LeafField,
        zeta: LeafField,
        trchib: LeafField,
        chibh: LeafField,
        v: LeafField,
    ) -> Result<Self> {
        let n = gamma.n_nodes();
        check(&trchi, Rank::Scalar, n, "trχ")?;
        check(&chih, Rank::SymTraceless2, n, "χ̂")?;
        check(&zeta, Rank::OneForm, n, "ζ")?;
        check(&trchib, Rank::Scalar, n, "trχ̲")?;
        check(&chibh, Rank::SymTraceless2, n, "χ̲̂")?;
        check(&v, Rank::Scalar, n, "v")?;
        if v.values().iter().any(|x| *x <= 0.0) {
            return invalid("volume ratio must be positive");
        }
        let r = gamma.area_radius();
        Ok(Self { s, gamma, trchi, chih, zeta, trchib, chibh, r, v })
    }

    /// Initial leaf at `s = 0` with `v ≡ 1`.
    pub fn initial(
        gamma: MetricField,
        trchi: LeafField,
        chih: LeafField,
        zeta: LeafField,
        trchib: LeafField,
        chibh: LeafField,
    ) -> Result<Self> {
        let n = gamma.n_nodes();
        Self::new(0.0, Arc::new(gamma), trchi, chih, zeta, trchib, chibh, LeafField::constant(1.0, n))
    }

    /// Minkowski light cone through a round sphere of radius `r0`.
    pub fn minkowski_round(grid: Arc<SphereGrid>, r0: f64) -> Result<Self> {
        let gamma = MetricField::round(grid, r0)?;
        let n = gamma.n_nodes();
        Self::initial(
            gamma,
            LeafField::constant(2.0 / r0, n),
            LeafField::zeros(Rank::SymTraceless2, n),
            LeafField::zeros(Rank::OneForm, n),
            LeafField::constant(-2.0 / r0, n),
            LeafField::zeros(Rank::SymTraceless2, n),
        )
    }

    /// Homogeneous data with `trχ = trχ₀` and `χ̂ = (|χ̂₀|/√2) diag(1, −1)`
    /// in the orthonormal round frame, on a round sphere of radius `r0`.
    ///
    /// The frame is singular at the poles, so `χ̂` is not a smooth tensor on
    /// the sphere; the evolution is pointwise and does not notice.
    pub fn minkowski_homogeneous(grid: Arc<SphereGrid>, d: &MinkowskiData) -> Result<Self> {
        let r0 = d.r0;
        let gamma = MetricField::round(grid, r0)?;
        let n = gamma.n_nodes();
        let c = r0 * r0 * d.chih0_norm / std::f64::consts::SQRT_2;
        let chih = LeafField::new(Rank::SymTraceless2, (0..n).flat_map(|_| [c, 0.0, 0.0, -c]).collect());
        Self::initial(
            gamma,
            LeafField::constant(d.trchi0, n),
            chih,
            LeafField::zeros(Rank::OneForm, n),
            LeafField::constant(-2.0 / r0, n),
            LeafField::zeros(Rank::SymTraceless2, n),
        )
    }

    /// Minkowski-embeddable data on a perturbed sphere.
    ///
    /// Starts from the cone of the perturbed leaf (`trχ = 2r₀K`, `χ̂` solving
    /// `div χ̂ = ½∇trχ`, flat `χ̲`), then rescales the null pair by
    /// `ω = e^{εh}` with a seeded band-limited `h`. Gauss and Codazzi hold with
    /// zero curvature up to the Hodge solve tolerance.
    pub fn perturbed(grid: Arc<SphereGrid>, r0: f64, eps: f64, band: usize, seed: u64) -> Result<Self> {
        let gamma = MetricField::perturbed(grid.clone(), r0, eps, band, seed)?;
        let n = gamma.n_nodes();
        let trchi = gauss_curvature(&gamma).scale(2.0 * r0);
        let rhs = grad(&trchi, &gamma).scale(0.5);
        let chih = match invert(HodgeKind::D2, &HodgeField::Single(rhs), &gamma)? {
            HodgeField::Single(u) => u,
            HodgeField::Pair(..) => unreachable!("D2 inverts to a single field"),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let h = random_scalar(&grid, band, 1, &mut rng);
        let h = h.scale(eps / h.max_abs().max(f64::MIN_POSITIVE));
        let base = Self::initial(
            gamma,
            trchi,
            chih,
            LeafField::zeros(Rank::OneForm, n),
            LeafField::constant(-2.0 / r0, n),
            LeafField::zeros(Rank::SymTraceless2, n),
        )?;
        frame_rescale(&base, &h.map(f64::exp))
    }

    pub fn n_nodes(&self) -> usize {
        self.gamma.n_nodes()
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        self.gamma.grid()
    }

    /// `χ = χ̂ + ½trχ γ`.
    pub fn chi(&self) -> LeafField {
        self.chih.clone().with_rank(Rank::Tensor(2)).add(&times_metric(&self.trchi, &self.gamma).scale(0.5))
    }

    /// `χ̲ = χ̲̂ + ½trχ̲ γ`.
    pub fn chib(&self) -> LeafField {
        self.chibh.clone().with_rank(Rank::Tensor(2)).add(&times_metric(&self.trchib, &self.gamma).scale(0.5))
    }
}
