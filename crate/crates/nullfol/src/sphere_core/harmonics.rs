//! Band-limited test fields.

use rand::Rng;

use super::field::{LeafField, Rank};
use super::grid::{lm_index, n_coeffs, SphereGrid};
use super::spectral::{one_form_synthesize, stt_synthesize};

/// Uniform `[-1, 1]` coefficients on degrees `lmin..=band`.
pub fn random_coeffs<R: Rng>(grid: &SphereGrid, band: usize, lmin: usize, rng: &mut R) -> Vec<f64> {
    let band = band.min(grid.work_band());
    let mut c = vec![0.0; n_coeffs(grid.work_band())];
    for l in lmin..=band {
        for m in -(l as i64)..=(l as i64) {
            c[lm_index(l, m)] = rng.gen_range(-1.0..1.0);
        }
    }
    c
}

pub fn random_scalar<R: Rng>(grid: &SphereGrid, band: usize, lmin: usize, rng: &mut R) -> LeafField {
    LeafField::scalar(grid.synthesize(&random_coeffs(grid, band, lmin, rng)))
}

/// `∇p + ⋆∇q` with random `p, q` of degree `1..=band`.
pub fn random_one_form<R: Rng>(grid: &SphereGrid, band: usize, rng: &mut R) -> LeafField {
    let p = random_coeffs(grid, band, 1, rng);
    let q = random_coeffs(grid, band, 1, rng);
    LeafField::one_form(one_form_synthesize(grid, &p, &q))
}

/// Round-traceless `∇̂²u + ⋆∇̂²v` with random `u, v` of degree `2..=band`.
pub fn random_stt<R: Rng>(grid: &SphereGrid, band: usize, rng: &mut R) -> LeafField {
    let u = random_coeffs(grid, band, 2, rng);
    let v = random_coeffs(grid, band, 2, rng);
    LeafField::new(Rank::SymTraceless2, stt_synthesize(grid, &u, &v))
}

/// `Y_lm` as a scalar field.
pub fn harmonic(grid: &SphereGrid, l: usize, m: i64) -> LeafField {
    LeafField::scalar(grid.harmonic(l, m))
}

/// Gradient harmonic `∇°Y_lm`.
pub fn gradient_harmonic(grid: &SphereGrid, l: usize, m: i64) -> LeafField {
    let mut c = vec![0.0; grid.n_coeffs()];
    c[lm_index(l, m)] = 1.0;
    LeafField::one_form(grid.synthesize_gradient(&c))
}

/// Traceless Hessian harmonic `∇̂°²Y_lm`.
pub fn tensor_harmonic(grid: &SphereGrid, l: usize, m: i64) -> LeafField {
    let mut c = vec![0.0; grid.n_coeffs()];
    c[lm_index(l, m)] = 1.0;
    let zero = vec![0.0; c.len()];
    LeafField::new(Rank::SymTraceless2, stt_synthesize(grid, &c, &zero))
}
