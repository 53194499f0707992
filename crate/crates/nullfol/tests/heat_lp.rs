use nullfol::heat_lp::{
    besov_norm, commutator_diag, heat_evolve, lambda_pow, lp_project, sobolev_norm, LeafSample, LpIndex, LpStack,
};
use nullfol::sphere_core::calculus::{grad, l2_norm, laplacian, sup_norm};
use nullfol::sphere_core::harmonics::{harmonic, random_scalar};
use nullfol::sphere_core::{make_grid, LeafField, MetricField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn round(l: usize, r: f64) -> MetricField {
    MetricField::round(make_grid(l).unwrap(), r).unwrap()
}

fn perturbed(l: usize, seed: u64) -> MetricField {
    MetricField::perturbed(make_grid(l).unwrap(), 1.0, 0.05, 3, seed).unwrap()
}

fn rel(a: &LeafField, b: &LeafField, g: &MetricField) -> f64 {
    l2_norm(&a.sub(b), g) / l2_norm(b, g).max(1e-300)
}

#[test]
fn heat_factor_on_degree_two() {
    let g = round(12, 1.0);
    for m in -2..=2 {
        let y = harmonic(g.grid(), 2, m);
        let u = heat_evolve(&y, 0.1, &g).unwrap();
        assert!(u.sub(&y.scale((-0.6f64).exp())).max_abs() < 1e-12);
    }
    assert!(((-0.6f64).exp() - 0.548812).abs() < 1e-6);
}

#[test]
fn heat_zero_time_and_negative_time() {
    let g = round(8, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_scalar(g.grid(), 6, 0, &mut rng);
    assert_eq!(heat_evolve(&f, 0.0, &g).unwrap(), f);
    assert!(heat_evolve(&f, -0.1, &g).is_err());
}

#[test]
fn heat_flow_contracts_l2() {
    for g in [round(12, 1.0), perturbed(16, 4)] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_scalar(g.grid(), 6, 0, &mut rng);
        let n0 = l2_norm(&f, &g);
        for tau in [0.01, 0.1, 1.0] {
            assert!(l2_norm(&heat_evolve(&f, tau, &g).unwrap(), &g) <= n0 * (1.0 + 1e-12));
        }
    }
}

#[test]
fn heat_semigroup() {
    for (g, tol) in [(round(12, 1.0), 1e-9), (perturbed(16, 5), 1e-6)] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_scalar(g.grid(), 6, 0, &mut rng);
        let two = heat_evolve(&heat_evolve(&f, 0.03, &g).unwrap(), 0.07, &g).unwrap();
        let one = heat_evolve(&f, 0.1, &g).unwrap();
        assert!(rel(&two, &one, &g) < tol);
    }
}

#[test]
fn heat_smoothing_constants() {
    // sup_λ (τλ)^{1/2} e^{−τλ} = (2e)^{−1/2}, sup_λ τλ e^{−τλ} = 1/e
    let c1 = (2.0 * std::f64::consts::E).powf(-0.5);
    let c2 = 1.0 / std::f64::consts::E;
    let g = round(16, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_scalar(g.grid(), 12, 0, &mut rng);
    let nf = l2_norm(&f, &g);
    let (mut m1, mut m2): (f64, f64) = (0.0, 0.0);
    for i in 0..=12 {
        let tau = 1e-3 * 10f64.powf(3.0 * i as f64 / 12.0);
        let u = heat_evolve(&f, tau, &g).unwrap();
        m1 = m1.max(l2_norm(&grad(&u, &g), &g) * tau.sqrt() / nf);
        m2 = m2.max(l2_norm(&laplacian(&u, &g), &g) * tau / nf);
    }
    assert!(m1 <= c1 + 1e-9 && m1 > 0.1, "{m1}");
    assert!(m2 <= c2 + 1e-9 && m2 > 0.1, "{m2}");
}

#[test]
fn lambda_power_closed_forms() {
    let g = round(12, 1.0);
    let y = harmonic(g.grid(), 2, 1);
    let u = lambda_pow(&y, -1.0, &g).unwrap();
    let c = 7f64.powf(-0.5);
    assert!((c - 0.377964).abs() < 1e-6);
    assert!(u.sub(&y.scale(c)).max_abs() < 1e-8);
    assert_eq!(lambda_pow(&y, 0.0, &g).unwrap(), y);
    let u = lambda_pow(&y, 2.0, &g).unwrap();
    assert!(u.sub(&y.scale(7.0)).max_abs() < 1e-10);
    let y = harmonic(g.grid(), 5, -3);
    let u = lambda_pow(&y, -0.5, &g).unwrap();
    assert!(u.sub(&y.scale(31f64.powf(-0.25))).max_abs() < 1e-8);
}

#[test]
fn lambda_power_on_radius_two() {
    let g = round(12, 2.0);
    let y = harmonic(g.grid(), 3, 0);
    let u = lambda_pow(&y, -1.5, &g).unwrap();
    assert!(u.sub(&y.scale((1.0f64 + 3.0).powf(-0.75))).max_abs() < 1e-8);
}

#[test]
fn lambda_power_composition() {
    for g in [round(12, 1.0), perturbed(16, 6)] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_scalar(g.grid(), 6, 0, &mut rng);
        for (a, b) in [(0.25, 0.25), (0.25, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0), (0.25, 1.0)] {
            let ab = lambda_pow(&lambda_pow(&f, -a, &g).unwrap(), -b, &g).unwrap();
            let c = lambda_pow(&f, -(a + b), &g).unwrap();
            assert!(rel(&ab, &c, &g) < 1e-6, "{a} {b}");
        }
    }
}

#[test]
fn lp_telescoping_residual_is_monotone() {
    let g = round(12, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = random_scalar(g.grid(), 8, 0, &mut rng);
    let stack = LpStack::for_metric(&g);
    let mut partial = lp_project(&f, LpIndex::Low, &g).unwrap();
    let mut last = f64::INFINITY;
    for k in stack.levels() {
        partial = partial.add(&lp_project(&f, LpIndex::Band(k), &g).unwrap());
        let res = l2_norm(&f.sub(&partial), &g);
        let tau = 4f64.powi(-(k as i32 + 1));
        let expect = l2_norm(&heat_evolve(&f, tau, &g).unwrap().sub(&f), &g);
        assert!((res - expect).abs() < 1e-10 * (1.0 + expect));
        assert!(res <= last + 1e-13);
        last = res;
    }
    assert!(last < 1e-9 * l2_norm(&f, &g));
}

#[test]
fn lp_peak_for_single_mode() {
    let g = round(16, 1.0);
    for l in [2usize, 5, 9, 14] {
        let y = harmonic(g.grid(), l, 0);
        let lam = (l * (l + 1)) as f64;
        let norms: Vec<f64> = (0..12).map(|k| l2_norm(&lp_project(&y, LpIndex::Band(k), &g).unwrap(), &g)).collect();
        let oracle: Vec<f64> = (0..12)
            .map(|k| ((-lam / 4f64.powi(k + 1)).exp() - (-lam / 4f64.powi(k)).exp()).abs())
            .collect();
        for (n, o) in norms.iter().zip(&oracle) {
            assert!((n - o).abs() < 1e-10);
        }
        let peak = norms.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0 as f64;
        assert!((peak - 0.5 * lam.log2()).abs() <= 1.0, "l={l} peak={peak}");
    }
}

#[test]
fn lp_constants_and_range() {
    let g = round(8, 1.0);
    let c = LeafField::constant(3.0, g.n_nodes());
    for k in 0..5 {
        assert!(lp_project(&c, LpIndex::Band(k), &g).unwrap().max_abs() < 1e-12);
    }
    let stack = LpStack::for_metric(&g);
    assert!(lp_project(&c, LpIndex::Band(-1), &g).is_err());
    assert!(lp_project(&c, LpIndex::Band(stack.k_max + 1), &g).is_err());
}

#[test]
fn besov_and_sobolev_basic() {
    let g = round(12, 1.0);
    let z = LeafField::zeros(nullfol::sphere_core::Rank::Scalar, g.n_nodes());
    assert_eq!(besov_norm(&z, 1.0, &g).unwrap(), 0.0);
    assert_eq!(sobolev_norm(&z, 1.0, &g).unwrap(), 0.0);
    assert!(besov_norm(&z, 2.5, &g).is_err());
    for l in 0..=10 {
        let y = harmonic(g.grid(), l, 0);
        let lam = (l * (l + 1)) as f64;
        // a = 0: Σ|e^{−λ4^{−(k+1)}} − e^{−λ4^{−k}}| + e^{−λ} = 1 by monotone telescoping
        let b0 = besov_norm(&y, 0.0, &g).unwrap();
        assert!((b0 - 1.0).abs() < 1e-9, "{l} {b0}");
        let h0 = sobolev_norm(&y, 0.0, &g).unwrap();
        assert!(h0 > 0.5 && h0 <= 1.0 + (-lam).exp() + 1e-12, "{l} {h0}");
    }
}

#[test]
fn besov_controls_sup_norm_on_corpus() {
    let g = round(16, 1.0);
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let f = random_scalar(g.grid(), 2 + (seed as usize % 12), 0, &mut rng);
        let ratio = sup_norm(&f, &g) / besov_norm(&f, 1.0, &g).unwrap();
        worst = worst.max(ratio);
    }
    assert!(worst.is_finite() && worst < 1.0, "{worst}");
}

#[test]
fn commutator_needs_three_leaves_and_vanishes_on_zero() {
    let gs: Vec<MetricField> = (0..4).map(|i| round(8, 1.0 + 0.1 * i as f64)).collect();
    let z = LeafField::zeros(nullfol::sphere_core::Rank::Scalar, gs[0].n_nodes());
    let samples: Vec<LeafSample> =
        gs.iter().enumerate().map(|(i, g)| LeafSample { s: 0.1 * i as f64, metric: g, field: &z }).collect();
    assert!(commutator_diag(&samples[..2], 0.75, 0.1).is_err());
    let rep = commutator_diag(&samples, 0.75, 0.1).unwrap();
    assert_eq!(rep.lhs_norm, 0.0);
}

#[test]
fn commutator_on_expanding_round_leaves() {
    // γ_s = (1+s)²γ°, f = Y_20 frozen: [∂_s, Λ^{−a}]Y_20 = ∂_s (1 + 6/r²)^{−a/2} Y_20
    let a = 0.75;
    let n = 41;
    let gs: Vec<MetricField> = (0..n).map(|i| round(8, 1.0 + i as f64 / (n - 1) as f64)).collect();
    let y = harmonic(gs[0].grid(), 2, 0);
    let samples: Vec<LeafSample> = gs
        .iter()
        .enumerate()
        .map(|(i, g)| LeafSample { s: i as f64 / (n - 1) as f64, metric: g, field: &y })
        .collect();
    let rep = commutator_diag(&samples, a, 0.1).unwrap();
    // ‖Y_20‖_{L²(S_s)} = r
    let integrand = |s: f64| {
        let r: f64 = 1.0 + s;
        6.0 * a * r.powi(-2) * (1.0 + 6.0 / (r * r)).powf(-0.5 * a - 1.0)
    };
    let m = 4000;
    let exact: f64 = (0..m)
        .map(|i| {
            let (x0, x1) = (i as f64 / m as f64, (i + 1) as f64 / m as f64);
            (x1 - x0) / 6.0 * (integrand(x0) + 4.0 * integrand(0.5 * (x0 + x1)) + integrand(x1))
        })
        .sum();
    assert!((rep.lhs_norm - exact).abs() < 1e-3 * exact, "{} {exact}", rep.lhs_norm);
    assert!(rep.k_a < 1e-10, "{rep:?}");
    let i_a = 1.0 + rep.k_a.powf(1.0 / (1.0 - a)) + rep.k_a.sqrt();
    assert!((rep.i_a - i_a).abs() < 1e-15 && rep.i_a - 1.0 < 1e-5);
    assert!((rep.rhs_norm - (7.0f64 / 3.0).sqrt()).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn negative_powers_are_monotone(seed in 0u64..1000, a in 0.0f64..2.0, d in 0.0f64..1.0) {
        let g = round(10, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_scalar(g.grid(), 8, 0, &mut rng);
        let hi = l2_norm(&lambda_pow(&f, -a, &g).unwrap(), &g);
        let lo = l2_norm(&lambda_pow(&f, -(a + d), &g).unwrap(), &g);
        prop_assert!(lo <= hi * (1.0 + 1e-8));
        prop_assert!(hi <= l2_norm(&f, &g) * (1.0 + 1e-8));
    }

    #[test]
    fn heat_semigroup_random(seed in 0u64..1000, t1 in 0.0f64..0.5, t2 in 0.0f64..0.5) {
        let g = round(10, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_scalar(g.grid(), 8, 0, &mut rng);
        let two = heat_evolve(&heat_evolve(&f, t1, &g).unwrap(), t2, &g).unwrap();
        let one = heat_evolve(&f, t1 + t2, &g).unwrap();
        prop_assert!(two.sub(&one).max_abs() < 1e-9 * (1.0 + f.max_abs()));
    }
}
