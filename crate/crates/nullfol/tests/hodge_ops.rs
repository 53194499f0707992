use nullfol::hodge_ops::{
    apply, conformal_killing_basis, d1, d1_star, d2, d2_star, identity_residual, invert, laplace_inverse, HodgeField,
    HodgeKind, Identity, IdentityInputs,
};
use nullfol::sphere_core::calculus::{grad, hodge_dual, l2_inner, l2_norm, laplacian, mean, traceless_part};
use nullfol::sphere_core::harmonics::{gradient_harmonic, harmonic, random_one_form, random_scalar, random_stt};
use nullfol::sphere_core::{make_grid, LeafField, MetricField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn round(l: usize) -> MetricField {
    MetricField::round(make_grid(l).unwrap(), 1.0).unwrap()
}

fn perturbed(l: usize, eps: f64, seed: u64) -> MetricField {
    MetricField::perturbed(make_grid(l).unwrap(), 1.0, eps, 3, seed).unwrap()
}

fn inputs(g: &MetricField, seed: u64, band: usize) -> IdentityInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = g.grid();
    IdentityInputs {
        scalar: random_scalar(grid, band, 1, &mut rng),
        one_form: random_one_form(grid, band, &mut rng),
        stt: traceless_part(&random_stt(grid, band, &mut rng), g),
        pair: (random_scalar(grid, band, 1, &mut rng), random_scalar(grid, band, 1, &mut rng)),
    }
}

#[test]
fn d1_of_gradient_is_laplacian() {
    let g = round(12);
    let y = harmonic(g.grid(), 2, 0);
    let (a, b) = d1(&grad(&y, &g), &g).unwrap();
    assert!(a.add(&y.scale(6.0)).max_abs() < 1e-10);
    assert!(b.max_abs() < 1e-10);
}

#[test]
fn d1_star_kills_constants() {
    let g = perturbed(12, 0.05, 1);
    let n = g.n_nodes();
    let f = d1_star(&LeafField::constant(2.0, n), &LeafField::constant(-3.0, n), &g).unwrap();
    assert!(f.max_abs() < 1e-12);
}

#[test]
fn d2_star_kills_round_conformal_killing_fields() {
    let g = round(12);
    for m in -1..=1 {
        let v = gradient_harmonic(g.grid(), 1, m);
        assert!(d2_star(&v, &g).unwrap().max_abs() < 1e-9);
        let w = hodge_dual(&v, &g).unwrap();
        assert!(d2_star(&w, &g).unwrap().max_abs() < 1e-9);
    }
}

#[test]
fn wrong_operand_shape_is_invalid() {
    let g = round(8);
    let y = harmonic(g.grid(), 2, 0);
    assert!(apply(HodgeKind::D1, &HodgeField::Single(y.clone()), &g).is_err());
    assert!(apply(HodgeKind::D1Star, &HodgeField::Single(y.clone()), &g).is_err());
    assert!(d2(&y, &g).is_err());
}

#[test]
fn invert_d1_on_single_mode() {
    let g = round(12);
    let y = harmonic(g.grid(), 2, 0);
    let zero = LeafField::zeros(y.rank(), y.n_nodes());
    let u = invert(HodgeKind::D1, &HodgeField::Pair(y.clone(), zero), &g).unwrap();
    let expect = grad(&y, &g).scale(-1.0 / 6.0);
    assert!(u.single().unwrap().sub(&expect).max_abs() < 1e-9);
}

#[test]
fn laplace_inverse_examples() {
    let g = round(12);
    let y = harmonic(g.grid(), 3, 1);
    let u = laplace_inverse(&y, &g).unwrap();
    assert!(u.sub(&y.scale(1.0 / 12.0)).max_abs() < 1e-10);
    let c = LeafField::constant(5.0, g.n_nodes());
    assert!(laplace_inverse(&c, &g).unwrap().max_abs() < 1e-12);
}

#[test]
fn laplace_inverse_on_perturbed_metric() {
    let g = perturbed(32, 0.05, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = random_scalar(g.grid(), 6, 0, &mut rng);
    let u = laplace_inverse(&f, &g).unwrap();
    let m = mean(&f, &g);
    let res = laplacian(&u, &g).scale(-1.0).sub(&f.map(|v| v - m));
    let rel = l2_norm(&res, &g) / l2_norm(&f, &g);
    assert!(rel < 1e-8, "{rel}");
    assert!(mean(&u, &g).abs() < 1e-12);
}

fn round_trip(kind: HodgeKind, g: &MetricField, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = g.grid();
    let f = match kind {
        HodgeKind::D1 => HodgeField::Pair(random_scalar(grid, 6, 0, &mut rng), random_scalar(grid, 6, 0, &mut rng)),
        HodgeKind::D2 => HodgeField::Single(random_one_form(grid, 6, &mut rng)),
        HodgeKind::D1Star => HodgeField::Single(random_one_form(grid, 6, &mut rng)),
        HodgeKind::D2Star => HodgeField::Single(traceless_part(&random_stt(grid, 6, &mut rng), g)),
    };
    let u = invert(kind, &f, g).unwrap();
    let back = apply(kind, &u, g).unwrap();
    let target = nullfol::hodge_ops::project_range(kind, &f, g).unwrap();
    back.sub(&target).l2(g) / target.l2(g)
}

#[test]
fn invert_is_right_inverse_on_range() {
    for kind in [HodgeKind::D1, HodgeKind::D2, HodgeKind::D1Star, HodgeKind::D2Star] {
        let r = round_trip(kind, &round(12), 7);
        assert!(r < 1e-9, "{kind:?} round {r}");
        let r = round_trip(kind, &perturbed(32, 0.05, 2), 7);
        assert!(r < 1e-8, "{kind:?} perturbed {r}");
    }
}

#[test]
fn invert_d2_star_recovers_field_off_kernel() {
    for g in [round(12), perturbed(32, 0.05, 6)] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w0 = random_one_form(g.grid(), 6, &mut rng);
        let w = nullfol::hodge_ops::project_off_conformal_killing(&w0, &g).unwrap();
        let z = d2_star(&w, &g).unwrap();
        let back = invert(HodgeKind::D2Star, &HodgeField::Single(z), &g).unwrap();
        let err = l2_norm(&back.single().unwrap().sub(&w), &g) / l2_norm(&w, &g);
        assert!(err < 1e-8, "{err}");
    }
}

#[test]
fn conformal_killing_basis_is_orthonormal_kernel() {
    let g = perturbed(32, 0.05, 8);
    let basis = conformal_killing_basis(&g).unwrap();
    assert_eq!(basis.len(), 6);
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((l2_inner(a, b, &g) - e).abs() < 1e-10);
        }
        assert!(l2_norm(&d2_star(a, &g).unwrap(), &g) < 1e-8);
    }
}

#[test]
fn adjointness_of_hodge_pairs() {
    for g in [round(12), perturbed(24, 0.05, 4)] {
        let inp = inputs(&g, 11, 6);
        let (a, b) = d1(&inp.one_form, &g).unwrap();
        let lhs = l2_inner(&a, &inp.pair.0, &g) + l2_inner(&b, &inp.pair.1, &g);
        let rhs = l2_inner(&inp.one_form, &d1_star(&inp.pair.0, &inp.pair.1, &g).unwrap(), &g);
        assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()), "{lhs} {rhs}");
        let lhs = l2_inner(&d2(&inp.stt, &g).unwrap(), &inp.one_form, &g);
        let rhs = l2_inner(&inp.stt, &d2_star(&inp.one_form, &g).unwrap(), &g);
        assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()), "{lhs} {rhs}");
    }
}

#[test]
fn named_identity_examples() {
    let g = round(12);
    let y20 = harmonic(g.grid(), 2, 0);
    let mut inp = inputs(&g, 1, 6);
    inp.one_form = grad(&y20, &g);
    assert!(identity_residual(Identity::Dcal1, &inp, &g).unwrap() < 1e-9);
    inp.pair = (harmonic(g.grid(), 1, 0), harmonic(g.grid(), 2, 1));
    assert!(identity_residual(Identity::HodgeIII, &inp, &g).unwrap() < 1e-9);
    inp.scalar = harmonic(g.grid(), 3, 0).add(&harmonic(g.grid(), 4, 4).scale(0.2));
    assert!(identity_residual(Identity::BochnerScalar, &inp, &g).unwrap() < 1e-8);
}

#[test]
fn all_identities_round_and_perturbed() {
    let g = round(12);
    let inp = inputs(&g, 2, 6);
    for id in Identity::ALL {
        let r = identity_residual(id, &inp, &g).unwrap();
        assert!(r < 1e-8, "{} round {r}", id.name());
    }
    let g = perturbed(24, 0.05, 9);
    let inp = inputs(&g, 2, 6);
    for id in Identity::ALL {
        let r = identity_residual(id, &inp, &g).unwrap();
        assert!(r < 1e-6, "{} perturbed {r}", id.name());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn d1_range_projection_is_idempotent(seed in 0u64..500) {
        let g = perturbed(12, 0.03, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = HodgeField::Pair(random_scalar(g.grid(), 5, 0, &mut rng), random_scalar(g.grid(), 5, 0, &mut rng));
        let p1 = nullfol::hodge_ops::project_range(HodgeKind::D1, &f, &g).unwrap();
        let p2 = nullfol::hodge_ops::project_range(HodgeKind::D1, &p1, &g).unwrap();
        prop_assert!(p2.sub(&p1).max_abs() < 1e-12);
    }

    #[test]
    fn laplace_inverse_matches_spectral_factor(l in 1usize..10, m in -9i64..10) {
        prop_assume!(m.unsigned_abs() as usize <= l);
        let g = round(12);
        let y = harmonic(g.grid(), l, m);
        let u = laplace_inverse(&y, &g).unwrap();
        let lam = (l * (l + 1)) as f64;
        prop_assert!(u.sub(&y.scale(1.0 / lam)).max_abs() < 1e-10);
    }
}
