use std::sync::Arc;

use nullfol::hodge_ops::laplace_inverse;
use nullfol::minkowski_oracle::{caustic_time, exact_state, MinkowskiData};
use nullfol::null_evolution::*;
use nullfol::sphere_core::calculus::{dot, grad, laplacian, mean, norm_sq, sup_norm};
use nullfol::sphere_core::harmonics::{harmonic, random_one_form, random_scalar, tensor_harmonic};
use nullfol::sphere_core::{make_grid, LeafField, MetricField, Rank, SphereGrid};
use nullfol::NullfolError;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(l: usize) -> Arc<SphereGrid> {
    make_grid(l).unwrap()
}

fn run(st: &FoliationState, s_end: f64, h: f64) -> Evolution {
    evolve(st, &CurvatureInput::zero(), s_end, &EvolveParams::with_step(h)).unwrap()
}

fn std_dev(f: &LeafField, g: &MetricField) -> f64 {
    let m = mean(f, g);
    mean(&f.map(|x| (x - m) * (x - m)), g).sqrt()
}

#[test]
fn round_cone_expands_linearly() {
    let st = FoliationState::minkowski_round(grid(8), 1.0).unwrap();
    let ev = run(&st, 1.0, 1e-2);
    assert_eq!(ev.termination, Termination::Completed);
    assert_eq!(ev.last().s, 1.0);
    for leaf in &ev.history {
        let s = leaf.s;
        assert!(leaf.trchi.map(|t| t - 2.0 / (1.0 + s)).max_abs() < 1e-8);
        assert!((leaf.r - (1.0 + s)).abs() < 1e-8);
        assert!((leaf.r - leaf.gamma.area_radius()).abs() < 1e-10);
        assert!(leaf.v.map(|v| v - (1.0 + s).powi(2)).max_abs() < 1e-8);
    }
    assert!(ev.history[0].v.values().iter().all(|v| *v == 1.0));
}

#[test]
fn homogeneous_runs_match_closed_form() {
    for (tr, sh) in [(2.0, 0.0), (2.0, 1.0), (1.0, 0.5), (0.0, 2f64.sqrt())] {
        let d = MinkowskiData::new(tr, sh).unwrap();
        let s_end = caustic_time(&d).map_or(1.0, |s0| (0.9 * s0).min(1.0));
        let st = FoliationState::minkowski_homogeneous(grid(6), &d).unwrap();
        let ev = run(&st, s_end, 1e-3);
        for leaf in ev.history.iter().step_by(37) {
            let e = exact_state(&d, leaf.s).unwrap();
            assert!(leaf.trchi.map(|t| t - e.trchi).max_abs() < 1e-8, "trχ ({tr}, {sh}) at {}", leaf.s);
            let shear = sup_norm(&leaf.chih, &leaf.gamma);
            assert!((shear - e.chih_norm).abs() < 1e-8, "|χ̂| ({tr}, {sh}) at {}", leaf.s);
            assert!(leaf.v.map(|v| v - e.delta).max_abs() < 1e-8);
        }
    }
}

#[test]
fn anisotropic_data_focuses_at_unit_time() {
    let d = MinkowskiData::new(0.0, 2f64.sqrt()).unwrap();
    let st = FoliationState::minkowski_homogeneous(grid(4), &d).unwrap();
    let ev = run(&st, 2.0, 1e-2);
    let Termination::Caustic { s } = ev.termination else { panic!("no caustic: {:?}", ev.termination) };
    assert!((s - 1.0).abs() < 1e-4, "{s}");
    assert!(ev.last().trchi.max_abs() > 1e6);
}

#[test]
fn rk4_is_fourth_order() {
    let d = MinkowskiData::new(2.0, 1.0).unwrap();
    let st = FoliationState::minkowski_homogeneous(grid(4), &d).unwrap();
    let exact = exact_state(&d, 1.0).unwrap().trchi;
    let err = |h: f64| {
        let p = EvolveParams { h, tol: 1.0, ..EvolveParams::default() };
        let ev = evolve(&st, &CurvatureInput::zero(), 1.0, &p).unwrap();
        assert_eq!(ev.rejected, 0);
        ev.last().trchi.map(|t| t - exact).max_abs()
    };
    // Coarser steps trip the trχ·h step limiter and stop being uniform.
    let ratio = err(0.02) / err(0.01);
    assert!((ratio - 16.0).abs() < 0.2 * 16.0, "{ratio}");
}

#[test]
fn evolve_rejects_bad_input_and_reports_stalls() {
    let st = FoliationState::minkowski_round(grid(4), 1.0).unwrap();
    let zero = CurvatureInput::zero();
    assert!(matches!(evolve(&st, &zero, 1.0, &EvolveParams::with_step(0.0)), Err(NullfolError::InvalidArgument(_))));
    assert!(matches!(evolve(&st, &zero, -1.0, &EvolveParams::default()), Err(NullfolError::InvalidArgument(_))));
    let d = MinkowskiData::new(2.0, 1.0).unwrap();
    let st = FoliationState::minkowski_homogeneous(grid(4), &d).unwrap();
    let p = EvolveParams { tol: 1e-300, max_halvings: 3, ..EvolveParams::default() };
    assert!(matches!(evolve(&st, &zero, 1.0, &p), Err(NullfolError::NumericFailure { .. })));
}

#[test]
fn record_stride_thins_history() {
    let st = FoliationState::minkowski_round(grid(4), 1.0).unwrap();
    let p = EvolveParams { h: 0.01, record_stride: 10, ..EvolveParams::default() };
    let ev = evolve(&st, &CurvatureInput::zero(), 1.0, &p).unwrap();
    assert_eq!(ev.accepted, 100);
    assert_eq!(ev.history.len(), 11);
    assert_eq!(ev.last().s, 1.0);
}

#[test]
fn volume_and_area_laws() {
    for st in [
        FoliationState::minkowski_round(grid(8), 1.0).unwrap(),
        FoliationState::perturbed(grid(12), 1.0, 0.05, 3, 4).unwrap(),
    ] {
        let ev = run(&st, 0.5, 5e-3);
        assert!(volume_law_residual(&ev.history).unwrap() < 1e-8);
        assert!(area_law_residual(&ev.history).unwrap() < 1e-8);
        let trchi: Vec<LeafField> = ev.history.iter().map(|l| l.trchi.clone()).collect();
        assert!(average_identity_residual(&ev.history, &trchi).unwrap() < 1e-8);
    }
}

#[test]
fn round_run_has_vanishing_residuals() {
    let st = FoliationState::minkowski_round(grid(8), 1.0).unwrap();
    let ev = run(&st, 1.0, 0.05);
    for leaf in &ev.history {
        let r = residuals(leaf, &CurvatureInput::zero()).unwrap();
        assert!(r.max() < 1e-8, "{r:?}");
    }
}

#[test]
fn embeddable_perturbed_run_keeps_constraints() {
    let st = FoliationState::perturbed(grid(16), 1.0, 0.02, 3, 11).unwrap();
    assert!(st.zeta.max_abs() > 1e-3);
    let zero = CurvatureInput::zero();
    let ev = evolve(&st, &zero, 0.5, &EvolveParams { h: 0.05, ..EvolveParams::default() }).unwrap();
    for leaf in &ev.history {
        let r = residuals(leaf, &zero).unwrap();
        assert!(r.max() < 1e-6, "s = {}: {r:?}", leaf.s);
        assert!(r.bianchi_consistent(1e-10));
    }
}

#[test]
fn synthetic_curvature_violating_bianchi_is_flagged() {
    let g = grid(8);
    let st = FoliationState::minkowski_round(g.clone(), 1.0).unwrap();
    let curv = CurvatureInput::synthetic(&g, 3, 1.0, 5).unwrap();
    let r = residuals(&st, &curv).unwrap();
    assert!(r.bianchi_rho > 0.1, "{r:?}");
    assert!(!r.bianchi_consistent(1e-6));
}

#[test]
fn homogeneous_shear_is_singular_at_the_poles() {
    let d = MinkowskiData::new(0.0, 2f64.sqrt()).unwrap();
    let st = FoliationState::minkowski_homogeneous(grid(12), &d).unwrap();
    assert!(sup_norm(&st.chih, &st.gamma) > 0.1);
    let r = residuals(&st, &CurvatureInput::zero()).unwrap();
    assert!(r.codazzi_chih.is_finite());
    // `div χ̂ = √2 n cotθ e_θ` for the frame-aligned shear; its L² norm diverges.
    assert!(r.codazzi_chih > 1.0, "{r:?}");
    assert!(r.curl_zeta < 1e-12 && r.codazzi_chibh < 1e-12);
}

#[test]
fn renormalized_curvature_definitions_hold() {
    let g = grid(8);
    let st = FoliationState::perturbed(g.clone(), 1.0, 0.05, 3, 2).unwrap();
    let mut st = st;
    st.chibh = tensor_harmonic(&g, 2, 1).scale(0.3);
    st.chibh = nullfol::sphere_core::calculus::traceless_part(&st.chibh, &st.gamma);
    let curv = CurvatureInput::synthetic(&g, 3, 0.2, 8).unwrap();
    let c = curv.sample(0.0, &st.gamma);
    let ren = RenormalizedCurvature::new(&st, &c);
    let chih_chibh = dot(&st.chih, &st.chibh, &st.gamma);
    assert!(ren.rho_check.add(&chih_chibh.scale(0.5)).sub(&c.rho).max_abs() < 1e-12);
    let zero = CurvatureInput::zero().sample(0.3, &st.gamma);
    assert!(zero.alpha.is_zero() && zero.beta.is_zero() && zero.rho.is_zero() && zero.sigma.is_zero() && zero.betab.is_zero());
}

#[test]
fn mass_aspect_examples() {
    let g = grid(12);
    let st = FoliationState::minkowski_round(g.clone(), 1.0).unwrap();
    let zero = CurvatureSample::zero(st.n_nodes());
    let m = mass_aspect(&st, &zero);
    assert!(m.mu_tilde.max_abs() < 1e-14 && m.mu.max_abs() < 1e-14);

    let mut st = st;
    let y = harmonic(&g, 2, 0);
    st.zeta = grad(&y, &st.gamma);
    let m = mass_aspect(&st, &zero);
    assert!(m.mu_tilde.sub(&y.scale(6.0)).max_abs() < 1e-10);
    assert!(m.mu.sub(&m.mu_tilde).sub(&norm_sq(&st.zeta, &st.gamma)).max_abs() < 1e-14);
}

#[test]
fn frame_rescale_identities() {
    let g = grid(16);
    let st = FoliationState::perturbed(g.clone(), 1.0, 0.05, 3, 3).unwrap();
    let same = frame_rescale(&st, &LeafField::constant(1.0, st.n_nodes())).unwrap();
    assert_eq!(same.trchi, st.trchi);
    assert_eq!(same.zeta, st.zeta);

    let log_w = harmonic(&g, 2, 0).scale(0.1);
    let w = log_w.map(f64::exp);
    let rs = frame_rescale(&st, &w).unwrap();
    let gm = &st.gamma;
    let before = grad(&st.trchi, gm).add(&st.zeta.mul_scalar(&st.trchi)).mul_scalar(&w);
    let after = grad(&rs.trchi, gm).add(&rs.zeta.mul_scalar(&rs.trchi));
    assert!(after.sub(&before).max_abs() < 1e-9);

    let zero = CurvatureSample::zero(st.n_nodes());
    let shift = mass_aspect(&rs, &zero).mu_tilde.sub(&mass_aspect(&st, &zero).mu_tilde).sub(&laplacian(&log_w, gm));
    assert!(shift.max_abs() < 1e-8);

    let bad = w.map(|x| x - 2.0);
    assert!(matches!(frame_rescale(&st, &bad), Err(NullfolError::InvalidArgument(_))));
}

#[test]
fn frame_rescale_composes() {
    let g = grid(12);
    let st = FoliationState::perturbed(g.clone(), 1.0, 0.05, 3, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w1 = random_scalar(&g, 3, 0, &mut rng).map(|x| (0.1 * x).exp());
    let w2 = random_scalar(&g, 3, 0, &mut rng).map(|x| (0.1 * x).exp());
    let two = frame_rescale(&frame_rescale(&st, &w2).unwrap(), &w1).unwrap();
    let one = frame_rescale(&st, &w1.mul_scalar(&w2)).unwrap();
    for (a, b) in [(&two.trchi, &one.trchi), (&two.chih, &one.chih), (&two.zeta, &one.zeta), (&two.trchib, &one.trchib), (&two.chibh, &one.chibh)] {
        assert!(a.sub(b).max_abs() < 1e-12);
    }
}

#[test]
fn normalize_mass_aspect_flattens() {
    let g = grid(12);
    let st = FoliationState::minkowski_round(g.clone(), 1.0).unwrap();
    let zero = CurvatureSample::zero(st.n_nodes());
    let w = normalize_mass_aspect(&st, &zero).unwrap();
    assert!(w.map(|x| x - 1.0).max_abs() < 1e-14);

    // μ̃ = Y₂₀ + c: the flattening factor has log ω = Y₂₀/6.
    let mut st = st;
    let y = harmonic(&g, 2, 0);
    st.zeta = grad(&y, &st.gamma).scale(1.0 / 6.0);
    let mut curv = zero.clone();
    curv.rho = LeafField::constant(-0.7, st.n_nodes());
    let w = normalize_mass_aspect(&st, &curv).unwrap();
    assert!(w.map(f64::ln).sub(&y.scale(1.0 / 6.0)).max_abs() < 1e-10);

    let g = grid(16);
    let st = FoliationState::perturbed(g.clone(), 1.0, 0.05, 3, 9).unwrap();
    let zero = CurvatureSample::zero(st.n_nodes());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut st = st;
    st.zeta = st.zeta.add(&random_one_form(&g, 4, &mut rng).scale(0.1));
    let before = mass_aspect(&st, &zero).mu_tilde;
    let w = normalize_mass_aspect(&st, &zero).unwrap();
    let after = mass_aspect(&frame_rescale(&st, &w).unwrap(), &zero).mu_tilde;
    let ratio = std_dev(&after, &st.gamma) / std_dev(&before, &st.gamma);
    assert!(ratio < 1e-6, "{ratio}");
}

fn frame_quantities(g: &Arc<SphereGrid>, metric: &MetricField, seed: u64) -> FrameQuantities {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = tensor_harmonic(g, 3, 1).add(&tensor_harmonic(g, 2, 0)).with_rank(Rank::Tensor(2));
    let chi = chi.add(&nullfol::sphere_core::calculus::times_metric(&LeafField::constant(1.0, g.n_nodes()), metric));
    FrameQuantities {
        chi,
        alpha: nullfol::sphere_core::calculus::traceless_part(&tensor_harmonic(g, 4, -2), metric),
        zeta: random_one_form(g, 4, &mut rng),
        beta: random_one_form(g, 4, &mut rng),
        rho: random_scalar(g, 4, 0, &mut rng),
        sigma: random_scalar(g, 4, 0, &mut rng),
    }
}

#[test]
fn foliation_transform_examples() {
    let g = grid(10);
    let metric = MetricField::perturbed(g.clone(), 1.0, 0.05, 3, 1).unwrap();
    let q = frame_quantities(&g, &metric, 2);
    let n = g.n_nodes();
    let one = LeafField::constant(1.3, n);
    let same = foliation_transform(&q, &LeafField::zeros(Rank::OneForm, n), &one, &metric).unwrap();
    assert_eq!(same, q);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dv = random_one_form(&g, 3, &mut rng);
    let omega = random_scalar(&g, 3, 0, &mut rng).map(|x| 1.5 + 0.3 * x);
    let t = foliation_transform(&q, &dv, &omega, &metric).unwrap();
    assert!(t.chi.values().iter().zip(q.chi.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(t.alpha.values().iter().zip(q.alpha.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(t.zeta.sub(&q.zeta).max_abs() > 1e-3);

    let back = foliation_transform(&t, &dv.scale(-1.0), &omega, &metric).unwrap();
    for (a, b) in [(&back.zeta, &q.zeta), (&back.beta, &q.beta), (&back.rho, &q.rho), (&back.sigma, &q.sigma)] {
        assert!(a.sub(b).max_abs() < 1e-12);
    }
    assert!(matches!(
        foliation_transform(&q, &dv, &omega.scale(-1.0), &metric),
        Err(NullfolError::InvalidArgument(_))
    ));
}

#[test]
fn transport_solve_examples() {
    let g = grid(8);
    let st = FoliationState::minkowski_round(g.clone(), 1.0).unwrap();
    let ev = run(&st, 1.0, 5e-3);
    let s = ev.s_grid();
    let kappa: Vec<LeafField> = ev.history.iter().map(|l| l.trchi.clone()).collect();
    let f0 = harmonic(&g, 3, 2).add(&LeafField::constant(0.5, g.n_nodes()));
    let zeros = vec![LeafField::zeros(Rank::Scalar, g.n_nodes()); s.len()];

    let sol = transport_solve(0.0, &s, &kappa, &f0, &zeros).unwrap();
    assert!(sol.values.iter().all(|f| f.sub(&f0).max_abs() < 1e-14));

    let sol = transport_solve(1.0, &s, &kappa, &f0, &zeros).unwrap();
    for (si, f) in s.iter().zip(&sol.values) {
        assert!(f.sub(&f0.scale((1.0 + si).powi(-2))).max_abs() < 1e-8);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = random_scalar(&g, 4, 0, &mut rng);
    let b = random_scalar(&g, 4, 0, &mut rng);
    let gs: Vec<LeafField> = s.iter().map(|si| a.scale((3.0 * si).sin()).add(&b.scale(si * si))).collect();
    let sol = transport_solve(1.5, &s, &kappa, &f0, &gs).unwrap();
    assert!(sol.discrepancy < 1e-8, "{}", sol.discrepancy);
    assert!(transport_solve(1.0, &s[..1], &kappa[..1], &f0, &zeros[..1]).is_err());
}

#[test]
fn average_split_reproduces_trchi() {
    let st = FoliationState::minkowski_round(grid(6), 1.0).unwrap();
    let sp = average_split(&run(&st, 1.0, 0.05).history).unwrap();
    assert!(sp.w.iter().all(|w| w.abs() < 1e-12));
    assert!(sp.v.iter().all(|v| v.max_abs() < 1e-12));

    let d = MinkowskiData::new(0.0, 2f64.sqrt()).unwrap();
    let st = FoliationState::minkowski_homogeneous(grid(6), &d).unwrap();
    let sp = average_split(&run(&st, 0.5, 1e-2).history).unwrap();
    assert!(sp.max_residual() < 1e-7, "{}", sp.max_residual());

    let st = FoliationState::perturbed(grid(12), 1.0, 0.05, 3, 5).unwrap();
    let sp = average_split(&run(&st, 0.5, 1e-2).history).unwrap();
    assert!(sp.v[0].max_abs() > 1e-3);
    assert!(sp.max_residual() < 1e-7, "{}", sp.max_residual());
}

#[test]
fn commutation_on_round_cone() {
    let g = grid(8);
    let st = FoliationState::minkowski_round(g.clone(), 1.0).unwrap();
    let ev = run(&st, 1.0, 5e-3);
    let zero = CurvatureInput::zero();
    let y = harmonic(&g, 2, 0);
    let fields: Vec<LeafField> = ev.history.iter().map(|l| y.scale(1.0 / (1.0 + l.s))).collect();
    assert!(commutation_check(&ev.history, &zero, &fields, Commutation::ScalarGrad).unwrap() < 1e-6);
    let c = vec![LeafField::constant(3.0, g.n_nodes()); ev.history.len()];
    for which in [Commutation::ScalarGrad, Commutation::Laplacian] {
        assert!(commutation_check(&ev.history, &zero, &c, which).unwrap() < 1e-12);
    }
    // Only the three-point s-differences are inexact here.
    let lap = commutation_check(&ev.history, &zero, &fields, Commutation::Laplacian).unwrap();
    assert!(lap < 2e-3, "{lap}");
    assert!(commutation_check(&ev.history[..2], &zero, &fields[..2], Commutation::ScalarGrad).is_err());
}

fn commutation_residual(h: f64, which: Commutation) -> f64 {
    let g = grid(16);
    let st = FoliationState::perturbed(g.clone(), 1.0, 0.05, 3, 12).unwrap();
    let p = EvolveParams { h, tol: 1.0, ..EvolveParams::default() };
    let zero = CurvatureInput::zero();
    let ev = evolve(&st, &zero, 0.4, &p).unwrap();
    let y = harmonic(&g, 3, 1);
    let fields: Vec<LeafField> = match which {
        Commutation::ScalarGrad | Commutation::Laplacian => ev.history.iter().map(|l| y.scale(l.s.exp())).collect(),
        _ => {
            let f = grad(&y, &ev.history[0].gamma);
            ev.history.iter().map(|l| f.scale((2.0 * l.s).cos())).collect()
        }
    };
    commutation_check(&ev.history, &zero, &fields, which).unwrap()
}

#[test]
fn commutation_residuals_are_second_order() {
    for which in [Commutation::Laplacian, Commutation::Div, Commutation::General] {
        let (a, b) = (commutation_residual(0.02, which), commutation_residual(0.01, which));
        let ratio = a / b;
        assert!((ratio - 4.0).abs() < 0.2 * 4.0, "{} {a} {b}", which.name());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn expanding_data_never_focuses(tr in 0.2f64..3.0, frac in 0.0f64..0.95) {
        let sh = frac * tr / 2f64.sqrt();
        let d = MinkowskiData::new(tr, sh).unwrap();
        prop_assume!(caustic_time(&d).is_none());
        let st = FoliationState::minkowski_homogeneous(grid(4), &d).unwrap();
        let ev = run(&st, 5.0, 0.05);
        prop_assert_eq!(ev.termination, Termination::Completed);
        prop_assert!(ev.history.iter().all(|l| l.trchi.values().iter().all(|t| *t > 0.0)));
    }

    #[test]
    fn curvature_sampling_is_traceless_and_decays(seed in 0u64..100, s in 0.0f64..3.0) {
        let g = grid(6);
        let metric = MetricField::perturbed(g.clone(), 1.0, 0.05, 3, seed).unwrap();
        let curv = CurvatureInput::synthetic(&g, 3, 0.5, seed).unwrap();
        let c = curv.sample(s, &metric);
        let tr = nullfol::sphere_core::calculus::metric_trace(&c.alpha, &metric);
        prop_assert!(tr.max_abs() < 1e-13);
        let c0 = curv.sample(0.0, &metric);
        prop_assert!(c.rho.sub(&c0.rho.scale(1.0 / (1.0 + s))).max_abs() < 1e-14);
    }
}

#[test]
fn laplace_inverse_sign_convention() {
    // −Δu = f − mean f, which fixes the sign used by the flattening factor.
    let g = grid(8);
    let m = MetricField::round(g.clone(), 1.0).unwrap();
    let y = harmonic(&g, 2, 0);
    assert!(laplace_inverse(&y, &m).unwrap().sub(&y.scale(1.0 / 6.0)).max_abs() < 1e-12);
}
