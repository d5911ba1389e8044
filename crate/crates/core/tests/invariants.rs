//! Structural invariants checked on randomly generated bundles, states and
//! cocycles. Instances come from seeded samplers so failures shrink to a seed.

use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use fellkms::conv::{in_bundle, AlgebraModel, Section};
use fellkms::fellbundle::{validate_bundle, FellBundle};
use fellkms::groupoid::{
    check_quasi_invariant, solve_quasi_invariant, validate_groupoid, Cocycle, UnitId,
};
use fellkms::kms::{is_kms, kms_from_pair, pair_from_kms, solve_kms, Dynamics, SolveOptions};
use fellkms::linalg::{hermitian_eigenvalues, real, C64};
use fellkms::samples::{
    random_bundle, random_centralizing_state, random_complex, random_groupoid, random_kind,
    random_probability, random_section, random_state, rng, SampleRng,
};
use fellkms::states::{disintegrate, integrate, unit_space_average, StateField};

const TOL: f64 = 1e-9;

fn model(r: &mut SampleRng) -> AlgebraModel {
    let kind = random_kind(r);
    let b: FellBundle = random_bundle(r, kind, 3, 12);
    AlgebraModel::new(Arc::new(b), TOL).unwrap()
}

fn close(a: &Section, b: &Section, scale: f64) -> bool {
    a.distance(b) <= 1e-9 * scale.max(1.0)
}

fn size(f: &Section) -> f64 {
    f.iter().map(|(_, m)| m.norm()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_groupoids_satisfy_the_axioms(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_groupoid(&mut r, 30);
        prop_assert!(validate_groupoid(&g).is_empty());
        for a in g.arrows() {
            prop_assert_eq!(g.inv(g.inv(a)), a);
            prop_assert_eq!(g.compose(a, g.inv(a)), Some(g.unit_arrow(g.tgt(a))));
            prop_assert_eq!(g.compose(g.unit_arrow(g.tgt(a)), a), Some(a));
        }
    }

    #[test]
    fn random_bundles_are_fell_bundles(seed in any::<u64>()) {
        let mut r = rng(seed);
        let kind = random_kind(&mut r);
        let b = random_bundle(&mut r, kind, 3, 16);
        prop_assert!(validate_bundle(&b, TOL).is_empty());
    }

    #[test]
    fn convolution_is_associative_and_involutive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = model(&mut r);
        let f = random_section(&mut r, &m, true);
        let g = random_section(&mut r, &m, true);
        let h = random_section(&mut r, &m, true);
        let scale = size(&f) * size(&g) * size(&h);
        let left = m.convolve(&m.convolve(&f, &g), &h);
        let right = m.convolve(&f, &m.convolve(&g, &h));
        prop_assert!(close(&left, &right, scale));
        // (fg)* = g* f*, f** = f
        let lhs = m.involute(&m.convolve(&f, &g));
        let rhs = m.convolve(&m.involute(&g), &m.involute(&f));
        prop_assert!(close(&lhs, &rhs, size(&f) * size(&g)));
        prop_assert!(close(&m.involute(&m.involute(&f)), &f, size(&f)));
        prop_assert!(in_bundle(m.bundle(), &m.convolve(&f, &g), 1e-8));
        // unit is two-sided
        prop_assert!(close(&m.convolve(m.unit(), &f), &f, size(&f)));
        prop_assert!(close(&m.convolve(&f, m.unit()), &f, size(&f)));
    }

    #[test]
    fn regular_representation_is_a_star_homomorphism(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = model(&mut r);
        let f = random_section(&mut r, &m, true);
        let g = random_section(&mut r, &m, true);
        let prod = m.rep(&m.convolve(&f, &g)) - m.rep(&f) * m.rep(&g);
        prop_assert!(prod.norm() <= 1e-9 * (1.0 + size(&f) * size(&g)));
        let adj = m.rep(&m.involute(&f)) - m.rep(&f).adjoint();
        prop_assert!(adj.norm() <= 1e-9 * (1.0 + size(&f)));
        prop_assert!(m.is_faithful());
    }

    #[test]
    fn dynamics_acts_by_automorphisms(seed in any::<u64>(), s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let mut r = rng(seed);
        let m = model(&mut r);
        let g = m.bundle().groupoid();
        let potential: Vec<f64> = g.units().map(|_| r.gen_range(-1.0..1.0)).collect();
        let d = Dynamics::new(Cocycle::coboundary(g, &potential));
        prop_assert!(d.cocycle().validate(g, TOL).is_empty());
        let f = random_section(&mut r, &m, true);
        let h = random_section(&mut r, &m, true);
        let scale = size(&f) * size(&h);
        let lhs = d.sigma_t(&m.convolve(&f, &h), t);
        let rhs = m.convolve(&d.sigma_t(&f, t), &d.sigma_t(&h, t));
        prop_assert!(close(&lhs, &rhs, scale));
        prop_assert!(close(&d.sigma_t(&m.involute(&f), t), &m.involute(&d.sigma_t(&f, t)), size(&f)));
        prop_assert!(close(&d.sigma_t(&d.sigma_t(&f, s), t), &d.sigma_t(&f, s + t), size(&f)));
    }

    #[test]
    fn random_states_are_states(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = model(&mut r);
        let phi = random_state(&mut r, &m);
        prop_assert!(phi.certify(&m, TOL).is_state());
        let f = random_section(&mut r, &m, true);
        let v = phi.eval(&m.convolve(&m.involute(&f), &f));
        prop_assert!(v.re >= -1e-9 * size(&f).powi(2).max(1.0));
        prop_assert!(v.im.abs() <= 1e-9 * size(&f).powi(2).max(1.0));
        // averaging over the unit space keeps states and is idempotent
        let avg = unit_space_average(&m, &phi);
        prop_assert!(avg.certify(&m, TOL).is_state());
        prop_assert!(unit_space_average(&m, &avg).distance(&avg) <= 1e-9);
        let eig = hermitian_eigenvalues(&phi.gram(&m));
        prop_assert!(eig.first().copied().unwrap_or(0.0) >= -1e-9);
    }

    #[test]
    fn disintegration_inverts_integration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = model(&mut r);
        let g = m.bundle().groupoid();
        let units: Vec<UnitId> = g.units().collect();
        let mu = random_probability(&mut r, g, &units);
        let field = StateField::from_states(mu.support(TOL).into_iter().map(|x| {
            let iso = m.isotropy(x);
            (x, random_centralizing_state(&mut r, &iso.model))
        }));
        let phi = integrate(&m, &mu, &field, TOL).unwrap();
        prop_assert!(phi.certify(&m, TOL).is_state());
        let d = disintegrate(&m, &phi, TOL).unwrap();
        prop_assert!(d.mu.max_deviation(&mu) <= 1e-9);
        prop_assert!(d.field.distance_on(&field, &mu.support(TOL)) <= 1e-9);
        let again = integrate(&m, &d.mu, &d.field, TOL).unwrap();
        prop_assert!(again.distance(&phi) <= 1e-9);
    }

    #[test]
    fn solver_output_is_kms_and_quasi_invariant(seed in any::<u64>(), beta in -2.0f64..2.0) {
        let mut r = rng(seed);
        let m = model(&mut r);
        let g = m.bundle().groupoid();
        let potential: Vec<f64> = g.units().map(|_| r.gen_range(-1.0..1.0)).collect();
        let c = Cocycle::coboundary(g, &potential);
        let qi = solve_quasi_invariant(g, &c, beta, TOL);
        for mu in &qi.extreme_points {
            prop_assert!(mu.is_probability(TOL));
            prop_assert!(check_quasi_invariant(g, mu, &c.modular(beta), TOL).holds);
        }
        let d = Dynamics::new(c);
        let sol = solve_kms(&m, &d, beta, SolveOptions::default());
        for cand in &sol.candidates {
            prop_assert!(is_kms(&m, &cand.state, &d, beta, TOL).pass);
            let (phi, cert) = kms_from_pair(&m, &cand.mu, &cand.field, &d, beta, TOL).unwrap();
            prop_assert!(cert.pass);
            prop_assert!(phi.distance(&cand.state) <= 1e-9);
            let back = pair_from_kms(&m, &phi, &d, beta, TOL).unwrap();
            prop_assert!(back.disintegration.mu.max_deviation(&cand.mu) <= 1e-9);
        }
    }

    #[test]
    fn states_are_linear_in_sections(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = model(&mut r);
        let phi = random_state(&mut r, &m);
        let f = random_section(&mut r, &m, true);
        let h = random_section(&mut r, &m, false);
        let k: C64 = random_complex(&mut r);
        let lhs = phi.eval(&f.scale(k).add(&h));
        let rhs = k * phi.eval(&f) + phi.eval(&h);
        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + size(&f) + size(&h)));
        prop_assert!((phi.eval(m.unit()) - real(1.0)).norm() <= 1e-9);
    }
}
