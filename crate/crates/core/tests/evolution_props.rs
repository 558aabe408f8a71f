use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use secscat::evolution::{
    dyson_sum, dyson_terms, norm_certificate, prod_integral, propagate, OperatorFamily,
};
use secscat::operator::{identity, operator_norm, random_hermitian, unitary_defect, ComplexMatrix};

/// `H₀ + H₁ cos(ωt)` with `‖H₀‖ + ‖H₁‖ ≤ 2`.
fn smooth_family(n: usize, seed: u64) -> OperatorFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h0 = random_hermitian(n, rng.gen_range(0.0..1.5), &mut rng).into_matrix();
    let h1 = random_hermitian(n, rng.gen_range(0.0..0.5), &mut rng).into_matrix();
    let omega = rng.gen_range(0.2..3.0);
    OperatorFamily::with_breakpoints(n, vec![], move |t| &h0 + &h1 * Complex64::new((omega * t).cos(), 0.0))
}

fn diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    operator_norm(&(a - b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cocycle(n in 1usize..=6, seed in any::<u64>(), tau in -3.0f64..0.0, a in 0.0f64..1.0, len in 0.1f64..4.0, eps in -1.0f64..1.0) {
        let v = smooth_family(n, seed);
        let t = tau + len;
        let s = tau + a * len;
        let whole = propagate(&v, tau, t, eps, 1e-11).unwrap();
        let first = propagate(&v, tau, s, eps, 1e-11).unwrap();
        let second = propagate(&v, s, t, eps, 1e-11).unwrap();
        let composed = second.value.matrix() * first.value.matrix();
        prop_assert!(diff(whole.value.matrix(), &composed) <= 1e-9);
        prop_assert!(diff(&(whole.value.matrix().adjoint() * whole.value.matrix()), &identity(n)) <= 1e-10);
    }

    #[test]
    fn both_differential_relations(n in 1usize..=5, seed in any::<u64>(), tau in -2.0f64..0.0, len in 0.5f64..3.0, eps in -1.0f64..1.0) {
        let v = smooth_family(n, seed);
        let t = tau + len;
        let tol = 1e-8;
        let h = 1e-4;
        let s = propagate(&v, tau, t, eps, tol).unwrap().value.into_matrix();
        let short = |a: f64, b: f64| propagate(&v, a, b, eps, 1e-13).unwrap().value.into_matrix();
        let i_eps = Complex64::new(0.0, eps);

        let dt = (short(t, t + h) - short(t - h, t).adjoint()) * Complex64::new(1.0 / (2.0 * h), 0.0) * &s;
        let expected = v.eval(t) * &s * (-i_eps);
        prop_assert!(diff(&dt, &expected) <= 10.0 * tol);

        let dtau = &s * (short(tau, tau + h).adjoint() - short(tau - h, tau)) * Complex64::new(1.0 / (2.0 * h), 0.0);
        let expected = &s * v.eval(tau) * i_eps;
        prop_assert!(diff(&dtau, &expected) <= 10.0 * tol);
    }

    #[test]
    fn dyson_within_remainder(n in 1usize..=5, seed in any::<u64>(), tau in -2.0f64..0.0, len in 0.2f64..3.0, frac in -1.0f64..1.0) {
        let v = smooth_family(n, seed);
        let t = tau + len;
        let expansion = dyson_terms(&v, tau, t, 12).unwrap();
        let eps = frac * expansion.radius_estimate;
        let d = dyson_sum(&v, tau, t, eps, 12).unwrap();
        let s = propagate(&v, tau, t, eps, 1e-13).unwrap();
        let numeric = d.expansion.quadrature_error + s.error_estimate + 64.0 * f64::EPSILON;
        prop_assert!(diff(&d.value, s.value.matrix()) <= d.remainder_bound + numeric);
    }

    #[test]
    fn dyson_terms_bounded(n in 1usize..=5, seed in any::<u64>(), tau in -2.0f64..0.0, len in 0.2f64..3.0) {
        let v = smooth_family(n, seed);
        let t = tau + len;
        let e = dyson_terms(&v, tau, t, 12).unwrap();
        let mut bound = 1.0;
        for (p, term) in e.terms.iter().enumerate() {
            if p > 0 {
                bound *= e.sup_norm * len / p as f64;
            }
            prop_assert!(operator_norm(term) <= bound + 1e-9, "p={}", p);
        }
    }

    #[test]
    fn product_integral_within_certificate(n in 1usize..=6, seed in any::<u64>(), tau in -2.0f64..1.0, len in 0.1f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a0 = ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let a1 = ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let f = OperatorFamily::new(n, move |t| &a0 + &a1 * Complex64::new(t.sin(), 0.0));
        let p = prod_integral(&f, tau, tau + len, 1e-11).unwrap();
        prop_assert!(operator_norm(&p.value) <= norm_certificate(&f, tau, tau + len).unwrap() + 1e-9);
    }

    #[test]
    fn propagator_is_unitary_for_long_spans(n in 1usize..=6, seed in any::<u64>(), len in 1.0f64..40.0, eps in -1.0f64..1.0) {
        let v = smooth_family(n, seed);
        let s = propagate(&v, -len / 2.0, len / 2.0, eps, 1e-9).unwrap();
        prop_assert!(unitary_defect(s.value.matrix()) <= 1e-10);
    }
}
