use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use secscat::commutation::{
    build_commuting_model, deviation_axiom_residuals, intertwining_residual,
    scattering_commutation_residuals, CommutationScenario,
};
use secscat::operator::{random_hermitian, random_unitary, HermitianOperator, UnitaryOperator};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn commuting_models_satisfy_every_identity(n in 1usize..=8, seed in any::<u64>(), tau in -3.0f64..3.0) {
        let sc = build_commuting_model(n, seed).unwrap();
        let report = deviation_axiom_residuals(&sc, &[-12.0, -1.0, 0.0, 0.5, 7.0], &[tau, 1.0]).unwrap();
        prop_assert!(report.max_residual() <= 1e-11);
        let (p, m) = intertwining_residual(&sc, tau).unwrap();
        prop_assert!(p <= 1e-11 && m <= 1e-11);
        prop_assert!(scattering_commutation_residuals(&sc, tau).unwrap().max_residual() <= 1e-11);
    }

    #[test]
    fn shifted_generator_residual_is_conjugation_invariant(n in 1usize..=6, seed in any::<u64>(), tau in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a0 = random_hermitian(n, 2.0, &mut rng);
        let cp = random_hermitian(n, 1.0, &mut rng);
        let cm = random_hermitian(n, 1.0, &mut rng);
        let s = random_unitary(n, 1.5, &mut rng);
        let v = random_unitary(n, 3.0, &mut rng).into_matrix();
        let conj = |h: &HermitianOperator| HermitianOperator::with_tol(&v * h.matrix() * v.adjoint(), 1e-10).unwrap();

        let plain = CommutationScenario::new(a0.clone(), cp.clone(), cm.clone())
            .unwrap()
            .with_scattering(s.clone())
            .unwrap();
        let rotated = CommutationScenario::new(conj(&a0), conj(&cp), conj(&cm))
            .unwrap()
            .with_scattering(UnitaryOperator::with_tol(&v * s.matrix() * v.adjoint(), 1e-9).unwrap())
            .unwrap();
        let a = scattering_commutation_residuals(&plain, tau).unwrap().shifted_generators;
        let b = scattering_commutation_residuals(&rotated, tau).unwrap().shifted_generators;
        prop_assert!((a - b).abs() <= 1e-11);
    }
}
