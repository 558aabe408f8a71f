use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use secscat::operator::{
    matexp_skew, operator_norm, random_hermitian, validate, ComplexMatrix, OperatorKind,
};

fn hermitian(n: usize, norm: f64, seed: u64) -> secscat::operator::HermitianOperator {
    random_hermitian(n, norm, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_is_a_group(n in 1usize..=8, seed in any::<u64>(), norm in 0.0f64..5.0, s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let h = hermitian(n, norm, seed);
        let lhs = matexp_skew(&h, s).unwrap().into_matrix() * matexp_skew(&h, t).unwrap().into_matrix();
        let rhs = matexp_skew(&h, s + t).unwrap().into_matrix();
        prop_assert!(operator_norm(&(lhs - rhs)) <= 1e-11);
    }

    #[test]
    fn adjoint_reverses_time(n in 1usize..=8, seed in any::<u64>(), norm in 0.0f64..10.0, s in -3.0f64..3.0) {
        let h = hermitian(n, norm, seed);
        let fwd = matexp_skew(&h, s).unwrap().into_matrix().adjoint();
        let back = matexp_skew(&h, -s).unwrap().into_matrix();
        prop_assert!(operator_norm(&(fwd - back)) <= 1e-12);
    }

    #[test]
    fn exponential_is_unitary(n in 1usize..=8, seed in any::<u64>(), norm in 0.0f64..100.0, s in -1.0f64..1.0) {
        let u = matexp_skew(&hermitian(n, norm, seed), s).unwrap();
        prop_assert!(validate(u.matrix(), OperatorKind::Unitary, 1e-10).unwrap());
    }

    #[test]
    fn norm_is_submultiplicative(n in 1usize..=8, entries in prop::collection::vec(-3.0f64..3.0, 256)) {
        let a = ComplexMatrix::from_fn(n, n, |i, j| num_complex::Complex64::new(entries[i * n + j], entries[64 + i * n + j]));
        let b = ComplexMatrix::from_fn(n, n, |i, j| num_complex::Complex64::new(entries[128 + i * n + j], entries[192 + i * n + j]));
        prop_assert!(operator_norm(&(&a * &b)) <= operator_norm(&a) * operator_norm(&b) + 1e-12);
    }
}
