use std::f64::consts::PI;

use proptest::prelude::*;

use secscat::uv::{
    coefficients, expansion_residual, kernel_f, spherical_map, uv_regularized, uv_secondary,
    FourVector, UVParams, UVScenario,
};

fn scenario() -> UVScenario {
    UVScenario::new(UVParams {
        angular_orders: [16, 16, 16],
        ..Default::default()
    })
    .unwrap()
}

fn ball_point() -> impl Strategy<Value = FourVector> {
    prop::array::uniform4(-0.5f64..0.5).prop_map(FourVector)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spherical_map_preserves_radius(r in 0.0f64..1e3, a in 0.0f64..PI, b in 0.0f64..PI, c in 0.0f64..(2.0 * PI)) {
        let p = spherical_map(r, a, b, c).unwrap();
        prop_assert!((p.norm() - r).abs() <= 1e-14 * r.max(1.0));
    }

    #[test]
    fn denominator_stays_positive(q in ball_point(), r in 1.0f64..100.0, a in 0.0f64..PI, b in 0.0f64..PI, c in 0.0f64..(2.0 * PI)) {
        let sc = scenario();
        let p = spherical_map(r, a, b, c).unwrap();
        prop_assert!(kernel_f(&p, &q, &sc).unwrap() >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn b_plus_does_not_depend_on_radius(q in ball_point()) {
        let c = coefficients(&scenario(), &[q]).unwrap();
        prop_assert!(c.radius_dependence <= 1e-12);
    }

    #[test]
    fn expansion_defect_is_quadratic(q in ball_point()) {
        let sc = scenario();
        let rs = [1e2, 1e3, 1e4];
        let res: Vec<f64> = rs.iter().map(|&r| expansion_residual(r, &q, &sc).unwrap()).collect();
        let slope = secscat::quadrature::loglog_slope(&rs, &res).unwrap();
        prop_assert!((slope + 2.0).abs() <= 0.1);
    }

    #[test]
    fn two_routes_agree(q in ball_point(), l in 1.0f64..200.0, eps in -1.0f64..1.0) {
        let sc = scenario().with_epsilon(eps).unwrap();
        let r = uv_regularized(l, &q, &sc, 1e-9).unwrap();
        prop_assert!(r.discrepancy <= 1e-9);
        prop_assert!((r.value.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cutoff_ladder_contracts(q in ball_point(), eps in -0.5f64..0.5) {
        let sc = scenario().with_epsilon(eps).unwrap();
        let s = uv_secondary(&[q], &sc, 1e-6).unwrap();
        let row = &s.rows[0];
        for w in row.ladder.windows(2) {
            prop_assert!(w[1].step_difference <= w[0].tail_bound);
        }
        prop_assert!((row.value.norm() - 1.0).abs() <= 1e-12);
    }
}
