use num_complex::Complex64;
use proptest::prelude::*;
use rammscatter::variety::*;

fn xi_strategy() -> impl Strategy<Value = [f64; 3]> {
    (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #[test]
    fn pairs_lie_on_variety_with_prescribed_difference(xi in xi_strategy(), extra in 0.0f64..20.0) {
        let t = norm3(&xi);
        let s = (t * t / 4.0 - 1.0).max(0.0).sqrt() + extra;
        let p = make_pair(xi, s).unwrap();
        for d in [&p.theta, &p.theta_prime] {
            prop_assert!((bilinear(&d.theta, &d.theta) - 1.0).norm() < 1e-9 * (1.0 + s * s));
        }
        for k in 0..3 {
            prop_assert!((p.theta_prime.theta[k] - p.theta.theta[k] - xi[k]).norm() < 1e-12);
        }
        let want = (1.0 + 2.0 * s * s).sqrt();
        prop_assert!((p.theta.norm() - want).abs() < 1e-9 * want);
    }

    #[test]
    fn ladder_norms_are_geometric(xi in xi_strategy(), factor in 1.1f64..2.5) {
        let start = norm3(&xi).max(2.0);
        let ladder = growth_ladder(xi, 4, start, factor).unwrap();
        for (k, p) in ladder.iter().enumerate() {
            let want = start * factor.powi(k as i32);
            prop_assert!((p.theta.norm() - want).abs() < 1e-9 * want);
        }
    }

    #[test]
    fn complex_direction_rejects_off_variety(re in 0.0f64..3.0, im in 0.5f64..3.0) {
        let theta = [Complex64::new(re, im), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        let q = bilinear(&theta, &theta);
        prop_assume!((q - 1.0).norm() > 1e-6);
        prop_assert!(matches!(ComplexDirection::new(theta), Err(VarietyError::OffVariety(_))));
    }
}

#[test]
fn real_unit_vector_is_on_variety_with_unit_norm() {
    let d = ComplexDirection::from_real(&[0.6, 0.0, 0.8]).unwrap();
    assert!((d.norm() - 1.0).abs() < 1e-15);
    assert_eq!(d.kappa, 0.0);
}

#[test]
fn growth_below_threshold_is_rejected() {
    assert!(matches!(make_pair([0.0, 4.0, 0.0], 1.0), Err(VarietyError::GrowthTooSmall { .. })));
    assert!(make_pair([0.0, 4.0, 0.0], 1.8).is_ok());
    assert!(growth_ladder([1.0, 0.0, 0.0], 1, 2.0, 1.5).is_err());
}
