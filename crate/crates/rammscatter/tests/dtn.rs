use num_complex::Complex64;
use rammscatter::datastore::{load_json, save_json};
use rammscatter::dtn::*;
use rammscatter::forward::*;

fn j01(a: f64) -> [(f64, f64); 2] {
    let (s, c) = (a.sin(), a.cos());
    let j0 = s / a;
    let j1 = s / (a * a) - c / a;
    [(j0, c / a - s / (a * a)), (j1, j0 - 2.0 * j1 / a)]
}

#[test]
fn free_map_low_degrees_match_trig_forms() {
    for a in [0.7, 1.5, 2.5] {
        let want = j01(a);
        let from_amp = dtn_from_amplitude(&FarField::zeros(4, 0.5), a, 4, 1e-14).unwrap();
        let direct = dtn_direct_matrix(&Potential::zero(0.5), a, 4).unwrap();
        for (l, (j, dj)) in want.iter().enumerate() {
            let m = dj / j;
            assert!((from_amp.mode_values()[l] - m).norm() < 1e-6, "a={a} l={l}");
            assert!((direct.mode_values()[l] - m).norm() < 1e-8, "a={a} l={l}");
        }
    }
}

#[test]
fn weak_ball_map_from_amplitude_matches_direct_per_mode() {
    let q = Potential::ball(0.1, 1.0).unwrap();
    let ff = far_field_from_radial(&solve_radial(&q, 6).unwrap());
    let from_amp = dtn_from_amplitude(&ff, 1.5, 6, 1e-12).unwrap();
    let direct = dtn_direct_matrix(&q, 1.5, 6).unwrap();
    for (x, y) in direct.mode_values().iter().zip(from_amp.mode_values()) {
        assert!((y - x).norm() < 1e-2 * x.norm());
    }
    let off = (0..from_amp.entries.nrows())
        .flat_map(|p| (0..from_amp.entries.ncols()).map(move |q| (p, q)))
        .filter(|(p, q)| p != q)
        .map(|(p, q)| from_amp.entries[(p, q)].norm())
        .fold(0.0, f64::max);
    assert!(off < 1e-6, "{off}");
}

#[test]
fn resonant_radius_suggests_safe_radii() {
    let err = dtn_from_amplitude(&FarField::zeros(4, 0.5), std::f64::consts::PI, 4, 1e-12).unwrap_err();
    match err {
        DtnError::Resonance { ell, safe, .. } => {
            assert_eq!(ell, 0);
            assert!(!safe.is_empty());
            for a in safe {
                assert!(dtn_from_amplitude(&FarField::zeros(4, 0.5), a, 4, 1e-12).is_ok(), "{a}");
            }
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn boundary_radius_inside_support_rejected() {
    let ff = far_field_from_radial(&solve_radial(&Potential::ball(0.1, 1.0).unwrap(), 4).unwrap());
    assert!(dtn_from_amplitude(&ff, 0.8, 4, 1e-12).is_err());
}

#[test]
fn direct_map_applies_to_projected_function() {
    let q = Potential::ball(0.1, 1.0).unwrap();
    let f = BoundaryFunction::from_fn(1.5, 3, |s| Complex64::new(1.0 + s[2], 0.5 * s[0])).unwrap();
    let g = dtn_direct(&q, &f).unwrap();
    let m = dtn_direct_matrix(&q, 1.5, 3).unwrap();
    let h = m.apply(&f).unwrap();
    for (x, y) in g.coeffs.iter().zip(&h.coeffs) {
        assert!((x - y).norm() < 1e-14);
    }
    let s = [0.0, 0.6, 0.8];
    assert!((f.eval(&s) - Complex64::new(1.8, 0.0)).norm() < 1e-12);
    assert!(BoundaryFunction::new(vec![Complex64::new(1.0, 0.0); 3], 1.0).is_err());
}

#[test]
fn dtn_matrix_json_round_trip() {
    let ff = far_field_from_radial(&solve_radial(&Potential::ball(0.1, 1.0).unwrap(), 3).unwrap());
    let m = dtn_from_amplitude(&ff, 1.5, 3, 1e-12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dtn.json");
    save_json(&m, &path).unwrap();
    let back: DtnMatrix = load_json(&path).unwrap();
    assert_eq!(back, m);
}

#[test]
fn direct_map_is_linear_and_symmetric_for_real_potential() {
    let q = Potential::ball(0.3, 1.0).unwrap();
    let a = 1.5;
    let f1 = BoundaryFunction::from_fn(a, 5, |s| Complex64::new(s[0] * s[1] + 0.2, s[2] * s[2])).unwrap();
    let f2 = BoundaryFunction::from_fn(a, 5, |s| Complex64::new((s[0] + 2.0 * s[2]).cos(), -s[1])).unwrap();
    let sum = BoundaryFunction::new(f1.coeffs.iter().zip(&f2.coeffs).map(|(x, y)| x + y).collect(), a).unwrap();
    let (g1, g2) = (dtn_direct(&q, &f1).unwrap(), dtn_direct(&q, &f2).unwrap());
    let gs = dtn_direct(&q, &sum).unwrap();
    for ((x, y), z) in g1.coeffs.iter().zip(&g2.coeffs).zip(&gs.coeffs) {
        assert!((x + y - z).norm() < 1e-12 * (1.0 + z.norm()));
    }
    // Real bilinear pairing on the sphere: <f2, Lambda f1> = <f1, Lambda f2>.
    let quad = rammscatter::specfun::S2Quadrature::new(12);
    let pair = |u: &BoundaryFunction, v: &BoundaryFunction| -> Complex64 {
        quad.nodes.iter().zip(&quad.weights).map(|(s, w)| u.eval(s) * v.eval(s) * *w).sum()
    };
    let lhs = pair(&f2, &g1);
    let rhs = pair(&f1, &g2);
    assert!((lhs - rhs).norm() < 1e-8 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
}
