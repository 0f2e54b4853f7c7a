use affcap_core::affine::{phi, phi_curve};
use affcap_core::verify::verify_chain;
use affcap_core::{Body, Polytope, SphereRule};
use nalgebra::DMatrix;
use proptest::prelude::*;

const TAU_GRID: [f64; 9] = [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0];

fn base(kind: usize, n: usize) -> Polytope {
    match kind {
        0 => Polytope::cube(n),
        1 => Polytope::cross_polytope(n),
        _ => Polytope::simplex(n).unwrap(),
    }
}

fn cond(t: &DMatrix<f64>) -> f64 {
    let sv = t.clone().singular_values();
    sv.max() / sv.min()
}

fn matrix(n: usize, max_cond: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n)
        .prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
        .prop_filter("well conditioned", move |t| cond(t) <= max_cond)
}

/// Translated linear image of a cube, cross-polytope or simplex, origin inside.
fn polytope(n: usize) -> impl Strategy<Value = Body> {
    (
        0usize..3,
        matrix(n, 20.0),
        prop::collection::vec(-1.0f64..1.0, n),
    )
        .prop_map(move |(kind, t, shift)| {
            let p = base(kind, n);
            let inradius = p
                .facets()
                .iter()
                .map(|f| f.offset)
                .fold(f64::INFINITY, f64::min);
            let len = shift.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
            let a: Vec<f64> = shift.iter().map(|x| 0.5 * inradius * x / len).collect();
            Body::from(p)
                .translate(&a)
                .unwrap()
                .linear_image(&t)
                .unwrap()
        })
}

fn rule(n: usize) -> SphereRule {
    SphereRule::default_for(n).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tau_curve_is_even_concave_and_peaks_at_zero(body in polytope(3), p in 1.0f64..3.0) {
        let curve: Vec<f64> = phi_curve(&body, p, &TAU_GRID, &rule(3)).unwrap().iter().map(|v| v.value).collect();
        for i in 0..4 {
            prop_assert!((curve[i] - curve[8 - i]).abs() <= 1e-12 * curve[4]);
        }
        for w in curve.windows(3) {
            prop_assert!(2.0 * w[1] - w[0] - w[2] >= -1e-10 * curve[4]);
        }
        for &v in &curve {
            prop_assert!(curve[0] <= v * (1.0 + 1e-12) && v <= curve[4] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn phi_is_affinely_covariant(body in polytope(3), t in matrix(3, 10.0), p in 1.0f64..3.0, tau in -1.0f64..1.0) {
        let r = rule(3);
        let image = body.linear_image(&t).unwrap();
        let det = t.determinant().abs();
        let lhs = phi(&image, p, tau, &r).unwrap().value;
        let rhs = det.powf((3.0 - p) / 3.0) * phi(&body, p, tau, &r).unwrap().value;
        prop_assert!(rel(lhs, rhs) <= 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn polygon_phi_is_affinely_covariant(body in polytope(2), t in matrix(2, 10.0), p in 1.0f64..1.9, tau in -1.0f64..1.0) {
        let r = rule(2);
        let image = body.linear_image(&t).unwrap();
        let det = t.determinant().abs();
        let lhs = phi(&image, p, tau, &r).unwrap().value;
        let rhs = det.powf((2.0 - p) / 2.0) * phi(&body, p, tau, &r).unwrap().value;
        prop_assert!(rel(lhs, rhs) <= 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn functionals_are_homogeneous(body in polytope(3), scale in 0.5f64..2.0, p in 1.0f64..3.0, tau in -1.0f64..1.0) {
        let r = rule(3);
        let big = body.linear_image(&(DMatrix::identity(3, 3) * scale)).unwrap();
        prop_assert!(rel(big.volume().unwrap(), scale.powi(3) * body.volume().unwrap()) <= 1e-12);
        let k = scale.powf(3.0 - p);
        prop_assert!(rel(big.sp_surface_area(p).unwrap(), k * body.sp_surface_area(p).unwrap()) <= 1e-12);
        let lhs = phi(&big, p, tau, &r).unwrap().value;
        prop_assert!(rel(lhs, k * phi(&body, p, tau, &r).unwrap().value) <= 1e-10);
    }

    #[test]
    fn rotations_change_nothing(body in polytope(3), m in matrix(3, 1e6), p in 1.0f64..3.0, tau in -1.0f64..1.0) {
        let q = m.qr().q();
        let r = rule(3);
        let turned = body.linear_image(&q).unwrap();
        prop_assert!(rel(turned.volume().unwrap(), body.volume().unwrap()) <= 1e-12);
        prop_assert!(rel(turned.sp_surface_area(p).unwrap(), body.sp_surface_area(p).unwrap()) <= 1e-12);
        prop_assert!(rel(phi(&turned, p, tau, &r).unwrap().value, phi(&body, p, tau, &r).unwrap().value) <= 1e-10);
    }

    #[test]
    fn p_one_forgets_tau(body in polytope(3), tau in -1.0f64..1.0) {
        let r = rule(3);
        let a = phi(&body, 1.0, tau, &r).unwrap().value;
        let b = phi(&body, 1.0, 0.0, &r).unwrap().value;
        prop_assert!(rel(a, b) <= 1e-10);
    }

    #[test]
    fn chain_holds_on_polytopes(body in polytope(3), p in 1.0f64..2.9, tau in -1.0f64..1.0) {
        let report = verify_chain(&body, p, tau, &rule(3)).unwrap();
        prop_assert!(report.pass, "{:?}", report.links);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ellipsoids_follow_the_ball(t in matrix(3, 20.0), p in 1.0f64..2.9, tau in -1.0f64..1.0) {
        let r = rule(3);
        let e = Body::from(affcap_core::Ellipsoid::centered(t.clone()).unwrap());
        let ball = Body::from(affcap_core::Ball::unit(3));
        let got = phi(&e, p, tau, &r).unwrap();
        let want = t.determinant().abs().powf((3.0 - p) / 3.0) * phi(&ball, p, tau, &r).unwrap().value;
        prop_assert!(rel(got.value, want) <= 5.0 * got.error_estimate, "{} vs {want}", got.value);
    }

    #[test]
    fn chain_holds_on_qballs(q in 1.2f64..8.0, p in 1.0f64..2.9, tau in -1.0f64..1.0) {
        let body = Body::from(affcap_core::StarBody::qball(3, q).unwrap());
        let report = verify_chain(&body, p, tau, &rule(3)).unwrap();
        prop_assert!(report.pass, "{:?}", report.links);
    }
}
