use heisenfrac_core::group::{
    check_homogeneous_increment, dilate, estimate_quasi_distance_constants, gauge, group_inv,
    group_mul, increment_ratio, GroupPoint,
};
use proptest::prelude::*;

fn point(n: usize) -> impl Strategy<Value = GroupPoint> {
    (prop::collection::vec(-5.0f64..5.0, 2 * n), -5.0f64..5.0)
        .prop_map(|(z, t)| GroupPoint::new(z, t).unwrap())
}

fn close(p: &GroupPoint, q: &GroupPoint, tol: f64) -> bool {
    p.z().iter().zip(q.z()).all(|(a, b)| (a - b).abs() <= tol) && (p.t() - q.t()).abs() <= tol
}

proptest! {
    #[test]
    fn associativity(p in point(2), q in point(2), r in point(2)) {
        let left = group_mul(&group_mul(&p, &q).unwrap(), &r).unwrap();
        let right = group_mul(&p, &group_mul(&q, &r).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn inverse_on_both_sides(p in point(1)) {
        prop_assert!(group_mul(&p, &group_inv(&p)).unwrap().is_identity());
        prop_assert!(group_mul(&group_inv(&p), &p).unwrap().is_identity());
    }

    #[test]
    fn dilation_is_an_automorphism(p in point(1), q in point(1), lambda in 0.1f64..4.0) {
        let lhs = dilate(lambda, &group_mul(&p, &q).unwrap()).unwrap();
        let rhs = group_mul(&dilate(lambda, &p).unwrap(), &dilate(lambda, &q).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12 * (1.0 + lambda * lambda) * 50.0));
    }

    #[test]
    fn gauge_homogeneous_and_symmetric(p in point(2), lambda in prop::sample::select(vec![0.5, 2.0, 3.7])) {
        let g = gauge(&p);
        let scaled = gauge(&dilate(lambda, &p).unwrap());
        prop_assert!((scaled - lambda * g).abs() <= 1e-12 * lambda * g.max(1e-300));
        prop_assert_eq!(gauge(&group_inv(&p)), g);
    }

    #[test]
    fn quasi_triangle_constants_hold(p in point(1), q in point(1)) {
        let k = estimate_quasi_distance_constants(1, 2_000, 5).unwrap();
        let (gp, gq, gqp) = (gauge(&p), gauge(&q), gauge(&group_mul(&q, &p).unwrap()));
        prop_assert!(gqp <= k.big_c * (gp + gq) + 1e-12);
        prop_assert!(k.c * (gp - gq).abs() <= gqp + 1e-12);
    }
}

#[test]
fn identity_and_noncommutativity() {
    let p = GroupPoint::h1(0.3, -1.2, 2.0);
    assert_eq!(group_mul(&GroupPoint::identity(1), &p).unwrap(), p);
    let xy = group_mul(
        &GroupPoint::h1(1.0, 0.0, 0.0),
        &GroupPoint::h1(0.0, 1.0, 0.0),
    )
    .unwrap();
    let yx = group_mul(
        &GroupPoint::h1(0.0, 1.0, 0.0),
        &GroupPoint::h1(1.0, 0.0, 0.0),
    )
    .unwrap();
    assert_eq!(xy, GroupPoint::h1(1.0, 1.0, 0.5));
    assert_eq!(yx, GroupPoint::h1(1.0, 1.0, -0.5));
    assert_eq!(
        group_inv(&GroupPoint::h1(1.0, 2.0, 3.0)),
        GroupPoint::h1(-1.0, -2.0, -3.0)
    );
    assert_eq!(group_inv(&GroupPoint::identity(2)), GroupPoint::identity(2));
}

#[test]
fn dilation_and_gauge_values() {
    let p = GroupPoint::h1(1.0, 1.0, 1.0);
    assert_eq!(dilate(1.0, &p).unwrap(), p);
    assert_eq!(dilate(2.0, &p).unwrap(), GroupPoint::h1(2.0, 2.0, 4.0));
    assert!(dilate(0.0, &p).is_err());
    assert!(dilate(-1.0, &p).is_err());
    assert_eq!(gauge(&GroupPoint::identity(1)), 0.0);
    assert_eq!(gauge(&GroupPoint::h1(1.0, 0.0, 0.0)), 1.0);
    assert_eq!(gauge(&GroupPoint::h1(0.0, 0.0, 1.0)), 2.0);
}

#[test]
fn quasi_distance_constants_are_deterministic_and_monotone() {
    let a = estimate_quasi_distance_constants(1, 10_000, 42).unwrap();
    let b = estimate_quasi_distance_constants(1, 10_000, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!(a.c > 0.0 && a.c < 1.0 && a.big_c > 1.0 && a.big_c.is_finite());
    let doubled = estimate_quasi_distance_constants(1, 20_000, 42).unwrap();
    assert!(doubled.c <= a.c && doubled.big_c >= a.big_c);
}

#[test]
fn quasi_distance_constants_stabilize() {
    let small = estimate_quasi_distance_constants(1, 10_000, 7).unwrap();
    let large = estimate_quasi_distance_constants(1, 40_000, 7).unwrap();
    assert!((large.c - small.c).abs() <= 0.05 * small.c);
    assert!((large.big_c - small.big_c).abs() <= 0.05 * small.big_c);
}

#[test]
fn homogeneous_increment_is_stable() {
    let r = check_homogeneous_increment(1, 1.0, 20_000, 3).unwrap();
    assert!(r.accepted > 0);
    assert!(r.sup_ratio.is_finite() && r.stable);
    let doubled = check_homogeneous_increment(1, 1.0, 40_000, 3).unwrap();
    assert!(doubled.sup_ratio <= 2.0 * r.sup_ratio);
}

#[test]
fn increment_on_unit_sphere() {
    let x = GroupPoint::h1(1.0, 0.0, 0.0);
    assert_eq!(
        increment_ratio(1.0, &x, &GroupPoint::identity(1)).unwrap(),
        0.0
    );
    // x and x·y both have gauge 1, so the denominator is |y|.
    let y = GroupPoint::h1(-1.0, 1.0, -0.5);
    let xy = group_mul(&x, &y).unwrap();
    assert!((gauge(&xy) - 1.0).abs() < 1e-15);
    assert_eq!(increment_ratio(1.0, &x, &y).unwrap(), 0.0);
    // Off the sphere the same denominator scales the plain gauge increment.
    let z = GroupPoint::h1(1.0, 0.0, 0.0);
    let w = GroupPoint::h1(1.0, 0.0, 0.0);
    assert!((increment_ratio(1.0, &z, &w).unwrap() - 1.0).abs() < 1e-15);
}
