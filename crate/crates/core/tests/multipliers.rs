use heisenfrac_core::harness::{generate_corpus, CorpusDescriptor};
use heisenfrac_core::kernels::SingularOperator;
use heisenfrac_core::multipliers::{
    gamma_ratio, geometric_frac_apply, multiplier_a, multiplier_a_tilde, multiplier_csv,
    multiplier_table, GeometricOperator, MultiplierPoint,
};
use heisenfrac_core::LatticeContext;
use proptest::prelude::*;

const GAMMA_1_25: f64 = 0.906_402_477_055_477;
const GAMMA_0_75: f64 = 1.225_416_702_465_177_6;

fn pt(k: u64, lambda: f64, alpha: f64, n: usize) -> MultiplierPoint {
    MultiplierPoint::new(k, lambda, alpha, n).unwrap()
}

#[test]
fn closed_form_values() {
    assert!((multiplier_a(&pt(2, 3.0, 1.0, 1)).unwrap() - 15f64.sqrt()).abs() <= 1e-14);
    let got = multiplier_a_tilde(&pt(0, 1.0, 1.0, 1)).unwrap();
    let want = 2f64.sqrt() * GAMMA_1_25 / GAMMA_0_75;
    assert!((got - want).abs() <= 1e-13 * want);
    assert!((gamma_ratio(0.5, 0.75, 0.25).unwrap() - GAMMA_1_25 / GAMMA_0_75).abs() <= 1e-13);
    assert!(gamma_ratio(0.0, -0.5, 0.5).is_err());
}

/// `Γ(z+1)/Γ(z) = z` makes the two multipliers coincide at α = 2.
#[test]
fn second_order_multipliers_coincide() {
    for n in [1, 2, 3] {
        for k in [0, 1, 5, 40, 200] {
            for lambda in [-3.0, 0.01, 1.0, 7.5] {
                let p = pt(k, lambda, 2.0, n);
                let (a, at) = (multiplier_a(&p).unwrap(), multiplier_a_tilde(&p).unwrap());
                assert!(
                    (a - at).abs() <= 1e-12 * a,
                    "k={k} lambda={lambda}: {a} vs {at}"
                );
            }
        }
    }
}

#[test]
fn ratio_tends_to_one_monotonically() {
    let rows = multiplier_table(1, 1.0, 200, &[1.0]).unwrap();
    assert!(rows
        .windows(2)
        .all(|w| (w[1].ratio - 1.0).abs() < (w[0].ratio - 1.0).abs()));
    assert!((rows.last().unwrap().ratio - 1.0).abs() <= 1e-3);
}

proptest! {
    #[test]
    fn monotone_and_positive(k in 0u64..50, lambda in 0.01f64..20.0, alpha in 0.1f64..3.9) {
        let (p, next, wider) = (pt(k, lambda, alpha, 1), pt(k + 1, lambda, alpha, 1), pt(k, 1.5 * lambda, alpha, 1));
        let (a, at) = (multiplier_a(&p).unwrap(), multiplier_a_tilde(&p).unwrap());
        prop_assert!(a > 0.0 && at > 0.0);
        prop_assert!(multiplier_a(&next).unwrap() > a && multiplier_a_tilde(&next).unwrap() > at);
        prop_assert!(multiplier_a(&wider).unwrap() > a && multiplier_a_tilde(&wider).unwrap() > at);
    }
}

#[test]
fn table_shape_and_csv() {
    let rows = multiplier_table(1, 1.5, 0, &[2.0]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].k, 0);
    let rows = multiplier_table(2, 2.0, 3, &[1.0, -2.0]).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows
        .iter()
        .all(|r| (r.a - r.a_tilde).abs() <= 1e-12 * r.a && (r.ratio - 1.0).abs() <= 1e-12));
    let csv = multiplier_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,lambda,alpha,A,A_tilde,ratio");
    assert_eq!(lines.count(), 8);
    assert!(multiplier_table(1, 4.0, 2, &[1.0]).is_err());
    assert!(multiplier_table(1, 1.0, 2, &[0.0]).is_err());
}

#[test]
fn geometric_operator_structure() {
    let ctx = LatticeContext::new(1, 4).unwrap();
    let lat = ctx.lattice();
    let op = GeometricOperator::with_constant(SingularOperator::new(lat, 1.0).unwrap(), 0.3);
    let consts = vec![3.0; lat.node_count()];
    assert!(op
        .apply(lat, &consts)
        .unwrap()
        .iter()
        .all(|v| v.abs() <= 1e-12));
    let fs = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            count: 2,
            seed: 5,
            ..Default::default()
        },
    )
    .unwrap()
    .functions;
    let combo: Vec<f64> = fs[0]
        .iter()
        .zip(&fs[1])
        .map(|(a, b)| 2.0 * a - 0.5 * b)
        .collect();
    let lhs = op.apply(lat, &combo).unwrap();
    let (a, b) = (
        op.apply(lat, &fs[0]).unwrap(),
        op.apply(lat, &fs[1]).unwrap(),
    );
    let scale = lhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(lhs
        .iter()
        .zip(a.iter().zip(&b))
        .all(|(l, (x, y))| (l - (2.0 * x - 0.5 * y)).abs() <= 1e-12 * scale));
    let bil = op.h_alpha_bilinear(lat, &fs[0], &fs[1]).unwrap();
    let three = op.h_alpha(lat, &fs[0], &fs[1]).unwrap();
    let scale = three.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(bil
        .iter()
        .zip(&three)
        .all(|(x, y)| (x - y).abs() <= 1e-12 * scale));
    assert!(SingularOperator::new(lat, 2.5).is_err());
    let table = SingularOperator::new(lat, 1.0).unwrap().table().clone();
    assert!(
        geometric_frac_apply(lat, &SingularOperator::from_table(2.5, table), &fs[0], 1.0).is_err()
    );
}

#[test]
fn calibrated_geometric_operator_tracks_spectral_power() {
    let ctx = LatticeContext::new(1, 6).unwrap();
    let (lat, d) = (ctx.lattice(), ctx.decomposition());
    let cal = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            count: 20,
            seed: 1043,
            ..Default::default()
        },
    )
    .unwrap();
    let test = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            count: 20,
            seed: 42,
            ..Default::default()
        },
    )
    .unwrap();
    for (alpha, limit) in [(1.0, 0.05), (1.9, 0.15)] {
        let op = GeometricOperator::calibrated(lat, d, alpha, &cal.functions).unwrap();
        assert!(op.constant() > 0.0);
        let (mut e, mut r) = (0.0, 0.0);
        for u in &test.functions {
            let got = op.apply(lat, u).unwrap();
            let want = d.power(alpha / 2.0, u).unwrap();
            e += got
                .iter()
                .zip(&want)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>();
            r += want.iter().map(|y| y * y).sum::<f64>();
        }
        let err = (e / r).sqrt();
        assert!(err <= limit, "alpha {alpha}: {err}");
    }
}
