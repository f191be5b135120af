use std::f64::consts::PI;

use heisenfrac_core::group::{group_mul, GroupPoint};
use heisenfrac_core::harness::HorizontalTrig;
use heisenfrac_core::lattice::{horizontal_gradient, Lattice, SubLaplacian};
use heisenfrac_core::spectral::SpectralDecomposition;
use heisenfrac_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn product_closure_matches_group_law() {
    let lat = Lattice::with_default_spacing(1, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (p, q) = (
            rng.random_range(0..lat.node_count()),
            rng.random_range(0..lat.node_count()),
        );
        let product = group_mul(&lat.point(p), &lat.point(q)).unwrap();
        assert_eq!(lat.wrap(&product).unwrap(), lat.mul(p, q));
    }
}

#[test]
fn full_group_table_is_a_group() {
    let lat = Lattice::with_default_spacing(1, 4).unwrap();
    let n = lat.node_count();
    for p in 0..n {
        assert_eq!(lat.mul(p, lat.inv(p)), lat.origin());
        let mut row: Vec<usize> = (0..n).map(|q| lat.mul(p, q)).collect();
        row.sort_unstable();
        assert!(row.iter().enumerate().all(|(i, &v)| i == v));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let [a, b, c] = [0; 3].map(|_| rng.random_range(0..n));
        assert_eq!(lat.mul(lat.mul(a, b), c), lat.mul(a, lat.mul(b, c)));
    }
}

#[test]
fn wrap_handles_periods_and_rejects_off_lattice_points() {
    let lat = Lattice::with_default_spacing(1, 4).unwrap();
    assert_eq!(lat.wrap(&GroupPoint::identity(1)).unwrap(), lat.origin());
    let period = 4.0 * lat.h();
    assert_eq!(
        lat.wrap(&GroupPoint::h1(period, 0.0, 0.0)).unwrap(),
        lat.origin()
    );
    assert_eq!(
        lat.wrap(&GroupPoint::h1(0.0, -period, 0.0)).unwrap(),
        lat.origin()
    );
    let central = lat.m_t() as f64 * lat.h_t();
    assert_eq!(
        lat.wrap(&GroupPoint::h1(0.0, 0.0, central)).unwrap(),
        lat.origin()
    );
    assert!(matches!(
        lat.wrap(&GroupPoint::h1(0.3 * lat.h(), 0.0, 0.0)),
        Err(Error::Usage(_))
    ));
    assert!(lat.wrap(&GroupPoint::identity(2)).is_err());
}

#[test]
fn descriptor_serializes() {
    let lat = Lattice::with_default_spacing(1, 6).unwrap();
    let d = lat.descriptor();
    assert_eq!((d.n, d.m, d.m_t, d.node_count), (1, 6, 12, 216));
    assert!((d.h - PI / 3.0).abs() < 1e-15 && (d.h_t - d.h * d.h / 2.0).abs() < 1e-15);
    let json = serde_json::to_string(&d).unwrap();
    assert_eq!(
        serde_json::from_str::<heisenfrac_core::lattice::LatticeDescriptor>(&json).unwrap(),
        d
    );
}

#[test]
fn laplacian_is_left_invariant() {
    for (n, m) in [(1, 4), (2, 4)] {
        let lat = Lattice::with_default_spacing(n, m).unwrap();
        let op = SubLaplacian::assemble(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<f64> = (0..lat.node_count())
            .map(|_| rng.random::<f64>() - 0.5)
            .collect();
        let lu = op.apply(&u);
        let gs: Vec<usize> = if n == 1 {
            (0..lat.node_count()).collect()
        } else {
            (0..40)
                .map(|_| rng.random_range(0..lat.node_count()))
                .collect()
        };
        for g in gs {
            let perm = lat.left_translation(g);
            let shifted: Vec<f64> = perm.iter().map(|&x| u[x]).collect();
            let l_shifted = op.apply(&shifted);
            let worst = perm
                .iter()
                .enumerate()
                .map(|(x, &gx)| (l_shifted[x] - lu[gx]).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-12, "n={n} g={g}: {worst}");
        }
    }
}

#[test]
fn spectrum_bounds_and_unique_constant_mode() {
    for (n, m) in [(1, 4), (1, 6)] {
        let lat = Lattice::with_default_spacing(n, m).unwrap();
        let op = SubLaplacian::assemble(&lat);
        assert_eq!(op.asymmetry(), 0.0);
        let ones = vec![1.0; lat.node_count()];
        assert!(op.apply(&ones).iter().all(|v| v.abs() <= 1e-12));
        let d = SpectralDecomposition::from_operator(&op).unwrap();
        let ev = d.eigenvalues();
        assert!(ev[0].abs() <= 1e-10);
        assert!(ev[1] > 1e-3, "second eigenvalue {}", ev[1]);
        assert!(*ev.last().unwrap() <= 8.0 * n as f64 / lat.h().powi(2) + 1e-9);
        let e0 = d.eigenvector(0);
        assert!(e0.iter().all(|v| (v - e0[0]).abs() <= 1e-10));
    }
}

#[test]
fn coordinate_list_export() {
    let lat = Lattice::with_default_spacing(1, 4).unwrap();
    let op = SubLaplacian::assemble(&lat);
    let text = op.to_coo_text();
    assert_eq!(text.lines().count(), op.entries().count());
    let (i, j, v) = op.entries().next().unwrap();
    let first: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(first[0].parse::<usize>().unwrap(), i);
    assert_eq!(first[1].parse::<usize>().unwrap(), j);
    assert_eq!(first[2].parse::<f64>().unwrap(), v);
}

#[test]
fn dirichlet_form_matches_gradient_energy() {
    let lat = Lattice::with_default_spacing(2, 4).unwrap();
    let op = SubLaplacian::assemble(&lat);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u: Vec<f64> = (0..lat.node_count()).map(|_| rng.random::<f64>()).collect();
    let energy = lat.inner(&u, &op.apply(&u));
    let grad: f64 = horizontal_gradient(&lat, &u)
        .unwrap()
        .iter()
        .map(|g| lat.inner(g, g))
        .sum();
    assert!((energy - grad).abs() <= 1e-12 * energy);
    assert!(horizontal_gradient(&lat, &vec![2.0; lat.node_count()])
        .unwrap()
        .iter()
        .flatten()
        .all(|&v| v == 0.0));
}

/// On functions of the horizontal variables alone the sub-Laplacian is the
/// planar Laplacian, so `L u = −Δu` gives a closed-form reference.
#[test]
fn refinement_order_on_smooth_periodic_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let f = HorizontalTrig::random(1, &mut rng);
        let mut errors = Vec::new();
        for m in [4usize, 8, 16] {
            let lat = Lattice::with_default_spacing(1, m).unwrap();
            let lu = SubLaplacian::assemble(&lat).apply(&f.sample(&lat));
            let stride = (m / 4) as i64;
            let mut worst: f64 = 0.0;
            for i in 0..lat.node_count() {
                if !lat.coords(i)[..2].iter().all(|c| c % stride == 0) {
                    continue;
                }
                let (x, y) = (
                    lat.horizontal_coordinate(i, 0),
                    lat.horizontal_coordinate(i, 1),
                );
                let exact: f64 = f
                    .modes
                    .iter()
                    .map(|(k, a, b)| {
                        let (kx, ky) = (k[0] as f64, k[1] as f64);
                        let phase = kx * x + ky * y;
                        (kx * kx + ky * ky) * (a * phase.cos() + b * phase.sin())
                    })
                    .sum();
                worst = worst.max((lu[i] - exact).abs());
            }
            errors.push(worst);
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.8, "order {order} from {errors:?}");
        }
    }
}
