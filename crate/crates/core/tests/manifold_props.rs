mod common;

use common::*;
use geoflow::manifold::{Manifold, Vector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn sampled_points_satisfy_invariants() {
    for m in [torus(), Manifold::flat_torus(3).unwrap(), sphere()] {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = m.sample_point(&mut rng);
            assert!(m.contains(&x));
            assert!(m.constraint_residual(x.coords()) <= 1e-12);
            let u = m.sample_unit_tangent(&x, &mut rng);
            assert!((u.norm() - 1.0).abs() < 1e-12);
            let again = m.tangent_project(&x, &u).components;
            assert!((again - &u).norm() < 1e-14);
            let frame = m.tangent_frame(x.coords());
            let gram = frame.transpose() * &frame;
            assert!((gram - nalgebra::DMatrix::identity(m.intrinsic_dim(), m.intrinsic_dim())).norm() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn sphere_retraction_is_idempotent(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
        let m = sphere();
        let p = Vector::from_column_slice(&[a, b, c]);
        prop_assume!(p.norm() > 1e-6);
        let once = m.retract(&p).unwrap();
        let twice = m.retract(once.coords()).unwrap();
        prop_assert!((once.coords() - twice.coords()).norm() < 1e-15);
        prop_assert!((once.coords().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn torus_retraction_is_canonical(a in -50.0..50.0f64, b in -50.0..50.0f64) {
        let m = torus();
        let x = m.retract(&v(&[a, b])).unwrap();
        for &c in x.as_slice() {
            prop_assert!((0.0..std::f64::consts::TAU).contains(&c));
        }
        let shifted = m.retract(&v(&[a + std::f64::consts::TAU, b - 2.0 * std::f64::consts::TAU])).unwrap();
        prop_assert!(m.distance(&x, &shifted) < 1e-12);
    }

    #[test]
    fn distance_is_a_metric(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000) {
        for m in [torus(), sphere()] {
            let (x, y, z) = (m.random_point(s1), m.random_point(s2), m.random_point(s3));
            prop_assert!(m.distance(&x, &x) < 1e-12);
            prop_assert!((m.distance(&x, &y) - m.distance(&y, &x)).abs() < 1e-12);
            prop_assert!(m.distance(&x, &z) <= m.distance(&x, &y) + m.distance(&y, &z) + 1e-12);
        }
    }

    #[test]
    fn tangent_projection_is_idempotent(seed in 0u64..10_000, a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
        let m = sphere();
        let x = m.random_point(seed);
        let w = v(&[a, b, c]);
        let t = m.tangent_project(&x, &w).components;
        prop_assert!(t.dot(x.coords()).abs() < 1e-12);
        prop_assert!((m.tangent_project(&x, &t).components - &t).norm() < 1e-12);
    }
}
