mod common;

use common::*;
use geoflow::flows::*;
use geoflow::manifold::Manifold;
use geoflow::registry::{scalar_field, scalar_names, vector_field};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seeded_setup(m: &Manifold, k: u64) -> (VectorField, geoflow::manifold::ManifoldPoint, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(k);
    let field = vector_field(m, &format!("seeded:{k}")).unwrap();
    let x = m.sample_point(&mut rng);
    (field, x, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

#[test]
fn group_law_and_reversibility() {
    let p = FlowParams::default();
    for m in [torus(), sphere()] {
        for k in 0..100 {
            let (field, x, t, s) = seeded_setup(&m, k);
            let once = flow(&field, t + s, &x, &p).unwrap();
            let twice = flow(&field, t, &flow(&field, s, &x, &p).unwrap(), &p).unwrap();
            assert!(m.distance(&once, &twice) <= 1e-7, "{} case {k}", m.name());
            let back = flow(&field, -t, &flow(&field, t, &x, &p).unwrap(), &p).unwrap();
            assert!(m.distance(&back, &x) <= 1e-7, "{} case {k}", m.name());
        }
    }
}

#[test]
fn rotation_flow_matches_rotation_matrix() {
    let p = FlowParams::default();
    let s = sphere();
    let field = vector_field(&s, "rot:1,2,-0.5").unwrap();
    let x = s.random_point(9);
    let got = flow(&field, 0.8, &x, &p).unwrap();
    let speed = (1.0f64 + 4.0 + 0.25).sqrt();
    let want = rotation_oracle([1.0, 2.0, -0.5], 0.8 * speed, x.coords());
    assert!((got.coords() - want).norm() < 1e-10);
}

#[test]
fn trotter_error_halves_for_noncommuting_rotations() {
    let p = FlowParams::default();
    let s = sphere();
    let x = s.point(&[0.0, 1.0, 0.0]).unwrap();
    let (a, b) = (vector_field(&s, "rot:z").unwrap(), vector_field(&s, "rot:x").unwrap());
    let exact = rotation_oracle([1.0, 0.0, 1.0], 2f64.sqrt(), x.coords());
    let errs: Vec<f64> = [4, 8, 16, 32, 64]
        .iter()
        .map(|&n| (trotter_flow(&a, &b, 1.0, &x, n, &p).unwrap().coords() - &exact).norm())
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] <= w[0]);
    }
    let r = errs[1] / errs[2];
    assert!((1.6..=2.4).contains(&r), "{r}");
    for w in errs[1..].windows(2) {
        let r = w[0] / w[1];
        assert!((1.5..=2.5).contains(&r), "{r}");
    }
}

#[test]
fn commuting_trotter_is_exact() {
    let p = FlowParams::default();
    let t2 = torus();
    let (a, b) = (
        vector_field(&t2, "const:1,0").unwrap(),
        vector_field(&t2, "const:0,1").unwrap(),
    );
    let x = t2.random_point(4);
    let direct = flow(&a.sum(&b).unwrap(), 1.0, &x, &p).unwrap();
    for n in [1, 4, 8, 16, 32, 64] {
        assert!(t2.distance(&trotter_flow(&a, &b, 1.0, &x, n, &p).unwrap(), &direct) <= 1e-9);
    }
}

#[test]
fn time_change_agrees_with_direct_integration() {
    let p = FlowParams::default();
    let mut case = 0u64;
    for m in [torus(), sphere()] {
        for name in scalar_names(&m) {
            let f = scalar_field(&m, name).unwrap();
            for _ in 0..15 {
                let (field, x, t, _) = seeded_setup(&m, case + 500);
                case += 1;
                let via_s = flow_of_scaled_field(&f, &field, t, &x, &p).unwrap();
                let direct = flow(&field.scaled(&f).unwrap(), t, &x, &p).unwrap();
                assert!(m.distance(&via_s, &direct) <= 1e-7, "{name} case {case}");
            }
        }
    }
    assert!(case >= 100);
}

#[test]
fn unit_time_change_is_identity() {
    let p = FlowParams::default();
    for m in [torus(), sphere()] {
        let one = scalar_field(&m, "one").unwrap();
        for k in 0..10 {
            let (field, x, t, _) = seeded_setup(&m, k + 40);
            assert!((time_change_s(&one, &field, t, &x, &p).unwrap() - t).abs() <= 1e-9);
        }
    }
}

#[test]
fn time_change_is_increasing() {
    let p = FlowParams::default();
    let s = sphere();
    let f = scalar_field(&s, "2+z").unwrap();
    let (field, x, _, _) = seeded_setup(&s, 3);
    let tc = TimeChangeSolution::new(&f, &field, &p).unwrap();
    let vals: Vec<f64> = (0..=20).map(|i| tc.eval(i as f64 * 0.05, &x).unwrap()).collect();
    assert_eq!(vals[0], 0.0);
    assert!(vals.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn scaled_trajectories_trace_the_same_curve() {
    let p = FlowParams::default();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
    for m in [torus(), sphere()] {
        for name in scalar_names(&m) {
            let f = scalar_field(&m, name).unwrap();
            for k in 0..3 {
                let (field, x, _, _) = seeded_setup(&m, k + 70);
                let tm = trajectory_match(&field, &f, &x, &grid, &p).unwrap();
                assert!(tm.max_distance <= 1e-6, "{name}: {}", tm.max_distance);
                assert!(tm.orientation_preserving);
            }
        }
    }
}

#[test]
fn integral_curve_samples_rotation() {
    let p = FlowParams::default();
    let s = sphere();
    let x = s.random_point(2);
    let field = vector_field(&s, "rot:y").unwrap();
    let grid = [0.0, 0.3, 1.1, 2.0];
    for (pt, &t) in integral_curve(&field, &x, &grid, &p).unwrap().iter().zip(&grid) {
        assert!((pt.coords() - rotation_oracle([0.0, 1.0, 0.0], t, x.coords())).norm() <= 1e-8);
    }
}
