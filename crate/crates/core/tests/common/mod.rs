#![allow(dead_code)]

use geoflow::bundle::{Connection, VectorBundle};
use geoflow::manifold::{Manifold, Vector};
use geoflow::registry;

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

pub fn torus() -> Manifold {
    Manifold::flat_torus(2).unwrap()
}

pub fn sphere() -> Manifold {
    Manifold::sphere2()
}

/// Rotation of `p` about the unit axis `k` by `angle`, written out with
/// the rotation matrix rather than the vector form.
pub fn rotation_oracle(k: [f64; 3], angle: f64, p: &Vector) -> Vector {
    let n = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let (x, y, z) = (k[0] / n, k[1] / n, k[2] / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let r = nalgebra::Matrix3::new(
        t * x * x + c,
        t * x * y - s * z,
        t * x * z + s * y,
        t * x * y + s * z,
        t * y * y + c,
        t * y * z - s * x,
        t * x * z - s * y,
        t * y * z + s * x,
        t * z * z + c,
    );
    let q = r * nalgebra::Vector3::new(p[0], p[1], p[2]);
    v(&[q[0], q[1], q[2]])
}

/// Fixture connections on both manifolds.
pub fn fixture_connections() -> Vec<Connection> {
    let tb = VectorBundle::from_name("torus-triv2").unwrap();
    let sb = VectorBundle::from_name("sphere-tangent").unwrap();
    let mut out: Vec<Connection> = ["zero", "rotJ:0.3", "twist:0.5"]
        .iter()
        .map(|n| registry::connection(&tb, n).unwrap())
        .collect();
    out.push(registry::connection(&sb, "levi-civita").unwrap());
    out
}
