//! Compact manifolds embedded in Euclidean space.
//!
//! Two fixtures are provided: the flat torus `R^n / 2πZ^n` and the unit
//! sphere in `R^3`. Both carry a retraction onto the manifold and an
//! orthogonal projector onto tangent spaces; everything else in the crate
//! (flows, bundles, transport) is built on top of those two maps.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GeoError, Result};

/// Ambient coordinate vector.
pub type Vector = DVector<f64>;

/// Default tolerance for "this point lies on the manifold".
pub const ON_MANIFOLD_TOL: f64 = 1e-9;

/// Sphere retraction refuses ambient points closer than this to the origin.
pub const SPHERE_RETRACTION_RADIUS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    FlatTorus { dim: usize },
    Sphere2,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifold {
    kind: ManifoldKind,
    name: String,
}

/// A point stored in ambient coordinates. Torus coordinates are canonical
/// representatives in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    coords: Vector,
}

impl ManifoldPoint {
    pub fn coords(&self) -> &Vector {
        &self.coords
    }

    pub fn into_coords(self) -> Vector {
        self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    pub components: Vector,
}

impl Manifold {
    /// `R^dim / 2πZ^dim` with the flat metric.
    pub fn flat_torus(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(GeoError::InvalidDimension(dim));
        }
        Ok(Self {
            kind: ManifoldKind::FlatTorus { dim },
            name: format!("torus{dim}"),
        })
    }

    /// The unit sphere in `R^3`.
    pub fn sphere2() -> Self {
        Self {
            kind: ManifoldKind::Sphere2,
            name: "sphere2".to_string(),
        }
    }

    /// Resolves `"sphere2"` or `"torusN"`.
    pub fn from_name(name: &str) -> Result<Self> {
        let unknown = || GeoError::UnknownName {
            kind: "manifold",
            name: name.to_string(),
        };
        if name == "sphere2" {
            return Ok(Self::sphere2());
        }
        let dim: usize = name
            .strip_prefix("torus")
            .ok_or_else(unknown)?
            .parse()
            .map_err(|_| unknown())?;
        Self::flat_torus(dim)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, ManifoldKind::Sphere2)
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::FlatTorus { dim } => dim,
            ManifoldKind::Sphere2 => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::FlatTorus { dim } => dim,
            ManifoldKind::Sphere2 => 3,
        }
    }

    /// Zero iff `p` lies on the manifold.
    pub fn constraint_residual(&self, p: &Vector) -> f64 {
        match self.kind {
            ManifoldKind::FlatTorus { .. } => 0.0,
            ManifoldKind::Sphere2 => (p.norm_squared() - 1.0).abs(),
        }
    }

    /// Retraction that keeps torus coordinates continuous (no reduction mod
    /// 2π). Integrators use it when they need a smooth lift of a trajectory.
    pub(crate) fn retract_continuous(&self, p: Vector) -> Result<Vector> {
        self.check_ambient(&p)?;
        match self.kind {
            ManifoldKind::FlatTorus { .. } => Ok(p),
            ManifoldKind::Sphere2 => {
                let n = p.norm();
                if !(n >= SPHERE_RETRACTION_RADIUS) {
                    return Err(GeoError::RetractionUndefined {
                        point: p.as_slice().to_vec(),
                        radius: SPHERE_RETRACTION_RADIUS,
                    });
                }
                Ok(p / n)
            }
        }
    }

    /// Maps an ambient point near the manifold onto it.
    pub fn retract(&self, p: &Vector) -> Result<ManifoldPoint> {
        let q = self.retract_continuous(p.clone())?;
        Ok(ManifoldPoint {
            coords: self.canonicalize(q),
        })
    }

    fn canonicalize(&self, mut p: Vector) -> Vector {
        if let ManifoldKind::FlatTorus { .. } = self.kind {
            for c in p.iter_mut() {
                let r = c.rem_euclid(TAU);
                // rem_euclid can round up to exactly 2π for tiny negative inputs
                *c = if r >= TAU { 0.0 } else { r };
            }
        }
        p
    }

    /// Wraps coordinates that are already on the manifold, rejecting anything
    /// farther than [`ON_MANIFOLD_TOL`].
    pub fn point(&self, coords: &[f64]) -> Result<ManifoldPoint> {
        let p = Vector::from_column_slice(coords);
        self.check_ambient(&p)?;
        let residual = self.constraint_residual(&p);
        if residual > ON_MANIFOLD_TOL {
            return Err(GeoError::OffManifold {
                point: coords.to_vec(),
                residual,
            });
        }
        Ok(ManifoldPoint {
            coords: self.canonicalize(p),
        })
    }

    /// True when `x` has the right ambient dimension and lies on the manifold.
    pub fn contains(&self, x: &ManifoldPoint) -> bool {
        x.coords.len() == self.ambient_dim() && self.constraint_residual(&x.coords) <= ON_MANIFOLD_TOL
    }

    fn check_ambient(&self, p: &Vector) -> Result<()> {
        if p.len() != self.ambient_dim() {
            return Err(GeoError::Domain(format!(
                "expected {} ambient coordinates for {}, got {}",
                self.ambient_dim(),
                self.name,
                p.len()
            )));
        }
        Ok(())
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at `x`.
    pub fn tangent_project(&self, x: &ManifoldPoint, v: &Vector) -> TangentVector {
        TangentVector {
            base: x.clone(),
            components: self.project_ambient(&x.coords, v),
        }
    }

    /// Projector extended off the manifold. On the sphere this is
    /// `v - (v·y) y / |y|²`, which agrees with `v - (v·x) x` on the sphere and
    /// keeps `|y|` constant along the ambient flow of any projected field.
    pub(crate) fn project_ambient(&self, y: &Vector, v: &Vector) -> Vector {
        match self.kind {
            ManifoldKind::FlatTorus { .. } => v.clone(),
            ManifoldKind::Sphere2 => {
                let n2 = y.norm_squared();
                if n2 == 0.0 {
                    return v.clone();
                }
                v - y * (v.dot(y) / n2)
            }
        }
    }

    /// Geodesic-free distance used for equality checks: the quotient metric on
    /// the torus (per-axis `min(|Δ|, 2π - |Δ|)`) and the chordal distance on
    /// the sphere.
    pub fn distance(&self, a: &ManifoldPoint, b: &ManifoldPoint) -> f64 {
        self.ambient_distance(&a.coords, &b.coords)
    }

    pub(crate) fn ambient_distance(&self, a: &Vector, b: &Vector) -> f64 {
        match self.kind {
            ManifoldKind::FlatTorus { .. } => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| {
                    let d = (x - y).rem_euclid(TAU);
                    let d = d.min(TAU - d);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            ManifoldKind::Sphere2 => (a - b).norm(),
        }
    }

    /// Representative of `p` closest to `reference` in ambient coordinates.
    pub(crate) fn lift_near(&self, reference: &Vector, p: &Vector) -> Vector {
        match self.kind {
            ManifoldKind::FlatTorus { .. } => p.zip_map(reference, |x, r| x + TAU * ((r - x) / TAU).round()),
            ManifoldKind::Sphere2 => p.clone(),
        }
    }

    /// Deterministic orthonormal tangent frame at `x`, one column per
    /// intrinsic direction.
    ///
    /// Torus: the coordinate axes. Sphere: Gram–Schmidt of `e_x` against `x`,
    /// falling back to `e_y` when `|x_1| > 0.85` (near the poles of the seed
    /// axis), completed by `x × e_1` so that `e_1 × e_2 = x` (outward normal).
    pub fn tangent_frame(&self, x: &Vector) -> DMatrix<f64> {
        match self.kind {
            ManifoldKind::FlatTorus { dim } => DMatrix::identity(dim, dim),
            ManifoldKind::Sphere2 => {
                let n = x.norm();
                let u = if n > 0.0 {
                    x / n
                } else {
                    Vector::from_column_slice(&[0.0, 0.0, 1.0])
                };
                let seed = if u[0].abs() > 0.85 {
                    Vector::from_column_slice(&[0.0, 1.0, 0.0])
                } else {
                    Vector::from_column_slice(&[1.0, 0.0, 0.0])
                };
                let e1 = (&seed - &u * seed.dot(&u)).normalize();
                let e2 = cross(&u, &e1);
                DMatrix::from_columns(&[e1, e2])
            }
        }
    }

    /// Deterministic random point: uniform per axis on the torus, normalized
    /// Gaussian (uniform) on the sphere.
    pub fn random_point(&self, seed: u64) -> ManifoldPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_point(&mut rng)
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ManifoldPoint {
        match self.kind {
            ManifoldKind::FlatTorus { dim } => ManifoldPoint {
                coords: self.canonicalize(Vector::from_fn(dim, |_, _| rng.random_range(0.0..TAU))),
            },
            ManifoldKind::Sphere2 => loop {
                let g = Vector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
                let n = g.norm();
                if n > 1e-6 {
                    break ManifoldPoint { coords: g / n };
                }
            },
        }
    }

    /// Random unit tangent vector at `x`.
    pub fn sample_unit_tangent<R: Rng + ?Sized>(&self, x: &ManifoldPoint, rng: &mut R) -> Vector {
        loop {
            let g = Vector::from_fn(self.ambient_dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let t = self.project_ambient(&x.coords, &g);
            let n = t.norm();
            if n > 1e-6 {
                return t / n;
            }
        }
    }
}

pub(crate) fn cross(a: &Vector, b: &Vector) -> Vector {
    Vector::from_column_slice(&[
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}
