//! Named fixtures: manifolds, vector and scalar fields, bundles,
//! connections, sections and paths, resolved from short strings such as
//! `"rot:z"` or `"rect:1,0.5"`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bundle::{BundleKind, Connection, Section, VectorBundle};
use crate::error::{GeoError, Result};
use crate::flows::{flow, FlowParams, ScalarField, VectorField};
use crate::manifold::{cross, Manifold, ManifoldPoint, Vector};
use crate::transport::PathCurve;

fn unknown(kind: &'static str, name: &str) -> GeoError {
    GeoError::UnknownName {
        kind,
        name: name.to_string(),
    }
}

fn parse_reals(kind: &'static str, name: &str, body: &str) -> Result<Vec<f64>> {
    body.split(',')
        .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| unknown(kind, name))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn manifold(name: &str) -> Result<Manifold> {
    Manifold::from_name(name)
}

/// A parsed vector-field name.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Zero,
    /// `"const:a,b,…"` on a torus.
    Constant(Vec<f64>),
    /// `"rot:x|y|z"` or `"rot:a,b,c"`: `x ↦ ω × x` on the sphere.
    Rotation([f64; 3]),
    /// `"shear"`: `X = (1, 0)` on the 2-torus.
    Shear,
    /// `"shear:y"`: the companion `Y = (0, 2 + sin x₁)`.
    ShearCompanion,
    /// `X + Y` for the shear pair.
    ShearSum,
    /// `"seeded:k"`: a smooth random field drawn from seed `k`.
    Seeded(u64),
}

impl FieldSpec {
    pub fn parse(name: &str) -> Result<Self> {
        let (head, body) = match name.split_once(':') {
            Some((h, b)) => (h, Some(b)),
            None => (name, None),
        };
        match (head, body) {
            ("zero", None) => Ok(Self::Zero),
            ("shear", None) | ("shear", Some("x")) => Ok(Self::Shear),
            ("shear", Some("y")) => Ok(Self::ShearCompanion),
            ("shear", Some("sum")) => Ok(Self::ShearSum),
            ("const", Some(b)) => Ok(Self::Constant(parse_reals("field", name, b)?)),
            ("rot", Some(b)) => {
                let axis = match b {
                    "x" => [1.0, 0.0, 0.0],
                    "y" => [0.0, 1.0, 0.0],
                    "z" => [0.0, 0.0, 1.0],
                    _ => {
                        let v = parse_reals("field", name, b)?;
                        <[f64; 3]>::try_from(v).map_err(|_| unknown("field", name))?
                    }
                };
                Ok(Self::Rotation(axis))
            }
            ("seeded", Some(b)) => b.parse().map(Self::Seeded).map_err(|_| unknown("field", name)),
            _ => Err(unknown("field", name)),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Constant(c) => format!("const:{}", join(c)),
            Self::Rotation(w) => match w {
                [1.0, 0.0, 0.0] => "rot:x".into(),
                [0.0, 1.0, 0.0] => "rot:y".into(),
                [0.0, 0.0, 1.0] => "rot:z".into(),
                _ => format!("rot:{}", join(w)),
            },
            Self::Shear => "shear".into(),
            Self::ShearCompanion => "shear:y".into(),
            Self::ShearSum => "shear:sum".into(),
            Self::Seeded(k) => format!("seeded:{k}"),
        }
    }

    pub fn build(&self, m: &Manifold) -> Result<VectorField> {
        let name = self.name();
        let torus2 = !m.is_sphere() && m.ambient_dim() == 2;
        let mismatch = || GeoError::Domain(format!("field {name} is not defined on {}", m.name()));
        Ok(match self {
            Self::Zero => VectorField::zero(m.clone()),
            Self::Constant(c) => {
                if m.is_sphere() || c.len() != m.ambient_dim() {
                    return Err(mismatch());
                }
                let c = Vector::from_column_slice(c);
                VectorField::new(m.clone(), name, move |_| c.clone())
            }
            Self::Rotation(w) => {
                if !m.is_sphere() {
                    return Err(mismatch());
                }
                let w = Vector::from_column_slice(w);
                VectorField::new(m.clone(), name, move |y| cross(&w, y))
            }
            Self::Shear | Self::ShearCompanion | Self::ShearSum => {
                if !torus2 {
                    return Err(mismatch());
                }
                let (a, b) = match self {
                    Self::Shear => (1.0, 0.0),
                    Self::ShearCompanion => (0.0, 1.0),
                    _ => (1.0, 1.0),
                };
                VectorField::new(m.clone(), name, move |y| {
                    Vector::from_column_slice(&[a, b * (2.0 + y[0].sin())])
                })
            }
            Self::Seeded(k) => seeded_field(m, *k),
        })
    }

    /// Closed-form name of `self + other` when one exists in the registry.
    pub fn sum(&self, other: &FieldSpec) -> Option<FieldSpec> {
        match (self, other) {
            (Self::Zero, f) | (f, Self::Zero) => Some(f.clone()),
            (Self::Constant(a), Self::Constant(b)) if a.len() == b.len() => {
                Some(Self::Constant(a.iter().zip(b).map(|(p, q)| p + q).collect()))
            }
            (Self::Rotation(a), Self::Rotation(b)) => Some(Self::Rotation([a[0] + b[0], a[1] + b[1], a[2] + b[2]])),
            (Self::Shear, Self::ShearCompanion) | (Self::ShearCompanion, Self::Shear) => Some(Self::ShearSum),
            _ => None,
        }
    }

    /// Closed-form time-`t` flow from `x`, when known.
    pub fn exact_flow(&self, m: &Manifold, t: f64, x: &ManifoldPoint) -> Option<Result<ManifoldPoint>> {
        let p = x.coords();
        let raw = match self {
            Self::Zero => p.clone(),
            Self::Constant(c) if c.len() == p.len() && !m.is_sphere() => p + Vector::from_column_slice(c) * t,
            Self::Rotation(w) if m.is_sphere() => rotate(&Vector::from_column_slice(w), t, p),
            Self::Shear if p.len() == 2 => Vector::from_column_slice(&[p[0] + t, p[1]]),
            Self::ShearCompanion if p.len() == 2 => Vector::from_column_slice(&[p[0], p[1] + t * (2.0 + p[0].sin())]),
            Self::ShearSum if p.len() == 2 => {
                Vector::from_column_slice(&[p[0] + t, p[1] + 2.0 * t + p[0].cos() - (p[0] + t).cos()])
            }
            _ => return None,
        };
        Some(m.retract(&raw))
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

/// Rodrigues rotation of `p` by the flow of `x ↦ ω × x` for time `t`.
fn rotate(w: &Vector, t: f64, p: &Vector) -> Vector {
    let speed = w.norm();
    if speed == 0.0 {
        return p.clone();
    }
    let k = w / speed;
    let (s, c) = (speed * t).sin_cos();
    p * c + cross(&k, p) * s + &k * (k.dot(p) * (1.0 - c))
}

/// Resolves a field name on `m`.
pub fn vector_field(m: &Manifold, name: &str) -> Result<VectorField> {
    FieldSpec::parse(name)?.build(m)
}

/// The two fields of a Trotter experiment. A single `"shear"` stands for
/// the shear pair.
pub fn field_pair(names: &[String]) -> Result<(FieldSpec, FieldSpec)> {
    match names {
        [one] => match FieldSpec::parse(one)? {
            FieldSpec::Shear => Ok((FieldSpec::Shear, FieldSpec::ShearCompanion)),
            _ => Err(GeoError::InvalidParameter(format!(
                "two fields are needed, got only {one}"
            ))),
        },
        [a, b] => Ok((FieldSpec::parse(a)?, FieldSpec::parse(b)?)),
        _ => Err(GeoError::InvalidParameter(format!(
            "expected one or two fields, got {}",
            names.len()
        ))),
    }
}

/// `X + Y` at time `t` from `x`: closed form when the registry knows one,
/// otherwise the numerical flow of the sum at sixteen times the resolution.
pub fn reference_sum_flow(
    m: &Manifold,
    x_spec: &FieldSpec,
    y_spec: &FieldSpec,
    t: f64,
    x: &ManifoldPoint,
    params: &FlowParams,
) -> Result<ManifoldPoint> {
    if let Some(exact) = x_spec.sum(y_spec).and_then(|s| s.exact_flow(m, t, x)) {
        return exact;
    }
    let sum = x_spec.build(m)?.sum(&y_spec.build(m)?)?;
    flow(&sum, t, x, &FlowParams::new(params.steps_per_unit() * 16)?)
}

/// Random smooth field: a trigonometric polynomial on the torus,
/// `P_x(b + M x)` on the sphere.
fn seeded_field(m: &Manifold, k: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(k ^ 0x5eed_f1e1d);
    let name = format!("seeded:{k}");
    if m.is_sphere() {
        let b = Vector::from_fn(3, |_, _| 0.5 * gaussian(&mut rng));
        let mat = DMatrix::from_fn(3, 3, |_, _| 0.5 * gaussian(&mut rng));
        let sphere = m.clone();
        VectorField::new(m.clone(), name, move |y| sphere.project_ambient(y, &(&b + &mat * y)))
    } else {
        let trig = Trig::sample(m.ambient_dim(), m.ambient_dim(), &mut rng);
        VectorField::new(m.clone(), name, move |y| trig.eval(y))
    }
}

/// `v_i(x) = b_i + Σ_j a_ij sin(x_j + φ_ij)`, periodic on the torus.
struct Trig {
    b: Vector,
    a: DMatrix<f64>,
    phase: DMatrix<f64>,
}

impl Trig {
    fn sample(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            b: Vector::from_fn(rows, |_, _| 0.5 * gaussian(rng)),
            a: DMatrix::from_fn(rows, dim, |_, _| 0.5 * gaussian(rng)),
            phase: DMatrix::from_fn(rows, dim, |_, _| rng.random_range(0.0..TAU)),
        }
    }

    fn eval(&self, y: &Vector) -> Vector {
        Vector::from_fn(self.b.len(), |i, _| {
            self.b[i]
                + (0..y.len())
                    .map(|j| self.a[(i, j)] * (y[j] + self.phase[(i, j)]).sin())
                    .sum::<f64>()
        })
    }
}

/// `"one"`, `"const:c"` (c > 0), `"2+sin1"`, `"2+z"` (sphere).
pub fn scalar_field(m: &Manifold, name: &str) -> Result<ScalarField> {
    match name {
        "one" => Ok(ScalarField::constant(m.clone(), 1.0)),
        "2+sin1" => ScalarField::positive(m.clone(), name, 1.0, |y| 2.0 + y[0].sin()),
        "2+z" => {
            if !m.is_sphere() {
                return Err(GeoError::Domain(format!("{name} is defined on sphere2 only")));
            }
            ScalarField::positive(m.clone(), name, 1.0, |y| 2.0 + y[2])
        }
        _ => {
            let c = name
                .strip_prefix("const:")
                .and_then(|b| b.parse::<f64>().ok())
                .ok_or_else(|| unknown("scalar field", name))?;
            if !(c > 0.0) || !c.is_finite() {
                return Err(GeoError::InvalidParameter(format!("{name} is not positive")));
            }
            ScalarField::positive(m.clone(), name, c, move |_| c)
        }
    }
}

/// Scalar names that make sense on `m`.
pub fn scalar_names(m: &Manifold) -> Vec<&'static str> {
    if m.is_sphere() {
        vec!["one", "const:2", "2+sin1", "2+z"]
    } else {
        vec!["one", "const:2", "2+sin1"]
    }
}

pub fn bundle(name: &str) -> Result<VectorBundle> {
    VectorBundle::from_name(name)
}

/// `torus-triv2` over the 2-torus, `sphere-tangent` over the sphere.
pub fn default_bundle(m: &Manifold) -> Result<VectorBundle> {
    if m.is_sphere() {
        Ok(VectorBundle::sphere_tangent())
    } else {
        VectorBundle::trivialized(m.clone(), 2)
    }
}

/// `"zero"`, `"rotJ:a"`, `"levi-civita"` or `"twist:a"`, a position-dependent
/// form `a (sin x₂ v₁ J + cos x₁ v₂ K)` with `K = diag(1, -1)`.
pub fn connection(b: &VectorBundle, name: &str) -> Result<Connection> {
    if name == "levi-civita" {
        if b.kind() != BundleKind::SphereTangent {
            return Err(GeoError::Domain("levi-civita needs the sphere tangent bundle".into()));
        }
        return Ok(Connection::levi_civita());
    }
    if b.kind() != BundleKind::Trivialized {
        return Err(GeoError::Domain(format!("{name} needs a trivialized bundle")));
    }
    if name == "zero" {
        return Connection::flat(b.clone());
    }
    let param = |prefix: &str| -> Option<f64> {
        name.strip_prefix(prefix)
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|a| a.is_finite())
    };
    if let Some(a) = param("rotJ:") {
        return Connection::rot_j(b.clone(), a);
    }
    if let Some(a) = param("twist:") {
        if b.rank() != 2 || b.base().ambient_dim() != 2 {
            return Err(GeoError::Domain("twist needs torus-triv2".into()));
        }
        return Connection::from_form(b.clone(), name, move |x, v| {
            let j = a * x[1].sin() * v[0];
            let k = a * x[0].cos() * v[1];
            DMatrix::from_row_slice(2, 2, &[k, -j, j, -k])
        });
    }
    Err(unknown("connection", name))
}

/// `"const:e1"` (a constant vector, projected to the tangent plane on the
/// sphere), `"rotfield"` and `"seeded:k"`.
pub fn section(b: &VectorBundle, name: &str) -> Result<Section> {
    let dim = b.fiber_dim();
    let sphere = b.kind() == BundleKind::SphereTangent;
    let base = b.base().clone();
    if let Some(idx) = name.strip_prefix("const:e").and_then(|s| s.parse::<usize>().ok()) {
        if idx == 0 || idx > dim {
            return Err(unknown("section", name));
        }
        let mut e = Vector::zeros(dim);
        e[idx - 1] = 1.0;
        return Ok(if sphere {
            Section::new(b.clone(), name, move |y| base.project_ambient(y, &e))
        } else {
            Section::new(b.clone(), name, move |_| e.clone())
        });
    }
    if name == "rotfield" {
        return Ok(if sphere {
            let ez = Vector::from_column_slice(&[0.0, 0.0, 1.0]);
            Section::new(b.clone(), name, move |y| cross(&ez, y))
        } else if dim == 2 {
            Section::new(b.clone(), name, |y| {
                Vector::from_column_slice(&[y[0].cos(), y[0].sin()])
            })
        } else {
            return Err(GeoError::Domain("rotfield needs rank 2".into()));
        });
    }
    if let Some(k) = name.strip_prefix("seeded:").and_then(|s| s.parse::<u64>().ok()) {
        let mut rng = ChaCha8Rng::seed_from_u64(k ^ 0x5ec7_10e5);
        return Ok(if sphere {
            let c = Vector::from_fn(3, |_, _| gaussian(&mut rng));
            let mat = DMatrix::from_fn(3, 3, |_, _| 0.5 * gaussian(&mut rng));
            Section::new(b.clone(), name, move |y| base.project_ambient(y, &(&c + &mat * y)))
        } else {
            let trig = Trig::sample(dim, b.base().ambient_dim(), &mut rng);
            Section::new(b.clone(), name, move |y| trig.eval(y))
        });
    }
    Err(unknown("section", name))
}

/// Path names: `"equator-arc:θ"`, `"octant"`, `"rect:L,H"` and
/// `"coord-line:axis,L"` from the origin of the 2-torus (axis `x`, `y` or a
/// 1-based index), and `"const"` or `"const:c1,c2,…"`.
pub fn path(m: &Manifold, name: &str) -> Result<PathCurve> {
    let (head, body) = match name.split_once(':') {
        Some((h, b)) => (h, Some(b)),
        None => (name, None),
    };
    let need_sphere = || {
        if m.is_sphere() {
            Ok(())
        } else {
            Err(GeoError::Domain(format!("path {name} lives on sphere2")))
        }
    };
    let torus_origin = || -> Result<ManifoldPoint> {
        if m.is_sphere() {
            return Err(GeoError::Domain(format!("path {name} lives on a torus")));
        }
        m.point(&vec![0.0; m.ambient_dim()])
    };
    match (head, body) {
        ("octant", None) => {
            need_sphere()?;
            Ok(PathCurve::octant())
        }
        ("equator-arc", Some(b)) => {
            need_sphere()?;
            let theta = parse_reals("path", name, b)?;
            let [theta] = theta[..] else {
                return Err(unknown("path", name));
            };
            let x = m.point(&[1.0, 0.0, 0.0])?;
            PathCurve::great_circle(&x, &Vector::from_column_slice(&[0.0, 1.0, 0.0]), theta)
        }
        ("rect", Some(b)) => {
            let v = parse_reals("path", name, b)?;
            let [l, h] = v[..] else {
                return Err(unknown("path", name));
            };
            PathCurve::rectangle(m, &torus_origin()?, l, h)
        }
        ("coord-line", Some(b)) => {
            let (axis, len) = b.split_once(',').ok_or_else(|| unknown("path", name))?;
            let axis = match axis.trim() {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                s => s
                    .parse::<usize>()
                    .ok()
                    .and_then(|i| i.checked_sub(1))
                    .ok_or_else(|| unknown("path", name))?,
            };
            let [len] = parse_reals("path", name, len)?[..] else {
                return Err(unknown("path", name));
            };
            PathCurve::coord_line(m, &torus_origin()?, axis, len)
        }
        ("const", None) => {
            let x = if m.is_sphere() {
                m.point(&[0.0, 0.0, 1.0])?
            } else {
                torus_origin()?
            };
            PathCurve::constant(m, &x)
        }
        ("const", Some(b)) => {
            let c = parse_reals("path", name, b)?;
            PathCurve::constant(m, &m.point(&c)?)
        }
        _ => Err(unknown("path", name)),
    }
}

/// Deterministic random path for seed `k`, cycling through a single
/// closed-form segment, two joined segments, and a flow line of a seeded
/// field.
pub fn seeded_path(m: &Manifold, k: u64, params: &FlowParams) -> Result<PathCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(k ^ 0x9a7b_5eed);
    let x = m.sample_point(&mut rng);
    let segment = |rng: &mut ChaCha8Rng, from: &ManifoldPoint| -> Result<PathCurve> {
        let dir = m.sample_unit_tangent(from, rng);
        let len = rng.random_range(0.3..1.5);
        if m.is_sphere() {
            PathCurve::great_circle(from, &dir, len)
        } else {
            PathCurve::line(m, from, &(dir * len))
        }
    };
    match k % 3 {
        0 => segment(&mut rng, &x),
        1 => {
            let first = segment(&mut rng, &x)?;
            let second = segment(&mut rng, &first.end()?)?;
            first.then(&second)
        }
        _ => {
            let field = FieldSpec::Seeded(rng.random()).build(m)?;
            PathCurve::flow_line(&field, &x, rng.random_range(0.3..1.2), params)
        }
    }
}
