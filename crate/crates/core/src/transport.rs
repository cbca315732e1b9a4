//! Piecewise-smooth paths, parallel transport along them, holonomy and the
//! lift of flows to the frame bundle.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::bundle::{BundleKind, Connection, VectorBundle};
use crate::error::{GeoError, Result};
use crate::flows::{ensure_on, flow, same_manifold, FlowParams, VectorField};
use crate::manifold::{Manifold, ManifoldPoint, Vector};
use crate::ode::{rk4_step, step_count};

/// Consecutive pieces must meet within this distance.
pub const JUNCTION_TOL: f64 = 1e-10;

/// A path counts as closed when its endpoints are this close.
pub const LOOP_TOL: f64 = 1e-9;

/// Maps piece time `t` to the shape parameter `u ∈ [0, 1]` and `du/dt`.
type TimeMap = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Closed-form curve on `u ∈ [0, 1]`.
#[derive(Clone)]
pub enum Shape {
    Constant {
        point: Vector,
    },
    /// Straight line in torus coordinates.
    Line {
        start: Vector,
        displacement: Vector,
    },
    /// Great-circle arc `cos(θu) p + sin(θu) d` with `d ⊥ p` unit.
    GreatCircle {
        start: Vector,
        direction: Vector,
        angle: f64,
    },
    /// `u ↦ α_{u·duration}(start)` for the flow `α` of `field`.
    FlowLine {
        field: VectorField,
        start: ManifoldPoint,
        duration: f64,
        params: FlowParams,
    },
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Constant { point } => write!(f, "Constant({:?})", point.as_slice()),
            Shape::Line { start, displacement } => {
                write!(f, "Line({:?} + u {:?})", start.as_slice(), displacement.as_slice())
            }
            Shape::GreatCircle {
                start,
                direction,
                angle,
            } => write!(
                f,
                "GreatCircle({:?}, {:?}, {angle})",
                start.as_slice(),
                direction.as_slice()
            ),
            Shape::FlowLine {
                field, start, duration, ..
            } => {
                write!(f, "FlowLine({}, {:?}, {duration})", field.name(), start.as_slice())
            }
        }
    }
}

impl Shape {
    fn position(&self, u: f64) -> Result<Vector> {
        Ok(match self {
            Shape::Constant { point } => point.clone(),
            Shape::Line { start, displacement } => start + displacement * u,
            Shape::GreatCircle {
                start,
                direction,
                angle,
            } => {
                let (s, c) = (angle * u).sin_cos();
                start * c + direction * s
            }
            Shape::FlowLine {
                field,
                start,
                duration,
                params,
            } => flow(field, duration * u, start, params)?.into_coords(),
        })
    }

    /// `d position / du`.
    fn derivative(&self, u: f64, position: &Vector) -> Vector {
        match self {
            Shape::Constant { point } => Vector::zeros(point.len()),
            Shape::Line { displacement, .. } => displacement.clone(),
            Shape::GreatCircle {
                start,
                direction,
                angle,
            } => {
                let (s, c) = (angle * u).sin_cos();
                (direction * c - start * s) * *angle
            }
            Shape::FlowLine { field, duration, .. } => field.eval_ambient(position) * *duration,
        }
    }
}

#[derive(Clone)]
pub struct PathPiece {
    shape: Shape,
    t0: f64,
    t1: f64,
    map: TimeMap,
}

impl fmt::Debug for PathPiece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} on [{}, {}]", self.shape, self.t0, self.t1)
    }
}

impl PathPiece {
    fn linear(shape: Shape, t0: f64, t1: f64) -> Self {
        let len = t1 - t0;
        Self {
            shape,
            t0,
            t1,
            map: Arc::new(move |t| ((t - t0) / len, 1.0 / len)),
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    fn position(&self, t: f64) -> Result<Vector> {
        self.shape.position((self.map)(t).0)
    }

    fn velocity(&self, t: f64, position: &Vector) -> Vector {
        let (u, du) = (self.map)(t);
        self.shape.derivative(u, position) * du
    }

    fn shifted(&self, shift: f64) -> Self {
        let map = self.map.clone();
        Self {
            shape: self.shape.clone(),
            t0: self.t0 + shift,
            t1: self.t1 + shift,
            map: Arc::new(move |t| map(t - shift)),
        }
    }
}

/// Piecewise-smooth parametrized curve `γ: [a, b] → M`.
#[derive(Clone, Debug)]
pub struct PathCurve {
    manifold: Manifold,
    pieces: Vec<PathPiece>,
}

impl PathCurve {
    fn single(manifold: Manifold, shape: Shape, t0: f64, t1: f64) -> Self {
        Self {
            manifold,
            pieces: vec![PathPiece::linear(shape, t0, t1)],
        }
    }

    /// Constant path at `x` on `[0, 1]`.
    pub fn constant(manifold: &Manifold, x: &ManifoldPoint) -> Result<Self> {
        ensure_on(manifold, x)?;
        Ok(Self::single(
            manifold.clone(),
            Shape::Constant {
                point: x.coords().clone(),
            },
            0.0,
            1.0,
        ))
    }

    /// Straight torus segment `x + u·displacement`, `u ∈ [0, 1]`.
    pub fn line(manifold: &Manifold, x: &ManifoldPoint, displacement: &Vector) -> Result<Self> {
        if manifold.is_sphere() {
            return Err(GeoError::Domain("straight lines live on the torus".into()));
        }
        ensure_on(manifold, x)?;
        if displacement.len() != manifold.ambient_dim() {
            return Err(GeoError::Domain("displacement has the wrong dimension".into()));
        }
        Ok(Self::single(
            manifold.clone(),
            Shape::Line {
                start: x.coords().clone(),
                displacement: displacement.clone(),
            },
            0.0,
            1.0,
        ))
    }

    /// Torus coordinate line of length `length` along `axis`.
    pub fn coord_line(manifold: &Manifold, x: &ManifoldPoint, axis: usize, length: f64) -> Result<Self> {
        if axis >= manifold.ambient_dim() {
            return Err(GeoError::InvalidParameter(format!("axis {axis} out of range")));
        }
        let mut d = Vector::zeros(manifold.ambient_dim());
        d[axis] = length;
        Self::line(manifold, x, &d)
    }

    /// Great-circle arc on the unit sphere leaving `x` along the unit tangent
    /// `direction` and sweeping `angle` radians over `[0, 1]`.
    pub fn great_circle(x: &ManifoldPoint, direction: &Vector, angle: f64) -> Result<Self> {
        let m = Manifold::sphere2();
        ensure_on(&m, x)?;
        let d = m.tangent_project(x, direction).components;
        let n = d.norm();
        if !(n > 1e-12) || !angle.is_finite() {
            return Err(GeoError::InvalidParameter("degenerate great-circle direction".into()));
        }
        Ok(Self::single(
            m,
            Shape::GreatCircle {
                start: x.coords().clone(),
                direction: d / n,
                angle,
            },
            0.0,
            1.0,
        ))
    }

    /// Shortest great-circle arc from `a` to `b` (not antipodal).
    pub fn geodesic_between(a: &ManifoldPoint, b: &ManifoldPoint) -> Result<Self> {
        let m = Manifold::sphere2();
        ensure_on(&m, a)?;
        ensure_on(&m, b)?;
        let (p, q) = (a.coords(), b.coords());
        let d = q - p * p.dot(q);
        let n = d.norm();
        if n < 1e-12 {
            return Err(GeoError::InvalidParameter(
                "geodesic endpoints coincide or are antipodal".into(),
            ));
        }
        let angle = n.atan2(p.dot(q));
        Self::great_circle(a, &(d / n), angle)
    }

    /// `s ↦ α_s(x)` for `s` from 0 to `duration` (either sign), on the domain
    /// `[0, |duration|]`.
    pub fn flow_line(field: &VectorField, x: &ManifoldPoint, duration: f64, params: &FlowParams) -> Result<Self> {
        ensure_on(field.manifold(), x)?;
        let len = duration.abs();
        if !(len > 0.0) || !len.is_finite() {
            return Err(GeoError::InvalidParameter(format!(
                "flow-line duration must be nonzero and finite, got {duration}"
            )));
        }
        Ok(Self::single(
            field.manifold().clone(),
            Shape::FlowLine {
                field: field.clone(),
                start: x.clone(),
                duration,
                params: *params,
            },
            0.0,
            len,
        ))
    }

    /// Geodesic triangle `(1,0,0) → (0,1,0) → (0,0,1) → (1,0,0)` bounding one
    /// octant, one unit of parameter time per side.
    pub fn octant() -> Self {
        let m = Manifold::sphere2();
        let e = |i: usize| {
            let mut v = Vector::zeros(3);
            v[i] = 1.0;
            v
        };
        let pieces = (0..3)
            .map(|i| {
                PathPiece::linear(
                    Shape::GreatCircle {
                        start: e(i),
                        direction: e((i + 1) % 3),
                        angle: std::f64::consts::FRAC_PI_2,
                    },
                    i as f64,
                    i as f64 + 1.0,
                )
            })
            .collect();
        Self { manifold: m, pieces }
    }

    /// Torus rectangle `x → x+(L,0) → x+(L,H) → x+(0,H) → x`.
    pub fn rectangle(manifold: &Manifold, x: &ManifoldPoint, length: f64, height: f64) -> Result<Self> {
        if manifold.ambient_dim() != 2 || manifold.is_sphere() {
            return Err(GeoError::Domain("rectangles need the 2-torus".into()));
        }
        let legs = [[length, 0.0], [0.0, height], [-length, 0.0], [0.0, -height]];
        let mut path: Option<PathCurve> = None;
        for leg in legs {
            let start = match &path {
                Some(p) => p.end()?,
                None => x.clone(),
            };
            let seg = Self::line(manifold, &start, &Vector::from_column_slice(&leg))?;
            path = Some(match path {
                Some(p) => p.then(&seg)?,
                None => seg,
            });
        }
        Ok(path.expect("four legs"))
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn pieces(&self) -> &[PathPiece] {
        &self.pieces
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.pieces[0].t0, self.pieces[self.pieces.len() - 1].t1)
    }

    fn piece_at(&self, t: f64) -> &PathPiece {
        self.pieces
            .iter()
            .find(|p| t <= p.t1)
            .unwrap_or(&self.pieces[self.pieces.len() - 1])
    }

    pub fn position(&self, t: f64) -> Result<ManifoldPoint> {
        self.manifold.retract(&self.piece_at(t).position(t)?)
    }

    pub fn velocity(&self, t: f64) -> Result<Vector> {
        let piece = self.piece_at(t);
        let p = piece.position(t)?;
        Ok(piece.velocity(t, &p))
    }

    pub fn start(&self) -> Result<ManifoldPoint> {
        let p = &self.pieces[0];
        self.manifold.retract(&p.position(p.t0)?)
    }

    pub fn end(&self) -> Result<ManifoldPoint> {
        let p = &self.pieces[self.pieces.len() - 1];
        self.manifold.retract(&p.position(p.t1)?)
    }

    /// Juxtaposition `other ⋆ self`: run `self`, then `other` (shifted in
    /// time so the domains abut).
    pub fn then(&self, other: &PathCurve) -> Result<PathCurve> {
        same_manifold(&self.manifold, &other.manifold)?;
        let gap = self.manifold.distance(&self.end()?, &other.start()?);
        if gap > JUNCTION_TOL {
            return Err(GeoError::Domain(format!("paths do not meet: gap {gap:e}")));
        }
        let shift = self.domain().1 - other.domain().0;
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().map(|p| p.shifted(shift)));
        Ok(Self {
            manifold: self.manifold.clone(),
            pieces,
        })
    }

    /// `t ↦ γ(a + b - t)`.
    pub fn reversed(&self) -> PathCurve {
        let (a, b) = self.domain();
        let pieces = self
            .pieces
            .iter()
            .rev()
            .map(|p| {
                let map = p.map.clone();
                PathPiece {
                    shape: p.shape.clone(),
                    t0: a + b - p.t1,
                    t1: a + b - p.t0,
                    map: Arc::new(move |t| {
                        let (u, du) = map(a + b - t);
                        (u, -du)
                    }),
                }
            })
            .collect();
        Self {
            manifold: self.manifold.clone(),
            pieces,
        }
    }

    /// Restriction to `[a, b]` inside the domain.
    pub fn restrict(&self, a: f64, b: f64) -> Result<PathCurve> {
        let (lo, hi) = self.domain();
        if !(a >= lo && b <= hi && a < b) {
            return Err(GeoError::InvalidParameter(format!(
                "[{a}, {b}] is not a subinterval of [{lo}, {hi}]"
            )));
        }
        let pieces: Vec<_> = self
            .pieces
            .iter()
            .filter(|p| p.t1 > a && p.t0 < b)
            .map(|p| PathPiece {
                shape: p.shape.clone(),
                t0: p.t0.max(a),
                t1: p.t1.min(b),
                map: p.map.clone(),
            })
            .collect();
        Ok(Self {
            manifold: self.manifold.clone(),
            pieces,
        })
    }

    /// `(γ|[a, t], γ|[t, b])`.
    pub fn split(&self, t: f64) -> Result<(PathCurve, PathCurve)> {
        let (a, b) = self.domain();
        if !(t > a && t < b) {
            return Err(GeoError::DegenerateSplit { t, start: a, end: b });
        }
        Ok((self.restrict(a, t)?, self.restrict(t, b)?))
    }

    /// `γ ∘ φ`.
    pub fn reparametrize(&self, phi: &Reparametrization) -> Result<PathCurve> {
        phi.validate()?;
        let (a, b) = self.domain();
        let (na, nb) = phi.new_domain(a, b);
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let t0 = if p.t0 == a { na } else { phi.inverse(p.t0, a, b) };
                let t1 = if p.t1 == b { nb } else { phi.inverse(p.t1, a, b) };
                let map = p.map.clone();
                let phi = *phi;
                PathPiece {
                    shape: p.shape.clone(),
                    t0,
                    t1,
                    map: Arc::new(move |t| {
                        let (s, ds) = phi.eval(t, a, b);
                        let (u, du) = map(s);
                        (u, du * ds)
                    }),
                }
            })
            .collect();
        Ok(Self {
            manifold: self.manifold.clone(),
            pieces,
        })
    }

    /// Largest position jump at a junction between consecutive pieces.
    pub fn junction_gap(&self) -> Result<f64> {
        let mut gap: f64 = 0.0;
        for w in self.pieces.windows(2) {
            let a = self.manifold.retract(&w[0].position(w[0].t1)?)?;
            let b = self.manifold.retract(&w[1].position(w[1].t0)?)?;
            gap = gap.max(self.manifold.distance(&a, &b));
        }
        Ok(gap)
    }
}

/// Orientation-preserving reparametrizations `φ` of a path domain `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reparametrization {
    Identity,
    /// New domain `[shift, shift + factor (b - a)]`, mapped affinely onto `[a, b]`.
    Affine {
        factor: f64,
        shift: f64,
    },
    /// `u ↦ u + amplitude · sin(2πu)` on the normalized domain.
    Sine {
        amplitude: f64,
    },
}

impl Reparametrization {
    /// `"identity"`, `"affine"` (factor 2, shift 0.5) or `"sine"` (amplitude 0.1).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(Self::Identity),
            "affine" => Ok(Self::Affine {
                factor: 2.0,
                shift: 0.5,
            }),
            "sine" => Ok(Self::Sine { amplitude: 0.1 }),
            _ => Err(GeoError::UnknownName {
                kind: "reparametrization",
                name: name.to_string(),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Identity => Ok(()),
            Self::Affine { factor, shift } => {
                if factor > 0.0 && factor.is_finite() && shift.is_finite() {
                    Ok(())
                } else {
                    Err(GeoError::InvalidReparametrization(format!(
                        "affine factor must be positive, got {factor}"
                    )))
                }
            }
            Self::Sine { amplitude } => {
                // φ' = 1 + 2π a cos(2πu) > 0 everywhere iff 2π|a| < 1
                if TAU * amplitude.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(GeoError::InvalidReparametrization(format!(
                        "sine amplitude {amplitude} makes the map non-monotone"
                    )))
                }
            }
        }
    }

    fn new_domain(&self, a: f64, b: f64) -> (f64, f64) {
        match *self {
            Self::Affine { factor, shift } => (shift, shift + factor * (b - a)),
            _ => (a, b),
        }
    }

    /// `(φ(t), φ'(t))` for the path domain `[a, b]`.
    fn eval(&self, t: f64, a: f64, b: f64) -> (f64, f64) {
        match *self {
            Self::Identity => (t, 1.0),
            Self::Affine { factor, shift } => (a + (t - shift) / factor, 1.0 / factor),
            Self::Sine { amplitude } => {
                let len = b - a;
                let u = (t - a) / len;
                let (s, c) = (TAU * u).sin_cos();
                (a + len * (u + amplitude * s), 1.0 + amplitude * TAU * c)
            }
        }
    }

    fn inverse(&self, s: f64, a: f64, b: f64) -> f64 {
        let (mut lo, mut hi) = self.new_domain(a, b);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid, a, b).0 < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Linear map `E_source → E_target` written in the bundle's fiber frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap {
    source: ManifoldPoint,
    target: ManifoldPoint,
    matrix: DMatrix<f64>,
}

pub(crate) fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

impl TransportMap {
    pub fn source(&self) -> &ManifoldPoint {
        &self.source
    }

    pub fn target(&self) -> &ManifoldPoint {
        &self.target
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &TransportMap) -> TransportMap {
        TransportMap {
            source: self.source.clone(),
            target: next.target.clone(),
            matrix: &next.matrix * &self.matrix,
        }
    }

    pub fn inverse(&self) -> Result<TransportMap> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| GeoError::Singular("transport matrix is not invertible".into()))?;
        Ok(TransportMap {
            source: self.target.clone(),
            target: self.source.clone(),
            matrix: inv,
        })
    }

    /// Operator-norm distance between the matrices.
    pub fn distance(&self, other: &TransportMap) -> f64 {
        operator_norm(&(&self.matrix - &other.matrix))
    }

    pub fn distance_from_identity(&self) -> f64 {
        let n = self.matrix.nrows();
        operator_norm(&(&self.matrix - DMatrix::identity(n, n)))
    }

    /// `‖MᵀM - I‖`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.matrix.ncols();
        operator_norm(&(self.matrix.transpose() * &self.matrix - DMatrix::identity(n, n)))
    }

    /// Rotation angle `atan2(m₁₀, m₀₀)` of a rank-2 map, measured in the
    /// frame orientation.
    pub fn rotation_angle(&self) -> Option<f64> {
        (self.matrix.nrows() == 2 && self.matrix.ncols() == 2).then(|| self.matrix[(1, 0)].atan2(self.matrix[(0, 0)]))
    }
}

fn check_path(c: &Connection, path: &PathCurve) -> Result<()> {
    if path.manifold() != c.bundle().base() {
        return Err(GeoError::Domain(format!(
            "path lives on {}, connection on {}",
            path.manifold().name(),
            c.bundle().base().name()
        )));
    }
    Ok(())
}

fn transport_piece(
    c: &Connection,
    piece: &PathPiece,
    columns: DMatrix<f64>,
    params: &FlowParams,
) -> Result<DMatrix<f64>> {
    let span = piece.t1 - piece.t0;
    let steps = step_count(span, params.steps_per_unit());
    let dt = span / steps as f64;
    match &piece.shape {
        Shape::FlowLine { field, duration, .. } => {
            // base point and fiber integrated together
            let m = field.manifold();
            let mut rhs = |t: f64, state: &(Vector, DMatrix<f64>)| -> Result<(Vector, DMatrix<f64>)> {
                let (_, du) = (piece.map)(t);
                let vel = field.eval_checked(&state.0)? * (duration * du);
                let dv = -(c.transport_generator(&state.0, &vel) * &state.1);
                Ok((vel, dv))
            };
            let mut state = (piece.position(piece.t0)?, columns);
            for i in 0..steps {
                let t = piece.t0 + i as f64 * dt;
                let (y, v) = rk4_step(&mut rhs, t, &state, dt)?;
                state = (m.retract_continuous(y)?, v);
            }
            Ok(state.1)
        }
        _ => {
            let mut rhs = |t: f64, v: &DMatrix<f64>| -> Result<DMatrix<f64>> {
                let p = piece.position(t)?;
                let vel = piece.velocity(t, &p);
                Ok(-(c.transport_generator(&p, &vel) * v))
            };
            let mut v = columns;
            for i in 0..steps {
                let t = piece.t0 + i as f64 * dt;
                v = rk4_step(&mut rhs, t, &v, dt)?;
            }
            Ok(v)
        }
    }
}

/// Transports stored fiber vectors (the columns of `columns`, each in the
/// fiber over `γ(a)`) to the fiber over `γ(b)`.
pub fn transport_vectors(
    c: &Connection,
    path: &PathCurve,
    columns: &DMatrix<f64>,
    params: &FlowParams,
) -> Result<DMatrix<f64>> {
    check_path(c, path)?;
    if columns.nrows() != c.bundle().fiber_dim() {
        return Err(GeoError::Domain(format!(
            "fiber vectors need {} rows, got {}",
            c.bundle().fiber_dim(),
            columns.nrows()
        )));
    }
    let mut v = columns.clone();
    for piece in path.pieces() {
        v = transport_piece(c, piece, v, params)?;
    }
    Ok(v)
}

/// `𝒫(γ)`: solves `ds/dt + A(γ, γ̇) s = 0` piecewise (ambient Levi-Civita
/// form `ṡ = -(γ̇·s) γ` on the sphere) and returns the endpoint map in the
/// bundle's fiber frames.
pub fn parallel_transport(c: &Connection, path: &PathCurve, params: &FlowParams) -> Result<TransportMap> {
    check_path(c, path)?;
    let bundle = c.bundle();
    let source = path.start()?;
    let target = path.end()?;
    let moved = transport_vectors(c, path, &bundle.frame_at(source.coords()), params)?;
    let matrix = match bundle.kind() {
        BundleKind::Trivialized => moved,
        BundleKind::SphereTangent => bundle.frame_at(target.coords()).transpose() * moved,
    };
    Ok(TransportMap { source, target, matrix })
}

/// `‖𝒫(constant path at x) - 1‖`.
pub fn check_constant_axiom(c: &Connection, x: &ManifoldPoint, params: &FlowParams) -> Result<f64> {
    let path = PathCurve::constant(c.bundle().base(), x)?;
    Ok(parallel_transport(c, &path, params)?.distance_from_identity())
}

/// `‖𝒫(γ ∘ φ) - 𝒫(γ)‖`.
pub fn check_reparam_axiom(
    c: &Connection,
    path: &PathCurve,
    phi: &Reparametrization,
    params: &FlowParams,
) -> Result<f64> {
    phi.validate()?;
    if *phi == Reparametrization::Identity {
        return Ok(0.0);
    }
    let direct = parallel_transport(c, path, params)?;
    let reparam = parallel_transport(c, &path.reparametrize(phi)?, params)?;
    Ok(direct.distance(&reparam))
}

/// `‖𝒫(γ) - 𝒫(γ|₂) ∘ 𝒫(γ|₁)‖` with `γ` split at `t_split`.
pub fn check_juxtaposition_axiom(c: &Connection, path: &PathCurve, t_split: f64, params: &FlowParams) -> Result<f64> {
    let (first, second) = path.split(t_split)?;
    let whole = parallel_transport(c, path, params)?;
    let composed = parallel_transport(c, &first, params)?.then(&parallel_transport(c, &second, params)?);
    Ok(whole.distance(&composed))
}

/// Transport around a closed loop.
pub fn holonomy(c: &Connection, path: &PathCurve, params: &FlowParams) -> Result<TransportMap> {
    check_path(c, path)?;
    let gap = path.manifold().distance(&path.start()?, &path.end()?);
    if gap > LOOP_TOL {
        return Err(GeoError::NotALoop { gap });
    }
    parallel_transport(c, path, params)
}

/// A point of the frame bundle: a basis of the fiber over `base`, stored as
/// columns. `GL(rank)` acts on the right by mixing columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    base: ManifoldPoint,
    columns: DMatrix<f64>,
}

impl Frame {
    pub fn new(bundle: &VectorBundle, base: ManifoldPoint, columns: DMatrix<f64>) -> Result<Self> {
        ensure_on(bundle.base(), &base)?;
        if columns.nrows() != bundle.fiber_dim() || columns.ncols() != bundle.rank() {
            return Err(GeoError::Domain(format!(
                "frame must be {}x{}, got {}x{}",
                bundle.fiber_dim(),
                bundle.rank(),
                columns.nrows(),
                columns.ncols()
            )));
        }
        for col in columns.column_iter() {
            if bundle.fiber_residual(base.coords(), &col.into_owned()) > 1e-10 {
                return Err(GeoError::Domain("frame column is not in the fiber".into()));
            }
        }
        let smallest = columns.clone().svd(false, false).singular_values.min();
        if !(smallest >= 1e-8) {
            return Err(GeoError::Singular(format!(
                "frame columns are dependent (smallest singular value {smallest:e})"
            )));
        }
        Ok(Self { base, columns })
    }

    /// The bundle's orthonormal reference frame at `x`.
    pub fn standard(bundle: &VectorBundle, x: &ManifoldPoint) -> Result<Self> {
        Self::new(bundle, x.clone(), bundle.frame_at(x.coords()))
    }

    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// `F · g`.
    pub fn right_act(&self, g: &DMatrix<f64>) -> Result<Frame> {
        if g.nrows() != self.columns.ncols() || g.ncols() != self.columns.ncols() {
            return Err(GeoError::Domain("group element has the wrong size".into()));
        }
        if g.clone().try_inverse().is_none() {
            return Err(GeoError::Singular("group element is not invertible".into()));
        }
        Ok(Frame {
            base: self.base.clone(),
            columns: &self.columns * g,
        })
    }

    /// Largest column-wise distance, plus the base-point distance.
    pub fn distance(&self, other: &Frame, manifold: &Manifold) -> f64 {
        let cols = (&self.columns - &other.columns)
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        cols.max(manifold.distance(&self.base, &other.base))
    }
}

/// `α̃_t(F)`: moves the frame along the flow line of `X` through its base
/// point, transporting every column.
pub fn lift_flow_to_frames(
    c: &Connection,
    field: &VectorField,
    t: f64,
    frame: &Frame,
    params: &FlowParams,
) -> Result<Frame> {
    same_manifold(c.bundle().base(), field.manifold())?;
    if t == 0.0 {
        return Ok(frame.clone());
    }
    let path = PathCurve::flow_line(field, frame.base(), t, params)?;
    let columns = transport_vectors(c, &path, frame.columns(), params)?;
    Ok(Frame {
        base: flow(field, t, frame.base(), params)?,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::cross;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn torus() -> Manifold {
        Manifold::flat_torus(2).unwrap()
    }

    fn rot_j(a: f64) -> Connection {
        Connection::rot_j(VectorBundle::from_name("torus-triv2").unwrap(), a).unwrap()
    }

    fn rotation(theta: f64) -> DMatrix<f64> {
        let (s, c) = theta.sin_cos();
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    }

    #[test]
    fn constant_path_transports_to_identity() {
        let p = FlowParams::default();
        let lc = Connection::levi_civita();
        let x = Manifold::sphere2().point(&[0.0, 0.0, 1.0]).unwrap();
        assert!(check_constant_axiom(&lc, &x, &p).unwrap() <= 1e-12);
        let y = torus().random_point(3);
        assert!(check_constant_axiom(&rot_j(0.3), &y, &p).unwrap() <= 1e-12);
    }

    #[test]
    fn straight_line_under_rot_j_is_a_rotation() {
        let (a, len) = (0.3, 1.7);
        let x = torus().point(&[0.2, 0.4]).unwrap();
        let path = PathCurve::coord_line(&torus(), &x, 0, len).unwrap();
        let m = parallel_transport(&rot_j(a), &path, &FlowParams::default()).unwrap();
        assert!((m.matrix() - rotation(-a * len)).abs().max() < 1e-12);
    }

    #[test]
    fn equator_transport_keeps_north() {
        let x = Manifold::sphere2().point(&[1.0, 0.0, 0.0]).unwrap();
        let path = PathCurve::great_circle(&x, &v(&[0.0, 1.0, 0.0]), FRAC_PI_2).unwrap();
        let out = transport_vectors(
            &Connection::levi_civita(),
            &path,
            &DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]),
            &FlowParams::default(),
        )
        .unwrap();
        assert!((out.column(0) - v(&[0.0, 0.0, 1.0])).norm() <= 1e-8);
        assert!((path.end().unwrap().coords() - v(&[0.0, 1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn identity_reparametrization_is_exact() {
        let path = PathCurve::octant();
        let r = check_reparam_axiom(
            &Connection::levi_civita(),
            &path,
            &Reparametrization::Identity,
            &FlowParams::default(),
        );
        assert_eq!(r.unwrap(), 0.0);
    }

    #[test]
    fn non_monotone_reparametrization_rejected() {
        let path = PathCurve::octant();
        let bad = Reparametrization::Sine { amplitude: 0.3 };
        assert!(matches!(
            check_reparam_axiom(&Connection::levi_civita(), &path, &bad, &FlowParams::default()),
            Err(GeoError::InvalidReparametrization(_))
        ));
        assert!(Reparametrization::Affine {
            factor: -1.0,
            shift: 0.0
        }
        .validate()
        .is_err());
        assert!(Reparametrization::from_name("wiggle").is_err());
    }

    #[test]
    fn affine_reparam_of_straight_line() {
        let x = torus().point(&[1.0, 2.0]).unwrap();
        let path = PathCurve::coord_line(&torus(), &x, 0, 2.0).unwrap();
        let phi = Reparametrization::from_name("affine").unwrap();
        let r = check_reparam_axiom(&rot_j(0.3), &path, &phi, &FlowParams::default()).unwrap();
        assert!(r <= 1e-9);
    }

    #[test]
    fn reparametrized_path_keeps_image_and_endpoints() {
        let path = PathCurve::octant();
        let phi = Reparametrization::from_name("sine").unwrap();
        let q = path.reparametrize(&phi).unwrap();
        assert_eq!(q.domain(), path.domain());
        assert!(q.junction_gap().unwrap() < 1e-12);
        let m = Manifold::sphere2();
        for t in [0.0, 0.37, 1.5, 2.2, 3.0] {
            let (s, _) = phi.eval(t, 0.0, 3.0);
            assert!(m.distance(&q.position(t).unwrap(), &path.position(s).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn juxtaposition_on_constant_and_straight_paths() {
        let p = FlowParams::default();
        let x = torus().point(&[0.1, 0.2]).unwrap();
        let c = rot_j(0.3);
        let constant = PathCurve::constant(&torus(), &x).unwrap();
        assert!(check_juxtaposition_axiom(&c, &constant, 0.5, &p).unwrap() <= 1e-12);
        let line = PathCurve::coord_line(&torus(), &x, 0, 3.0).unwrap();
        assert!(check_juxtaposition_axiom(&c, &line, 0.37, &p).unwrap() <= 1e-9);
    }

    #[test]
    fn split_at_boundary_is_degenerate() {
        let path = PathCurve::octant();
        let c = Connection::levi_civita();
        let p = FlowParams::default();
        for t in [0.0, 3.0, -1.0] {
            assert!(matches!(
                check_juxtaposition_axiom(&c, &path, t, &p),
                Err(GeoError::DegenerateSplit { .. })
            ));
        }
    }

    #[test]
    fn holonomy_needs_a_loop() {
        let x = Manifold::sphere2().point(&[1.0, 0.0, 0.0]).unwrap();
        let arc = PathCurve::great_circle(&x, &v(&[0.0, 1.0, 0.0]), 1.0).unwrap();
        assert!(matches!(
            holonomy(&Connection::levi_civita(), &arc, &FlowParams::default()),
            Err(GeoError::NotALoop { .. })
        ));
    }

    #[test]
    fn octant_holonomy_is_quarter_turn() {
        let h = holonomy(&Connection::levi_civita(), &PathCurve::octant(), &FlowParams::default()).unwrap();
        assert!((h.rotation_angle().unwrap() - FRAC_PI_2).abs() <= 1e-4);
        assert!(h.orthogonality_defect() <= 1e-7);
    }

    #[test]
    fn rectangle_holonomy_cancels_for_rot_j() {
        let x = torus().point(&[0.0, 0.0]).unwrap();
        let rect = PathCurve::rectangle(&torus(), &x, 1.3, 0.7).unwrap();
        let h = holonomy(&rot_j(0.3), &rect, &FlowParams::default()).unwrap();
        assert!(h.distance_from_identity() <= 1e-8);
    }

    #[test]
    fn path_on_wrong_manifold_is_rejected() {
        let r = parallel_transport(&rot_j(0.3), &PathCurve::octant(), &FlowParams::default());
        assert!(matches!(r, Err(GeoError::Domain(_))));
    }

    #[test]
    fn lift_at_zero_time_and_flat_connection() {
        let bundle = VectorBundle::from_name("torus-triv2").unwrap();
        let flat = Connection::flat(bundle.clone()).unwrap();
        let field = VectorField::new(torus(), "X", |y| v(&[1.0, y[0].cos()]));
        let x = torus().random_point(8);
        let f = Frame::new(&bundle, x.clone(), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0])).unwrap();
        let p = FlowParams::default();
        assert_eq!(lift_flow_to_frames(&flat, &field, 0.0, &f, &p).unwrap(), f);
        let lifted = lift_flow_to_frames(&flat, &field, 0.8, &f, &p).unwrap();
        assert_eq!(lifted.columns(), f.columns());
        assert!(torus().distance(lifted.base(), &flow(&field, 0.8, &x, &p).unwrap()) < 1e-14);
    }

    #[test]
    fn degenerate_frames_rejected() {
        let bundle = VectorBundle::sphere_tangent();
        let x = Manifold::sphere2().point(&[0.0, 0.0, 1.0]).unwrap();
        let dependent = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert!(matches!(
            Frame::new(&bundle, x.clone(), dependent),
            Err(GeoError::Singular(_))
        ));
        let normal = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(Frame::new(&bundle, x, normal).is_err());
    }

    #[test]
    fn lift_along_rotation_moves_equator_frame() {
        // Along the equator (a geodesic) the velocity and the normal e_z are parallel.
        let c = Connection::levi_civita();
        let field = VectorField::new(Manifold::sphere2(), "rot:z", |y| cross(&v(&[0.0, 0.0, 1.0]), y));
        let x = Manifold::sphere2().point(&[1.0, 0.0, 0.0]).unwrap();
        let f = Frame::standard(c.bundle(), &x).unwrap();
        let lifted = lift_flow_to_frames(&c, &field, PI, &f, &FlowParams::default()).unwrap();
        let expected = DMatrix::from_column_slice(3, 2, &[0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((lifted.columns() - expected).abs().max() < 1e-9);
    }

    #[test]
    fn reversal_and_concatenation() {
        let path = PathCurve::octant();
        let rev = path.reversed();
        let m = Manifold::sphere2();
        assert!(m.distance(&rev.start().unwrap(), &path.end().unwrap()) < 1e-15);
        assert!(m.distance(&rev.position(0.4).unwrap(), &path.position(2.6).unwrap()) < 1e-15);
        assert!((rev.velocity(0.4).unwrap() + path.velocity(2.6).unwrap()).norm() < 1e-15);
        let x = m.point(&[1.0, 0.0, 0.0]).unwrap();
        let far = PathCurve::great_circle(&m.point(&[0.0, 0.0, 1.0]).unwrap(), &v(&[1.0, 0.0, 0.0]), 1.0).unwrap();
        assert!(PathCurve::constant(&m, &x).unwrap().then(&far).is_err());
    }
}
