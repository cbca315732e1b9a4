//! Flows of vector fields and the two flow formulas built on them: the
//! zig-zag (Trotter) composition for `X + Y` and the time change realizing
//! the flow of `fX` as `α(s(t, x), x)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{GeoError, Result};
use crate::manifold::{Manifold, ManifoldPoint, TangentVector, Vector};
use crate::ode::{rk4_step, step_count};

type FieldFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type ScalarFn = dyn Fn(&Vector) -> f64 + Send + Sync;

/// A smooth tangent vector field, given by an ambient formula that is
/// evaluated at ambient coordinates (integrator stage points may sit
/// slightly off the manifold).
#[derive(Clone)]
pub struct VectorField {
    manifold: Manifold,
    name: String,
    eval: Arc<FieldFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("manifold", &self.manifold.name())
            .field("name", &self.name)
            .finish()
    }
}

impl VectorField {
    pub fn new<F>(manifold: Manifold, name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            manifold,
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn zero(manifold: Manifold) -> Self {
        let dim = manifold.ambient_dim();
        Self::new(manifold, "zero", move |_| Vector::zeros(dim))
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &ManifoldPoint) -> TangentVector {
        TangentVector {
            base: x.clone(),
            components: (self.eval)(x.coords()),
        }
    }

    pub fn eval_ambient(&self, y: &Vector) -> Vector {
        (self.eval)(y)
    }

    pub(crate) fn eval_checked(&self, y: &Vector) -> Result<Vector> {
        let v = (self.eval)(y);
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(GeoError::Integration {
                field: self.name.clone(),
                point: y.as_slice().to_vec(),
            })
        }
    }

    /// `X + Y`.
    pub fn sum(&self, other: &VectorField) -> Result<VectorField> {
        same_manifold(&self.manifold, &other.manifold)?;
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Ok(Self::new(
            self.manifold.clone(),
            format!("{}+{}", self.name, other.name),
            move |y| a(y) + b(y),
        ))
    }

    /// `fX`.
    pub fn scaled(&self, f: &ScalarField) -> Result<VectorField> {
        same_manifold(&self.manifold, &f.manifold)?;
        let (a, g) = (self.eval.clone(), f.eval.clone());
        Ok(Self::new(
            self.manifold.clone(),
            format!("({})*{}", f.name, self.name),
            move |y| a(y) * g(y),
        ))
    }

    /// `c X` for a constant `c`; `c = -1` gives the reversed field.
    pub fn times(&self, c: f64) -> VectorField {
        let a = self.eval.clone();
        Self::new(self.manifold.clone(), format!("{c}*{}", self.name), move |y| a(y) * c)
    }
}

#[derive(Clone)]
pub struct ScalarField {
    manifold: Manifold,
    name: String,
    eval: Arc<ScalarFn>,
    positivity_floor: Option<f64>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("manifold", &self.manifold.name())
            .field("name", &self.name)
            .field("positivity_floor", &self.positivity_floor)
            .finish()
    }
}

impl ScalarField {
    /// A function with no positivity claim.
    pub fn new<F>(manifold: Manifold, name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        Self {
            manifold,
            name: name.into(),
            eval: Arc::new(eval),
            positivity_floor: None,
        }
    }

    /// A function claimed to satisfy `f ≥ floor > 0` everywhere.
    pub fn positive<F>(manifold: Manifold, name: impl Into<String>, floor: f64, eval: F) -> Result<Self>
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        if !(floor > 0.0) {
            return Err(GeoError::InvalidParameter(format!(
                "positivity floor must be > 0, got {floor}"
            )));
        }
        Ok(Self {
            positivity_floor: Some(floor),
            ..Self::new(manifold, name, eval)
        })
    }

    pub fn constant(manifold: Manifold, c: f64) -> Self {
        let s = Self::new(manifold, format!("const:{c}"), move |_| c);
        if c > 0.0 {
            Self {
                positivity_floor: Some(c),
                ..s
            }
        } else {
            s
        }
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn positivity_floor(&self) -> Option<f64> {
        self.positivity_floor
    }

    pub fn eval(&self, x: &ManifoldPoint) -> f64 {
        (self.eval)(x.coords())
    }

    pub fn eval_ambient(&self, y: &Vector) -> f64 {
        (self.eval)(y)
    }

    pub(crate) fn eval_positive(&self, y: &Vector) -> Result<f64> {
        let v = (self.eval)(y);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(GeoError::PositivityViolation {
                field: self.name.clone(),
                point: y.as_slice().to_vec(),
                value: v,
            })
        }
    }

    /// Checks the positivity floor at `samples` seeded random points.
    pub fn check_floor(&self, samples: usize, seed: u64) -> Result<()> {
        let floor = self
            .positivity_floor
            .ok_or_else(|| GeoError::InvalidParameter(format!("{} declares no positivity floor", self.name)))?;
        for i in 0..samples as u64 {
            let x = self.manifold.random_point(seed.wrapping_add(i));
            let v = self.eval(&x);
            if !(v >= floor) {
                return Err(GeoError::PositivityViolation {
                    field: self.name.clone(),
                    point: x.as_slice().to_vec(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// Integration resolution. The scheme is always classical RK4 with a
/// retraction after every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowParams {
    steps_per_unit: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self { steps_per_unit: 1000 }
    }
}

impl FlowParams {
    pub fn new(steps_per_unit: usize) -> Result<Self> {
        if steps_per_unit == 0 {
            return Err(GeoError::InvalidParameter(
                "step_count_per_unit_time must be at least 1".into(),
            ));
        }
        Ok(Self { steps_per_unit })
    }

    pub fn steps_per_unit(&self) -> usize {
        self.steps_per_unit
    }

    pub(crate) fn steps_for(&self, span: f64) -> usize {
        step_count(span, self.steps_per_unit)
    }
}

pub(crate) fn same_manifold(a: &Manifold, b: &Manifold) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(GeoError::Domain(format!("{} vs {}", a.name(), b.name())))
    }
}

pub(crate) fn ensure_on(m: &Manifold, x: &ManifoldPoint) -> Result<()> {
    if m.contains(x) {
        Ok(())
    } else {
        Err(GeoError::Domain(format!(
            "point {:?} is not on {}",
            x.as_slice(),
            m.name()
        )))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(GeoError::InvalidParameter(format!("time must be finite, got {t}")))
    }
}

/// `α_t(x)`: the time-`t` flow of `field` from `x`. Negative `t` runs the
/// flow backwards.
pub fn flow(field: &VectorField, t: f64, x: &ManifoldPoint, params: &FlowParams) -> Result<ManifoldPoint> {
    let m = field.manifold();
    ensure_on(m, x)?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(x.clone());
    }
    let steps = params.steps_for(t);
    let dt = t / steps as f64;
    let mut rhs = |_t: f64, y: &Vector| field.eval_checked(y);
    let mut p = x.clone();
    for _ in 0..steps {
        let next = rk4_step(&mut rhs, 0.0, p.coords(), dt)?;
        p = m.retract(&next)?;
    }
    Ok(p)
}

/// `(α_{t/n} ∘ β_{t/n})^n (x)` where `α`, `β` are the flows of `x_field`
/// and `y_field`; `β` acts first inside each factor.
pub fn trotter_flow(
    x_field: &VectorField,
    y_field: &VectorField,
    t: f64,
    x: &ManifoldPoint,
    n: usize,
    params: &FlowParams,
) -> Result<ManifoldPoint> {
    if n == 0 {
        return Err(GeoError::InvalidParameter("Trotter factor count must be >= 1".into()));
    }
    same_manifold(x_field.manifold(), y_field.manifold())?;
    let tau = t / n as f64;
    let mut p = x.clone();
    for _ in 0..n {
        p = flow(y_field, tau, &p, params)?;
        p = flow(x_field, tau, &p, params)?;
    }
    Ok(p)
}

struct Node {
    pos: Vector,
    vel: Vector,
}

/// Lazily extended RK4 trajectory of one field through one point, sampled at
/// a fixed spacing in both time directions and interpolated by cubic
/// Hermite splines. Positions are kept continuous (torus coordinates are
/// not reduced mod 2π).
pub(crate) struct TrajectoryCache<'a> {
    field: &'a VectorField,
    spacing: f64,
    forward: Vec<Node>,
    backward: Vec<Node>,
}

const MAX_CACHE_NODES: usize = 50_000_000;

impl<'a> TrajectoryCache<'a> {
    pub(crate) fn new(field: &'a VectorField, x: &ManifoldPoint, params: &FlowParams) -> Result<Self> {
        let pos = x.coords().clone();
        let vel = field.eval_checked(&pos)?;
        Ok(Self {
            field,
            spacing: 1.0 / params.steps_per_unit() as f64,
            forward: vec![Node { pos, vel }],
            backward: Vec::new(),
        })
    }

    pub(crate) fn spacing(&self) -> f64 {
        self.spacing
    }

    fn extend(&mut self, k: i64) -> Result<()> {
        let needed = k.unsigned_abs() as usize;
        if needed > MAX_CACHE_NODES {
            return Err(GeoError::InvalidParameter(format!(
                "trajectory cache would need {needed} nodes"
            )));
        }
        let m = self.field.manifold().clone();
        let field = self.field;
        let mut rhs = |_t: f64, y: &Vector| field.eval_checked(y);
        if k >= 0 {
            while self.forward.len() <= needed {
                let last = &self.forward[self.forward.len() - 1].pos;
                let pos = m.retract_continuous(rk4_step(&mut rhs, 0.0, last, self.spacing)?)?;
                let vel = field.eval_checked(&pos)?;
                self.forward.push(Node { pos, vel });
            }
        } else {
            while self.backward.len() < needed {
                let last = match self.backward.last() {
                    Some(n) => &n.pos,
                    None => &self.forward[0].pos,
                };
                let pos = m.retract_continuous(rk4_step(&mut rhs, 0.0, last, -self.spacing)?)?;
                let vel = field.eval_checked(&pos)?;
                self.backward.push(Node { pos, vel });
            }
        }
        Ok(())
    }

    pub(crate) fn node(&mut self, k: i64) -> Result<(&Vector, &Vector)> {
        self.extend(k)?;
        let n = if k >= 0 {
            &self.forward[k as usize]
        } else {
            &self.backward[(-k - 1) as usize]
        };
        Ok((&n.pos, &n.vel))
    }

    /// Continuous-coordinate position at flow time `sigma`.
    pub(crate) fn position(&mut self, sigma: f64) -> Result<Vector> {
        check_time(sigma)?;
        let u = sigma / self.spacing;
        let k = u.floor();
        let frac = u - k;
        let k = k as i64;
        self.extend(k)?;
        self.extend(k + 1)?;
        let (p0, v0) = self.node(k).map(|(p, v)| (p.clone(), v.clone()))?;
        let h = self.spacing;
        let manifold = self.field.manifold();
        let (p1, v1) = self.node(k + 1)?;
        let f2 = frac * frac;
        let f3 = f2 * frac;
        let h00 = 2.0 * f3 - 3.0 * f2 + 1.0;
        let h10 = f3 - 2.0 * f2 + frac;
        let h01 = -2.0 * f3 + 3.0 * f2;
        let h11 = f3 - f2;
        let p = p0 * h00 + v0 * (h10 * h) + p1 * h01 + v1 * (h11 * h);
        manifold.retract_continuous(p)
    }
}

/// The time change `s(t, x)` turning the flow of `X` into the flow of `fX`.
#[derive(Debug, Clone)]
pub struct TimeChangeSolution {
    f: ScalarField,
    field: VectorField,
    params: FlowParams,
}

impl TimeChangeSolution {
    pub fn new(f: &ScalarField, field: &VectorField, params: &FlowParams) -> Result<Self> {
        same_manifold(f.manifold(), field.manifold())?;
        Ok(Self {
            f: f.clone(),
            field: field.clone(),
            params: *params,
        })
    }

    pub fn scalar(&self) -> &ScalarField {
        &self.f
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    /// Solves `∂s/∂t = f(α(s, x))`, `s(0, x) = 0` by RK4 in `t`, reading
    /// `α(s, x)` from a dense trajectory cache of `X` through `x`.
    pub fn eval(&self, t: f64, x: &ManifoldPoint) -> Result<f64> {
        ensure_on(self.field.manifold(), x)?;
        check_time(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let mut cache = TrajectoryCache::new(&self.field, x, &self.params)?;
        let f = &self.f;
        let mut rate = |_t: f64, s: &Vector| -> Result<Vector> {
            let y = cache.position(s[0])?;
            Ok(Vector::from_element(1, f.eval_positive(&y)?))
        };
        let steps = self.params.steps_for(t);
        let dt = t / steps as f64;
        let mut s = Vector::zeros(1);
        for _ in 0..steps {
            s = rk4_step(&mut rate, 0.0, &s, dt)?;
        }
        Ok(s[0])
    }
}

pub fn time_change_s(
    f: &ScalarField,
    field: &VectorField,
    t: f64,
    x: &ManifoldPoint,
    params: &FlowParams,
) -> Result<f64> {
    TimeChangeSolution::new(f, field, params)?.eval(t, x)
}

/// Flow of `fX` realized as `α(s(t, x), x)`.
pub fn flow_of_scaled_field(
    f: &ScalarField,
    field: &VectorField,
    t: f64,
    x: &ManifoldPoint,
    params: &FlowParams,
) -> Result<ManifoldPoint> {
    let s = time_change_s(f, field, t, x, params)?;
    flow(field, s, x, params)
}

/// Samples `α_{t_i}(x)` along an increasing grid starting at 0.
pub fn integral_curve(
    field: &VectorField,
    x: &ManifoldPoint,
    t_grid: &[f64],
    params: &FlowParams,
) -> Result<Vec<ManifoldPoint>> {
    validate_grid(t_grid)?;
    let mut out = Vec::with_capacity(t_grid.len());
    let mut p = x.clone();
    let mut prev = 0.0;
    ensure_on(field.manifold(), x)?;
    for &t in t_grid {
        p = flow(field, t - prev, &p, params)?;
        prev = t;
        out.push(p.clone());
    }
    Ok(out)
}

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    match t_grid.first() {
        None => return Err(GeoError::InvalidParameter("time grid is empty".into())),
        Some(&t0) if t0 != 0.0 => {
            return Err(GeoError::InvalidParameter(format!(
                "time grid must start at 0, got {t0}"
            )))
        }
        _ => {}
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GeoError::InvalidParameter(
            "time grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// How the trajectory of `fX` sits on the trajectory of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatch {
    /// Largest distance from a sample of the `fX` curve to the `X` polyline.
    pub max_distance: f64,
    /// For each sample, the `X`-flow time of its nearest polyline point,
    /// i.e. the reparametrization `φ(t_i)`.
    pub parameters: Vec<f64>,
    pub orientation_preserving: bool,
}

/// Compares the integral curve of `fX` through `x` with the trajectory of
/// `X` through `x`, sampled as a polyline at the integrator spacing.
pub fn trajectory_match(
    field: &VectorField,
    f: &ScalarField,
    x: &ManifoldPoint,
    t_grid: &[f64],
    params: &FlowParams,
) -> Result<TrajectoryMatch> {
    let scaled = field.scaled(f)?;
    let samples = integral_curve(&scaled, x, t_grid, params)?;
    let t_end = *t_grid.last().expect("validated grid");
    let s_end = time_change_s(f, field, t_end, x, params)?;
    let m = field.manifold();

    let mut cache = TrajectoryCache::new(field, x, params)?;
    let h = cache.spacing();
    let last = ((s_end * 1.05) / h).ceil() as i64 + 2;
    let mut polyline = Vec::with_capacity(last as usize + 1);
    for k in 0..=last {
        polyline.push(cache.node(k)?.0.clone());
    }

    let mut max_distance: f64 = 0.0;
    let mut parameters = Vec::with_capacity(samples.len());
    for p in &samples {
        let mut best = (f64::INFINITY, 0.0);
        for (k, seg) in polyline.windows(2).enumerate() {
            let q = m.lift_near(&seg[0], p.coords());
            let d = &seg[1] - &seg[0];
            let len2 = d.norm_squared();
            let w = if len2 > 0.0 {
                ((&q - &seg[0]).dot(&d) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let dist = (&seg[0] + &d * w - &q).norm();
            if dist < best.0 {
                best = (dist, (k as f64 + w) * h);
            }
        }
        max_distance = max_distance.max(best.0);
        parameters.push(best.1);
    }
    let orientation_preserving = parameters.windows(2).all(|w| w[1] > w[0]);
    Ok(TrajectoryMatch {
        max_distance,
        parameters,
        orientation_preserving,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::cross;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn torus() -> Manifold {
        Manifold::flat_torus(2).unwrap()
    }

    fn constant(m: &Manifold, c: &[f64]) -> VectorField {
        let v = Vector::from_column_slice(c);
        VectorField::new(m.clone(), "const", move |_| v.clone())
    }

    fn rot_z() -> VectorField {
        let axis = Vector::from_column_slice(&[0.0, 0.0, 1.0]);
        VectorField::new(Manifold::sphere2(), "rot:z", move |y| cross(&axis, y))
    }

    #[test]
    fn zero_field_is_stationary() {
        let m = Manifold::sphere2();
        let x = m.random_point(3);
        let z = VectorField::zero(m.clone());
        let p = flow(&z, 2.5, &x, &FlowParams::default()).unwrap();
        assert!(m.distance(&p, &x) < 1e-15);
    }

    #[test]
    fn constant_torus_field_translates() {
        let m = torus();
        let x = m.point(&[0.0, 0.0]).unwrap();
        let p = flow(&constant(&m, &[1.0, 0.0]), 1.0, &x, &FlowParams::default()).unwrap();
        assert_abs_diff_eq!(p.coords()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.coords()[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_quarter_turn() {
        let m = Manifold::sphere2();
        let x = m.point(&[1.0, 0.0, 0.0]).unwrap();
        let p = flow(&rot_z(), FRAC_PI_2, &x, &FlowParams::default()).unwrap();
        assert!((p.coords() - Vector::from_column_slice(&[0.0, 1.0, 0.0])).norm() <= 1e-9);
    }

    #[test]
    fn non_finite_field_reports_point() {
        let m = torus();
        let bad = VectorField::new(m.clone(), "bad", |y| y.map(|c| 1.0 / (c - 0.5)));
        let x = m.point(&[0.5, 0.5]).unwrap();
        let err = flow(&bad, 1.0, &x, &FlowParams::default()).unwrap_err();
        assert!(matches!(err, GeoError::Integration { ref field, .. } if field == "bad"));
    }

    #[test]
    fn zero_steps_per_unit_rejected() {
        assert!(FlowParams::new(0).is_err());
        assert_eq!(FlowParams::new(5).unwrap().steps_per_unit(), 5);
    }

    #[test]
    fn trotter_zero_time_and_commuting_fields() {
        let m = torus();
        let x = m.point(&[0.0, 0.0]).unwrap();
        let (a, b) = (constant(&m, &[1.0, 0.0]), constant(&m, &[0.0, 1.0]));
        let params = FlowParams::default();
        assert_eq!(trotter_flow(&a, &b, 0.0, &x, 5, &params).unwrap(), x);
        for n in [1, 2, 7] {
            let p = trotter_flow(&a, &b, 1.0, &x, n, &params).unwrap();
            assert!((p.coords() - Vector::from_column_slice(&[1.0, 1.0])).norm() <= 1e-12);
        }
        assert!(trotter_flow(&a, &b, 1.0, &x, 0, &params).is_err());
    }

    #[test]
    fn trotter_applies_second_field_first() {
        // On the sphere, rotating by e_x then e_z differs from e_z then e_x.
        let m = Manifold::sphere2();
        let rx = {
            let axis = Vector::from_column_slice(&[1.0, 0.0, 0.0]);
            VectorField::new(m.clone(), "rot:x", move |y| cross(&axis, y))
        };
        let rz = rot_z();
        let x = m.point(&[0.0, 1.0, 0.0]).unwrap();
        let p = FlowParams::default();
        let got = trotter_flow(&rz, &rx, 1.0, &x, 1, &p).unwrap();
        let expected = flow(&rz, 1.0, &flow(&rx, 1.0, &x, &p).unwrap(), &p).unwrap();
        assert!(m.distance(&got, &expected) < 1e-14);
    }

    #[test]
    fn time_change_with_unit_and_constant_speed() {
        let m = Manifold::sphere2();
        let x = m.random_point(11);
        let p = FlowParams::default();
        let one = ScalarField::constant(m.clone(), 1.0);
        assert_abs_diff_eq!(time_change_s(&one, &rot_z(), 0.8, &x, &p).unwrap(), 0.8, epsilon = 1e-9);
        let c = ScalarField::constant(m.clone(), 2.5);
        assert_abs_diff_eq!(time_change_s(&c, &rot_z(), 0.8, &x, &p).unwrap(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(time_change_s(&c, &rot_z(), -0.8, &x, &p).unwrap(), -2.0, epsilon = 1e-9);
        assert_eq!(time_change_s(&c, &rot_z(), 0.0, &x, &p).unwrap(), 0.0);
    }

    #[test]
    fn time_change_rejects_nonpositive_scalar() {
        let m = torus();
        let x = m.point(&[0.0, 0.0]).unwrap();
        let f = ScalarField::new(m.clone(), "sin1", |y| y[0].sin());
        let err = time_change_s(&f, &constant(&m, &[1.0, 0.0]), 1.0, &x, &FlowParams::default());
        assert!(matches!(err, Err(GeoError::PositivityViolation { .. })));
    }

    #[test]
    fn constant_speed_up_on_torus() {
        let m = torus();
        let x = m.point(&[0.0, 0.0]).unwrap();
        let two = ScalarField::constant(m.clone(), 2.0);
        let p = flow_of_scaled_field(&two, &constant(&m, &[1.0, 0.0]), 1.0, &x, &FlowParams::default()).unwrap();
        assert!((p.coords() - Vector::from_column_slice(&[2.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn integral_curve_samples_rotation() {
        let m = Manifold::sphere2();
        let x = m.point(&[1.0, 0.0, 0.0]).unwrap();
        let pts = integral_curve(&rot_z(), &x, &[0.0, FRAC_PI_2, PI], &FlowParams::default()).unwrap();
        let expected = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]];
        for (p, e) in pts.iter().zip(expected) {
            assert!((p.coords() - Vector::from_column_slice(&e)).norm() <= 1e-8);
        }
        assert_eq!(
            integral_curve(&rot_z(), &x, &[0.0], &FlowParams::default()).unwrap(),
            vec![x.clone()]
        );
    }

    #[test]
    fn integral_curve_rejects_bad_grids() {
        let m = Manifold::sphere2();
        let x = m.point(&[1.0, 0.0, 0.0]).unwrap();
        let p = FlowParams::default();
        assert!(integral_curve(&rot_z(), &x, &[], &p).is_err());
        assert!(integral_curve(&rot_z(), &x, &[0.1, 0.2], &p).is_err());
        assert!(integral_curve(&rot_z(), &x, &[0.0, 0.2, 0.2], &p).is_err());
    }

    #[test]
    fn integral_curve_of_zero_field_is_constant() {
        let m = torus();
        let x = m.random_point(5);
        let pts = integral_curve(
            &VectorField::zero(m.clone()),
            &x,
            &[0.0, 1.0, 2.0],
            &FlowParams::default(),
        )
        .unwrap();
        assert!(pts.iter().all(|p| p == &x));
    }

    #[test]
    fn cache_interpolation_matches_flow() {
        let m = Manifold::sphere2();
        let x = m.random_point(1);
        let p = FlowParams::default();
        let field = rot_z();
        let mut cache = TrajectoryCache::new(&field, &x, &p).unwrap();
        for sigma in [0.0, 0.0004, 0.3337, -0.81234, 2.5] {
            let a = cache.position(sigma).unwrap();
            let b = flow(&field, sigma, &x, &p).unwrap();
            assert!((a - b.coords()).norm() < 1e-11, "sigma = {sigma}");
        }
    }

    #[test]
    fn scalar_floor_is_checked_by_sampling() {
        let m = Manifold::sphere2();
        let good = ScalarField::positive(m.clone(), "2+z", 1.0, |y| 2.0 + y[2]).unwrap();
        assert!(good.check_floor(200, 0).is_ok());
        let bad = ScalarField::positive(m.clone(), "lie", 1.5, |y| 2.0 + y[2]).unwrap();
        assert!(bad.check_floor(200, 0).is_err());
        assert!(ScalarField::positive(m, "zero", 0.0, |_| 1.0).is_err());
    }
}
