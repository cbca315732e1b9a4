//! Both directions between connections and parallel transport.
//!
//! From transport to a connection: pull a section back along the flow line
//! of `X` with the transport map and differentiate at time zero. That is the
//! lifted field `X̃` acting on the section. The functions here compare that
//! derivative with the covariant derivative of the connection the transport
//! came from, and check that it is additive in `X` (via zig-zag paths) and
//! linear over positive functions (via the time change of the flow).

use nalgebra::DMatrix;

use crate::bundle::{covariant_derivative, BundleKind, Connection, Section, VectorBundle, DEFAULT_DERIVATIVE_STEP};
use crate::error::{GeoError, Result};
use crate::flows::{ensure_on, flow, same_manifold, FlowParams, ScalarField, TimeChangeSolution, VectorField};
use crate::manifold::{ManifoldPoint, Vector};
use crate::transport::{lift_flow_to_frames, parallel_transport, transport_vectors, Frame, PathCurve, TransportMap};

/// Default step for derivatives of lifted flows.
pub const DEFAULT_RECOVERY_STEP: f64 = 1e-3;

/// An abstract parallel-transport map `γ ↦ 𝒫(γ)`.
pub trait TransportOracle {
    fn bundle(&self) -> &VectorBundle;
    fn transport(&self, path: &PathCurve) -> Result<TransportMap>;
}

/// Transport obtained by solving the transport equation of a connection.
#[derive(Debug, Clone)]
pub struct ConnectionTransport {
    connection: Connection,
    params: FlowParams,
}

impl ConnectionTransport {
    pub fn new(connection: &Connection, params: &FlowParams) -> Self {
        Self {
            connection: connection.clone(),
            params: *params,
        }
    }

    pub fn connection(&self) -> &Connection {
        &self.connection
    }
}

impl TransportOracle for ConnectionTransport {
    fn bundle(&self) -> &VectorBundle {
        self.connection.bundle()
    }

    fn transport(&self, path: &PathCurve) -> Result<TransportMap> {
        parallel_transport(&self.connection, path, &self.params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeEstimate {
    /// Stored fiber vector at the base point.
    pub value: Vector,
    /// The two steps `(h, h/2)` combined by extrapolation.
    pub step_sizes: (f64, f64),
    /// Distance between the extrapolated value and the finer raw quotient.
    pub residual_estimate: f64,
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(GeoError::InvalidParameter(format!("step must be > 0, got {h}")))
    }
}

/// `𝒫(γ)⁻¹ s(γ(b))`, stored in the fiber over `γ(a)`.
fn pulled_back(oracle: &dyn TransportOracle, path: &PathCurve, s: &Section) -> Result<Vector> {
    let map = oracle.transport(path)?;
    let bundle = oracle.bundle();
    let at_end = bundle.to_frame_coords(map.target().coords(), &s.eval(map.target()));
    let coords = map
        .matrix()
        .clone()
        .lu()
        .solve(&at_end)
        .ok_or_else(|| GeoError::Singular("transport map is not invertible".into()))?;
    Ok(bundle.from_frame_coords(map.source().coords(), &coords))
}

/// Derivative at `τ = 0` of `τ ↦ 𝒫(γ_τ)⁻¹ s(γ_τ(end))` for a family of
/// paths with `γ_0` constant: central quotients at `h` and `h/2` combined by
/// Richardson extrapolation `(4 D(h/2) - D(h)) / 3`.
fn lifted_derivative<F>(oracle: &dyn TransportOracle, family: F, s: &Section, h: f64) -> Result<DerivativeEstimate>
where
    F: Fn(f64) -> Result<PathCurve>,
{
    check_step(h)?;
    let quotient = |tau: f64| -> Result<Vector> {
        let forward = pulled_back(oracle, &family(tau)?, s)?;
        let backward = pulled_back(oracle, &family(-tau)?, s)?;
        Ok((forward - backward) / (2.0 * tau))
    };
    let coarse = quotient(h)?;
    let fine = quotient(0.5 * h)?;
    let value = (&fine * 4.0 - coarse) / 3.0;
    let residual_estimate = (&value - &fine).norm();
    Ok(DerivativeEstimate {
        value,
        step_sizes: (h, 0.5 * h),
        residual_estimate,
    })
}

fn check_section(oracle: &dyn TransportOracle, field: &VectorField, s: &Section) -> Result<()> {
    same_manifold(oracle.bundle().base(), field.manifold())?;
    if s.bundle() != oracle.bundle() {
        return Err(GeoError::Domain(format!(
            "section {} lives on another bundle",
            s.name()
        )));
    }
    Ok(())
}

/// `X̃ s (x)` recovered from transport along the flow lines of `X`.
pub fn connection_from_transport(
    oracle: &dyn TransportOracle,
    field: &VectorField,
    s: &Section,
    x: &ManifoldPoint,
    h: f64,
    params: &FlowParams,
) -> Result<DerivativeEstimate> {
    check_section(oracle, field, s)?;
    ensure_on(field.manifold(), x)?;
    lifted_derivative(oracle, |tau| PathCurve::flow_line(field, x, tau, params), s, h)
}

/// `|X̃ s (x) - ∇_X s (x)|` where `X̃` comes from the transport of `c`.
pub fn roundtrip_residual(
    c: &Connection,
    field: &VectorField,
    s: &Section,
    x: &ManifoldPoint,
    h: f64,
    params: &FlowParams,
) -> Result<f64> {
    let oracle = ConnectionTransport::new(c, params);
    let recovered = connection_from_transport(&oracle, field, s, x, h, params)?;
    let direct = covariant_derivative(c, field, s, x, DEFAULT_DERIVATIVE_STEP, params)?;
    Ok((recovered.value - direct).norm())
}

/// The zig-zag path `(α_{t/n} β_{t/n})^n` from `x`: `n` rounds of a `Y`
/// flow-line segment followed by an `X` segment, each of duration `t/n`.
pub fn zigzag_path(
    x_field: &VectorField,
    y_field: &VectorField,
    x: &ManifoldPoint,
    t: f64,
    n: usize,
    params: &FlowParams,
) -> Result<PathCurve> {
    if n == 0 {
        return Err(GeoError::InvalidParameter("Trotter factor count must be >= 1".into()));
    }
    same_manifold(x_field.manifold(), y_field.manifold())?;
    let tau = t / n as f64;
    let mut path: Option<PathCurve> = None;
    let mut p = x.clone();
    for _ in 0..n {
        for field in [y_field, x_field] {
            let seg = PathCurve::flow_line(field, &p, tau, params)?;
            p = flow(field, tau, &p, params)?;
            path = Some(match path {
                Some(prev) => prev.then(&seg)?,
                None => seg,
            });
        }
    }
    Ok(path.expect("n >= 1"))
}

/// Distance between the derivative of the lifted zig-zag flow and
/// `X̃ s + Ỹ s`.
#[allow(clippy::too_many_arguments)]
pub fn additivity_residual(
    c: &Connection,
    x_field: &VectorField,
    y_field: &VectorField,
    s: &Section,
    x: &ManifoldPoint,
    h: f64,
    n: usize,
    params: &FlowParams,
) -> Result<f64> {
    let oracle = ConnectionTransport::new(c, params);
    check_section(&oracle, x_field, s)?;
    check_section(&oracle, y_field, s)?;
    ensure_on(x_field.manifold(), x)?;
    if n == 0 {
        return Err(GeoError::InvalidParameter("Trotter factor count must be >= 1".into()));
    }
    let zz = lifted_derivative(&oracle, |tau| zigzag_path(x_field, y_field, x, tau, n, params), s, h)?;
    let dx = connection_from_transport(&oracle, x_field, s, x, h, params)?;
    let dy = connection_from_transport(&oracle, y_field, s, x, h, params)?;
    Ok((zz.value - dx.value - dy.value).norm())
}

/// Distance between the derivative of the lifted `fX` flow and
/// `f(x) X̃ s (x)`.
///
/// The `fX` flow is realized as `α(s(τ, x), x)`, so its lift transports
/// along the `X` flow line up to time `s(τ, x)`; the time change is pulled
/// back from the base point. Transport is invariant under the change of
/// parameter, so the flow line of `X` on `[0, s(τ, x)]` is used directly.
pub fn f_linearity_residual(
    c: &Connection,
    f: &ScalarField,
    field: &VectorField,
    s: &Section,
    x: &ManifoldPoint,
    h: f64,
    params: &FlowParams,
) -> Result<f64> {
    let oracle = ConnectionTransport::new(c, params);
    check_section(&oracle, field, s)?;
    ensure_on(field.manifold(), x)?;
    let fx = f.eval(x);
    if !(fx > 0.0) {
        return Err(GeoError::PositivityViolation {
            field: f.name().to_string(),
            point: x.as_slice().to_vec(),
            value: fx,
        });
    }
    let time_change = TimeChangeSolution::new(f, field, params)?;
    let scaled = lifted_derivative(
        &oracle,
        |tau| PathCurve::flow_line(field, x, time_change.eval(tau, x)?, params),
        s,
        h,
    )?;
    let plain = connection_from_transport(&oracle, field, s, x, h, params)?;
    Ok((scaled.value - plain.value * fx).norm())
}

/// Step used to differentiate sections along a curve.
const CURVE_STEP: f64 = 1e-3;

/// `max_t |(γ*∇)_{∂t} σ(t)|` over `grid` for a section `σ` along `γ`, given
/// as a function of the curve parameter. At a junction the piece ending
/// there is used.
pub fn covariant_residual_along<F>(c: &Connection, path: &PathCurve, section: F, grid: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> Result<Vector>,
{
    if path.manifold() != c.bundle().base() {
        return Err(GeoError::Domain(
            "path and connection live on different manifolds".into(),
        ));
    }
    let (a, b) = path.domain();
    validate_curve_grid(grid, a, b)?;
    let mut worst: f64 = 0.0;
    for &t in grid {
        // stencils stay inside the smooth piece that owns `t`
        let (lo, hi) = path
            .pieces()
            .iter()
            .map(|p| p.domain())
            .find(|&(_, t1)| t <= t1)
            .unwrap_or((a, b));
        let d = CURVE_STEP.min((hi - lo) / 8.0);
        let deriv = if t - 2.0 * d >= lo && t + 2.0 * d <= hi {
            let (p2, p1, m1, m2) = (
                section(t + 2.0 * d)?,
                section(t + d)?,
                section(t - d)?,
                section(t - 2.0 * d)?,
            );
            ((p1 - m1) * 8.0 - (p2 - m2)) / (12.0 * d)
        } else {
            // one-sided fourth-order stencil pointing into the domain
            let dir = if t - 2.0 * d < lo { d } else { -d };
            let f: Vec<Vector> = (0..5).map(|k| section(t + k as f64 * dir)).collect::<Result<_>>()?;
            (&f[0] * -25.0 + &f[1] * 48.0 - &f[2] * 36.0 + &f[3] * 16.0 - &f[4] * 3.0) / (12.0 * dir)
        };
        let p = path.position(t)?;
        let residual = match c.bundle().kind() {
            BundleKind::Trivialized => {
                let vel = path.velocity(t)?;
                let a_mat = c.form(p.coords(), &vel).expect("trivialized bundles carry a form");
                deriv + a_mat * section(t)?
            }
            BundleKind::SphereTangent => c.bundle().base().tangent_project(&p, &deriv).components,
        };
        worst = worst.max(residual.norm());
    }
    Ok(worst)
}

fn validate_curve_grid(grid: &[f64], a: f64, b: f64) -> Result<()> {
    match grid.first() {
        Some(&t0) if t0 == a => {}
        _ => {
            return Err(GeoError::InvalidParameter(format!(
                "grid must start at the left endpoint {a}"
            )))
        }
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|&t| t > b) {
        return Err(GeoError::InvalidParameter(format!(
            "grid must increase inside [{a}, {b}]"
        )));
    }
    Ok(())
}

/// Transports `v0` along `γ` to build `σ(t) = 𝒫(γ|[a, t]) v0` and returns
/// the largest pullback covariant derivative of `σ` over `grid`.
pub fn parallel_section_residual(
    c: &Connection,
    path: &PathCurve,
    v0: &Vector,
    grid: &[f64],
    params: &FlowParams,
) -> Result<f64> {
    let (a, _) = path.domain();
    let start = path.start()?;
    if c.bundle().fiber_residual(start.coords(), v0) > 1e-10 {
        return Err(GeoError::Domain("initial vector is not in the fiber".into()));
    }
    let column = DMatrix::from_column_slice(v0.len(), 1, v0.as_slice());
    let section = |t: f64| -> Result<Vector> {
        if t <= a {
            return Ok(v0.clone());
        }
        Ok(transport_vectors(c, &path.restrict(a, t)?, &column, params)?
            .column(0)
            .into_owned())
    };
    covariant_residual_along(c, path, section, grid)
}

/// Distance between the lift of the zig-zag `(α_{t/n} β_{t/n})^n` applied
/// to a frame and the lift of the flow of `X + Y`. This is the
/// transport-level form of the additivity law and decays like `1/n`.
pub fn zigzag_lift_defect(
    c: &Connection,
    x_field: &VectorField,
    y_field: &VectorField,
    t: f64,
    frame: &Frame,
    n: usize,
    params: &FlowParams,
) -> Result<f64> {
    if n == 0 {
        return Err(GeoError::InvalidParameter("Trotter factor count must be >= 1".into()));
    }
    let tau = t / n as f64;
    let mut lifted = frame.clone();
    for _ in 0..n {
        lifted = lift_flow_to_frames(c, y_field, tau, &lifted, params)?;
        lifted = lift_flow_to_frames(c, x_field, tau, &lifted, params)?;
    }
    let sum = x_field.sum(y_field)?;
    let direct = lift_flow_to_frames(c, &sum, t, frame, params)?;
    Ok(lifted.distance(&direct, c.bundle().base()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{cross, Manifold};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn torus_bundle() -> VectorBundle {
        VectorBundle::from_name("torus-triv2").unwrap()
    }

    fn constant_field(c: &[f64]) -> VectorField {
        let c = v(c);
        VectorField::new(Manifold::flat_torus(2).unwrap(), "const", move |_| c.clone())
    }

    fn rot(axis: [f64; 3]) -> VectorField {
        let a = v(&axis);
        VectorField::new(Manifold::sphere2(), "rot", move |y| cross(&a, y))
    }

    #[test]
    fn flat_connection_recovers_directional_derivative() {
        let b = torus_bundle();
        let flat = Connection::flat(b.clone()).unwrap();
        let s = Section::new(b.clone(), "s", |y| v(&[y[0].sin() * y[1].cos(), (2.0 * y[1]).cos()]));
        let field = VectorField::new(b.base().clone(), "X", |y| v(&[0.7, 1.0 + 0.5 * y[0].sin()]));
        let p = FlowParams::default();
        let x = b.base().random_point(12);
        let est = connection_from_transport(&ConnectionTransport::new(&flat, &p), &field, &s, &x, 1e-3, &p).unwrap();
        let xv = field.eval_ambient(x.coords());
        let (a, c) = (x.coords()[0], x.coords()[1]);
        let exact = v(&[
            xv[0] * a.cos() * c.cos() - xv[1] * a.sin() * c.sin(),
            -2.0 * xv[1] * (2.0 * c).sin(),
        ]);
        assert!((est.value - exact).norm() < 1e-6);
        assert_eq!(est.step_sizes, (1e-3, 5e-4));
    }

    #[test]
    fn rot_j_recovers_a_times_j() {
        let b = torus_bundle();
        let c = Connection::rot_j(b.clone(), 0.3).unwrap();
        let s = Section::new(b.clone(), "e1", |_| v(&[1.0, 0.0]));
        let p = FlowParams::default();
        let x = b.base().random_point(2);
        let est = connection_from_transport(
            &ConnectionTransport::new(&c, &p),
            &constant_field(&[1.0, 0.0]),
            &s,
            &x,
            1e-3,
            &p,
        )
        .unwrap();
        assert!((est.value - v(&[0.0, 0.3])).norm() < 1e-6);
    }

    #[test]
    fn equator_rotation_field_recovers_zero() {
        let c = Connection::levi_civita();
        let s = Section::new(c.bundle().clone(), "rotfield", |y| cross(&v(&[0.0, 0.0, 1.0]), y));
        let p = FlowParams::default();
        let x = Manifold::sphere2().point(&[1.0, 0.0, 0.0]).unwrap();
        let est = connection_from_transport(
            &ConnectionTransport::new(&c, &p),
            &rot([0.0, 0.0, 1.0]),
            &s,
            &x,
            1e-3,
            &p,
        )
        .unwrap();
        assert!(est.value.norm() < 1e-6);
    }

    #[test]
    fn nonpositive_recovery_step_rejected() {
        let c = Connection::levi_civita();
        let s = Section::new(c.bundle().clone(), "rotfield", |y| cross(&v(&[0.0, 0.0, 1.0]), y));
        let p = FlowParams::default();
        let x = Manifold::sphere2().random_point(1);
        let r = connection_from_transport(
            &ConnectionTransport::new(&c, &p),
            &rot([0.0, 0.0, 1.0]),
            &s,
            &x,
            0.0,
            &p,
        );
        assert!(matches!(r, Err(GeoError::InvalidParameter(_))));
    }

    #[test]
    fn roundtrip_trivial_case() {
        let b = torus_bundle();
        let flat = Connection::flat(b.clone()).unwrap();
        let s = Section::new(b.clone(), "e1", |_| v(&[1.0, 0.0]));
        let x = b.base().random_point(0);
        let r = roundtrip_residual(
            &flat,
            &constant_field(&[0.3, 1.0]),
            &s,
            &x,
            1e-3,
            &FlowParams::default(),
        )
        .unwrap();
        assert!(r <= 1e-9);
    }

    #[test]
    fn zero_second_field_gives_zero_additivity_residual() {
        let c = Connection::levi_civita();
        let s = Section::new(c.bundle().clone(), "s", |y: &Vector| {
            let a = v(&[0.2, 1.0, -0.4]);
            &a - y * (a.dot(y) / y.norm_squared())
        });
        let p = FlowParams::default();
        let x = Manifold::sphere2().random_point(5);
        let zero = VectorField::zero(Manifold::sphere2());
        for n in [1, 4, 9] {
            let r = additivity_residual(&c, &rot([0.0, 0.3, 1.0]), &zero, &s, &x, 1e-3, n, &p).unwrap();
            assert!(r <= 1e-6, "n = {n}: {r}");
        }
    }

    #[test]
    fn commuting_torus_fields_are_additive() {
        let b = torus_bundle();
        let c = Connection::rot_j(b.clone(), 0.3).unwrap();
        let s = Section::new(b.clone(), "s", |y| v(&[y[1].cos(), y[0].sin()]));
        let p = FlowParams::default();
        let x = b.base().random_point(6);
        let r = additivity_residual(
            &c,
            &constant_field(&[1.0, 0.0]),
            &constant_field(&[0.0, 1.0]),
            &s,
            &x,
            1e-3,
            8,
            &p,
        )
        .unwrap();
        assert!(r <= 1e-5);
    }

    #[test]
    fn unit_and_doubled_speed_time_changes() {
        let b = torus_bundle();
        let c = Connection::rot_j(b.clone(), 0.3).unwrap();
        let s = Section::new(b.clone(), "e1", |_| v(&[1.0, 0.0]));
        let p = FlowParams::default();
        let x = b.base().random_point(3);
        let field = constant_field(&[1.0, 0.0]);
        let one = ScalarField::constant(b.base().clone(), 1.0);
        assert!(f_linearity_residual(&c, &one, &field, &s, &x, 1e-3, &p).unwrap() <= 1e-9);
        let two = ScalarField::constant(b.base().clone(), 2.0);
        assert!(f_linearity_residual(&c, &two, &field, &s, &x, 1e-3, &p).unwrap() <= 1e-6);
        let neg = ScalarField::constant(b.base().clone(), -1.0);
        assert!(matches!(
            f_linearity_residual(&c, &neg, &field, &s, &x, 1e-3, &p),
            Err(GeoError::PositivityViolation { .. })
        ));
    }

    #[test]
    fn constant_path_section_is_parallel() {
        let c = Connection::levi_civita();
        let m = Manifold::sphere2();
        let x = m.point(&[0.0, 0.0, 1.0]).unwrap();
        let path = PathCurve::constant(&m, &x).unwrap();
        let r = parallel_section_residual(
            &c,
            &path,
            &v(&[1.0, 0.0, 0.0]),
            &[0.0, 0.5, 1.0],
            &FlowParams::default(),
        )
        .unwrap();
        assert!(r <= 1e-12);
    }

    #[test]
    fn initial_vector_must_be_in_fiber() {
        let c = Connection::levi_civita();
        let m = Manifold::sphere2();
        let x = m.point(&[0.0, 0.0, 1.0]).unwrap();
        let path = PathCurve::constant(&m, &x).unwrap();
        assert!(parallel_section_residual(&c, &path, &v(&[0.0, 0.0, 1.0]), &[0.0], &FlowParams::default()).is_err());
        assert!(parallel_section_residual(&c, &path, &v(&[1.0, 0.0, 0.0]), &[0.1], &FlowParams::default()).is_err());
    }

    #[test]
    fn constant_section_is_not_parallel_under_rot_j() {
        let b = torus_bundle();
        let c = Connection::rot_j(b.clone(), 0.3).unwrap();
        let x = b.base().point(&[0.0, 0.0]).unwrap();
        let path = PathCurve::coord_line(b.base(), &x, 0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let r = covariant_residual_along(&c, &path, |_| Ok(v(&[1.0, 0.0])), &grid).unwrap();
        assert!((r - 0.3).abs() < 1e-9);
        let parallel = parallel_section_residual(&c, &path, &v(&[1.0, 0.0]), &grid, &FlowParams::default()).unwrap();
        assert!(parallel <= 1e-6);
    }
}
