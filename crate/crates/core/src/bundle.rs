//! Vector bundles, sections and connections (covariant derivatives).
//!
//! Sign convention: parallel transport solves `ds/dt + A(c, ċ) s = 0`, so the
//! covariant derivative of a trivialized bundle is `∇_X s = D_X s + A(X) s`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{GeoError, Result};
use crate::flows::{ensure_on, flow, same_manifold, FlowParams, ScalarField, VectorField};
use crate::manifold::{Manifold, ManifoldPoint, Vector};
use crate::ode::central_derivative;

/// Default finite-difference step for directional derivatives along flows.
pub const DEFAULT_DERIVATIVE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleKind {
    /// `M × R^rank` with a fixed global trivialization.
    Trivialized,
    /// `TS²`, fibers stored as ambient 3-vectors tangent at the base point.
    SphereTangent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorBundle {
    base: Manifold,
    rank: usize,
    kind: BundleKind,
}

impl VectorBundle {
    pub fn trivialized(base: Manifold, rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(GeoError::InvalidDimension(0));
        }
        Ok(Self {
            base,
            rank,
            kind: BundleKind::Trivialized,
        })
    }

    pub fn sphere_tangent() -> Self {
        Self {
            base: Manifold::sphere2(),
            rank: 2,
            kind: BundleKind::SphereTangent,
        }
    }

    /// `"torus-triv2"` or `"sphere-tangent"`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "torus-triv2" => Self::trivialized(Manifold::flat_torus(2)?, 2),
            "sphere-tangent" => Ok(Self::sphere_tangent()),
            _ => Err(GeoError::UnknownName {
                kind: "bundle",
                name: name.to_string(),
            }),
        }
    }

    pub fn base(&self) -> &Manifold {
        &self.base
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn kind(&self) -> BundleKind {
        self.kind
    }

    /// Length of the stored fiber vectors.
    pub fn fiber_dim(&self) -> usize {
        match self.kind {
            BundleKind::Trivialized => self.rank,
            BundleKind::SphereTangent => 3,
        }
    }

    /// Orthonormal fiber frame at `x` (`fiber_dim × rank`): the standard
    /// basis for trivialized bundles, the deterministic tangent frame of the
    /// sphere otherwise. Transport matrices are expressed in these frames.
    pub fn frame_at(&self, x: &Vector) -> DMatrix<f64> {
        match self.kind {
            BundleKind::Trivialized => DMatrix::identity(self.rank, self.rank),
            BundleKind::SphereTangent => self.base.tangent_frame(x),
        }
    }

    pub fn to_frame_coords(&self, x: &Vector, v: &Vector) -> Vector {
        match self.kind {
            BundleKind::Trivialized => v.clone(),
            BundleKind::SphereTangent => self.frame_at(x).transpose() * v,
        }
    }

    pub fn from_frame_coords(&self, x: &Vector, c: &Vector) -> Vector {
        match self.kind {
            BundleKind::Trivialized => c.clone(),
            BundleKind::SphereTangent => self.frame_at(x) * c,
        }
    }

    /// Distance of `v` from the fiber at `x` (zero for trivialized bundles).
    pub fn fiber_residual(&self, x: &Vector, v: &Vector) -> f64 {
        match self.kind {
            BundleKind::Trivialized => {
                if v.len() == self.rank {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            BundleKind::SphereTangent => v.dot(x).abs(),
        }
    }
}

type SectionFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type FormFn = dyn Fn(&Vector, &Vector) -> DMatrix<f64> + Send + Sync;

#[derive(Clone)]
pub struct Section {
    bundle: VectorBundle,
    name: String,
    eval: Arc<SectionFn>,
}

impl fmt::Debug for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Section").field("name", &self.name).finish()
    }
}

impl Section {
    pub fn new<F>(bundle: VectorBundle, name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            bundle,
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn bundle(&self) -> &VectorBundle {
        &self.bundle
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &ManifoldPoint) -> Vector {
        (self.eval)(x.coords())
    }

    pub fn eval_ambient(&self, y: &Vector) -> Vector {
        (self.eval)(y)
    }

    /// `g · s`.
    pub fn scaled_by(&self, g: &ScalarField) -> Result<Section> {
        same_manifold(self.bundle.base(), g.manifold())?;
        let (s, g2) = (self.eval.clone(), g.clone());
        Ok(Self::new(
            self.bundle.clone(),
            format!("({})*{}", g.name(), self.name),
            move |y| s(y) * g2.eval_ambient(y),
        ))
    }
}

#[derive(Clone)]
enum Rule {
    Form(Arc<FormFn>),
    LeviCivita,
}

#[derive(Clone)]
pub struct Connection {
    bundle: VectorBundle,
    name: String,
    rule: Rule,
}

impl fmt::Debug for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Connection")
            .field("bundle", &self.bundle)
            .field("name", &self.name)
            .finish()
    }
}

impl Connection {
    /// Connection on a trivialized bundle given by a matrix-valued 1-form
    /// `A(x, v)`, which must be linear in `v`.
    pub fn from_form<F>(bundle: VectorBundle, name: impl Into<String>, form: F) -> Result<Self>
    where
        F: Fn(&Vector, &Vector) -> DMatrix<f64> + Send + Sync + 'static,
    {
        if bundle.kind() != BundleKind::Trivialized {
            return Err(GeoError::Domain("connection forms need a trivialized bundle".into()));
        }
        Ok(Self {
            bundle,
            name: name.into(),
            rule: Rule::Form(Arc::new(form)),
        })
    }

    /// `A ≡ 0`.
    pub fn flat(bundle: VectorBundle) -> Result<Self> {
        let r = bundle.rank();
        Self::from_form(bundle, "zero", move |_, _| DMatrix::zeros(r, r))
    }

    /// `A(x, v) = a · v₁ · J` with `J = [[0, -1], [1, 0]]` on a rank-2 bundle.
    pub fn rot_j(bundle: VectorBundle, a: f64) -> Result<Self> {
        if bundle.rank() != 2 {
            return Err(GeoError::Domain("rotJ needs a rank-2 bundle".into()));
        }
        Self::from_form(bundle, format!("rotJ:{a}"), move |_, v| {
            DMatrix::from_row_slice(2, 2, &[0.0, -a * v[0], a * v[0], 0.0])
        })
    }

    /// Levi-Civita connection of the round sphere.
    pub fn levi_civita() -> Self {
        Self {
            bundle: VectorBundle::sphere_tangent(),
            name: "levi-civita".into(),
            rule: Rule::LeviCivita,
        }
    }

    pub fn bundle(&self) -> &VectorBundle {
        &self.bundle
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_levi_civita(&self) -> bool {
        matches!(self.rule, Rule::LeviCivita)
    }

    /// The connection form `A(x, v)`; `None` for Levi-Civita.
    pub fn form(&self, x: &Vector, v: &Vector) -> Option<DMatrix<f64>> {
        match &self.rule {
            Rule::Form(a) => Some(a(x, v)),
            Rule::LeviCivita => None,
        }
    }

    /// Generator `G(x, v)` of the transport equation `ṡ = -G(c, ċ) s` acting
    /// on stored fiber vectors. For the sphere this is `x vᵀ`, the ambient
    /// form `ṡ = -(ċ·s) c` of Levi-Civita transport.
    pub fn transport_generator(&self, x: &Vector, v: &Vector) -> DMatrix<f64> {
        match &self.rule {
            Rule::Form(a) => a(x, v),
            Rule::LeviCivita => x * v.transpose(),
        }
    }
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(GeoError::InvalidParameter(format!(
            "finite-difference step must be > 0, got {h}"
        )))
    }
}

fn check_compatible(c: &Connection, field: &VectorField, s: &Section) -> Result<()> {
    same_manifold(c.bundle().base(), field.manifold())?;
    if s.bundle() != c.bundle() {
        return Err(GeoError::Domain(format!(
            "section {} lives on another bundle",
            s.name()
        )));
    }
    Ok(())
}

/// `X(g)(x)`, by central differences along the flow of `X`.
pub fn directional_derivative(
    field: &VectorField,
    g: &ScalarField,
    x: &ManifoldPoint,
    h: f64,
    params: &FlowParams,
) -> Result<f64> {
    check_step(h)?;
    let d = central_derivative(|t| Ok(Vector::from_element(1, g.eval(&flow(field, t, x, params)?))), h)?;
    Ok(d[0])
}

/// Componentwise derivative of the stored fiber values of `s` along the
/// flow of `X`.
pub(crate) fn section_derivative(
    field: &VectorField,
    s: &Section,
    x: &ManifoldPoint,
    h: f64,
    params: &FlowParams,
) -> Result<Vector> {
    central_derivative(|t| Ok(s.eval(&flow(field, t, x, params)?)), h)
}

/// `∇_X s (x)`.
pub fn covariant_derivative(
    c: &Connection,
    field: &VectorField,
    s: &Section,
    x: &ManifoldPoint,
    h: f64,
    params: &FlowParams,
) -> Result<Vector> {
    check_step(h)?;
    check_compatible(c, field, s)?;
    ensure_on(field.manifold(), x)?;
    let d = section_derivative(field, s, x, h, params)?;
    match &c.rule {
        Rule::Form(a) => {
            let xv = field.eval_ambient(x.coords());
            Ok(d + a(x.coords(), &xv) * s.eval(x))
        }
        Rule::LeviCivita => Ok(field.manifold().tangent_project(x, &d).components),
    }
}

/// `|∇_X(g s) - X(g) s - g ∇_X s|` at `x`.
pub fn leibniz_residual(
    c: &Connection,
    field: &VectorField,
    s: &Section,
    g: &ScalarField,
    x: &ManifoldPoint,
    params: &FlowParams,
) -> Result<f64> {
    let h = DEFAULT_DERIVATIVE_STEP;
    let gs = s.scaled_by(g)?;
    let lhs = covariant_derivative(c, field, &gs, x, h, params)?;
    let xg = directional_derivative(field, g, x, h, params)?;
    let rhs = s.eval(x) * xg + covariant_derivative(c, field, s, x, h, params)? * g.eval(x);
    Ok((lhs - rhs).norm())
}
