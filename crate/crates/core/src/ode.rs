//! Fixed-step classical Runge–Kutta used by every integrator in the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

pub(crate) trait OdeState: Clone {
    /// `self + c * other`
    fn axpy(&self, c: f64, other: &Self) -> Self;
}

impl OdeState for DVector<f64> {
    fn axpy(&self, c: f64, other: &Self) -> Self {
        self + other * c
    }
}

impl OdeState for DMatrix<f64> {
    fn axpy(&self, c: f64, other: &Self) -> Self {
        self + other * c
    }
}

impl<A: OdeState, B: OdeState> OdeState for (A, B) {
    fn axpy(&self, c: f64, other: &Self) -> Self {
        (self.0.axpy(c, &other.0), self.1.axpy(c, &other.1))
    }
}

/// One classical RK4 step of `y' = f(t, y)`.
pub(crate) fn rk4_step<S, F>(f: &mut F, t: f64, y: &S, dt: f64) -> Result<S>
where
    S: OdeState,
    F: FnMut(f64, &S) -> Result<S>,
{
    let half = 0.5 * dt;
    let k1 = f(t, y)?;
    let k2 = f(t + half, &y.axpy(half, &k1))?;
    let k3 = f(t + half, &y.axpy(half, &k2))?;
    let k4 = f(t + dt, &y.axpy(dt, &k3))?;
    Ok(y.axpy(dt / 6.0, &k1)
        .axpy(dt / 3.0, &k2)
        .axpy(dt / 3.0, &k3)
        .axpy(dt / 6.0, &k4))
}

/// Number of fixed steps covering a parameter interval of length `span`.
pub(crate) fn step_count(span: f64, steps_per_unit: usize) -> usize {
    ((span.abs() * steps_per_unit as f64).ceil() as usize).max(1)
}

/// Five-point central difference `g'(0)` with step `h`.
pub(crate) fn central_derivative<F>(mut g: F, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64) -> Result<DVector<f64>>,
{
    let p2 = g(2.0 * h)?;
    let p1 = g(h)?;
    let m1 = g(-h)?;
    let m2 = g(-2.0 * h)?;
    Ok(((p1 - m1) * 8.0 - (p2 - m2)) / (12.0 * h))
}
