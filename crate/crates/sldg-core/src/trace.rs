//! Backward characteristic tracing with a classical 4-stage explicit
//! Runge-Kutta integrator.
//!
//! Feet are returned unwrapped (possibly outside the periodic domain);
//! wrapping happens only when the caller locates background cells, so that
//! upstream geometry stays simply connected.

use crate::error::{Result, SldgError};
use crate::poisson::{FieldSolution1D, FieldSolution2D};

/// Velocity field for 2D tracing. Implementations may advertise that a grid
/// line sees a constant speed, which lets the split sweeps take an exact
/// shift path.
pub trait Velocity2D {
    fn eval(&self, x: f64, y: f64, t: f64) -> (f64, f64);

    /// If `a(x, y0, t)` is independent of `x` and `t` on `[t0, t1]`, its value.
    fn x_line_constant(&self, _y0: f64, _t0: f64, _t1: f64) -> Option<f64> {
        None
    }

    /// If `b(x0, y, t)` is independent of `y` and `t` on `[t0, t1]`, its value.
    fn y_line_constant(&self, _x0: f64, _t0: f64, _t1: f64) -> Option<f64> {
        None
    }

    /// Snapshot-backed fields reject queries outside their time span.
    fn check_time_span(&self, _t0: f64, _t1: f64) -> Result<()> {
        Ok(())
    }
}

/// Analytic velocity field from a closure `(x, y, t) -> (a, b)`.
pub struct Analytic2D<F: Fn(f64, f64, f64) -> (f64, f64)>(pub F);

impl<F: Fn(f64, f64, f64) -> (f64, f64)> Velocity2D for Analytic2D<F> {
    #[inline]
    fn eval(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        (self.0)(x, y, t)
    }
}

/// End point at `t_end` together with its traced foot at `t_start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracedPoint1D {
    pub end: f64,
    pub foot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracedPoint2D {
    pub end: (f64, f64),
    pub foot: (f64, f64),
}

/// How trajectory feet are computed for a scheme step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceScheme {
    /// Classical 4-stage RK applied backward with the given substep count.
    Rk4 { substeps: usize },
    /// Single explicit Euler step from the end point (predictor quality).
    EulerEnd,
}

impl TraceScheme {
    pub fn rk4(substeps: usize) -> Self {
        Self::Rk4 { substeps }
    }
}

/// Default substep count for a step at the given CFL number.
#[inline]
pub fn default_substeps(cfl: f64) -> usize {
    if cfl.is_finite() && cfl > 1.0 {
        cfl.ceil() as usize
    } else {
        1
    }
}

/// Integrate `dx/dt = a(x, t)` from `t_from` to `t_to` (either direction)
/// with `substeps` RK4 steps.
pub fn integrate_1d(a: impl Fn(f64, f64) -> f64, x0: f64, t_from: f64, t_to: f64, substeps: usize) -> f64 {
    let n = substeps.max(1);
    let h = (t_to - t_from) / n as f64;
    let mut x = x0;
    let mut t = t_from;
    for _ in 0..n {
        let k1 = a(x, t);
        let k2 = a(x + 0.5 * h * k1, t + 0.5 * h);
        let k3 = a(x + 0.5 * h * k2, t + 0.5 * h);
        let k4 = a(x + h * k3, t + h);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    x
}

/// Integrate the 2D trajectory ODE from `t_from` to `t_to`.
pub fn integrate_2d<V: Velocity2D + ?Sized>(
    field: &V,
    p0: (f64, f64),
    t_from: f64,
    t_to: f64,
    substeps: usize,
) -> (f64, f64) {
    let n = substeps.max(1);
    let h = (t_to - t_from) / n as f64;
    let (mut x, mut y) = p0;
    let mut t = t_from;
    for _ in 0..n {
        let (k1x, k1y) = field.eval(x, y, t);
        let (k2x, k2y) = field.eval(x + 0.5 * h * k1x, y + 0.5 * h * k1y, t + 0.5 * h);
        let (k3x, k3y) = field.eval(x + 0.5 * h * k2x, y + 0.5 * h * k2y, t + 0.5 * h);
        let (k4x, k4y) = field.eval(x + h * k3x, y + h * k3y, t + h);
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        t += h;
    }
    (x, y)
}

/// Trace the trajectory ending at `(x_end, t_end)` back to `t_start`.
pub fn trace_back_1d(
    a: impl Fn(f64, f64) -> f64,
    x_end: f64,
    t_end: f64,
    t_start: f64,
    substeps: usize,
) -> TracedPoint1D {
    debug_assert!(t_start <= t_end);
    TracedPoint1D {
        end: x_end,
        foot: integrate_1d(a, x_end, t_end, t_start, substeps),
    }
}

/// Trace the 2D trajectory ending at `end` at `t_end` back to `t_start`.
pub fn trace_back_2d<V: Velocity2D + ?Sized>(
    field: &V,
    end: (f64, f64),
    t_end: f64,
    t_start: f64,
    substeps: usize,
) -> Result<TracedPoint2D> {
    debug_assert!(t_start <= t_end);
    field.check_time_span(t_start, t_end)?;
    Ok(TracedPoint2D {
        end,
        foot: integrate_2d(field, end, t_end, t_start, substeps),
    })
}

/// Single backward Euler-type predictor foot: `end - dt * F(end, t_end)`.
pub fn euler_foot_2d<V: Velocity2D + ?Sized>(field: &V, end: (f64, f64), t_end: f64, dt: f64) -> (f64, f64) {
    let (a, b) = field.eval(end.0, end.1, t_end);
    (end.0 - dt * a, end.1 - dt * b)
}

/// Temporal reconstruction rule for snapshot-backed fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeRule {
    Constant,
    Linear,
    Quadratic,
}

fn lagrange_weights(times: &[f64], t: f64, w: &mut [f64; 3]) {
    let n = times.len();
    for i in 0..n {
        let mut num = 1.0;
        let mut den = 1.0;
        for j in 0..n {
            if i != j {
                num *= t - times[j];
                den *= times[i] - times[j];
            }
        }
        w[i] = num / den;
    }
}

/// Phase-space field `(v, E(x, t))` built from electric-field snapshots.
pub struct PhaseSpaceField<'a> {
    times: Vec<f64>,
    fields: Vec<&'a FieldSolution1D>,
}

impl<'a> PhaseSpaceField<'a> {
    pub fn new(snaps: Vec<(f64, &'a FieldSolution1D)>, rule: TimeRule) -> Self {
        let need = match rule {
            TimeRule::Constant => 1,
            TimeRule::Linear => 2,
            TimeRule::Quadratic => 3,
        };
        assert!(
            snaps.len() == need,
            "rule {:?} requires {} snapshots, got {}",
            rule,
            need,
            snaps.len()
        );
        let (times, fields) = snaps.into_iter().unzip();
        Self { times, fields }
    }
}

impl Velocity2D for PhaseSpaceField<'_> {
    #[inline]
    fn eval(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let e = match self.times.len() {
            1 => self.fields[0].eval_e(x),
            _ => {
                // all snapshots share the mesh: locate once
                let loc = self.fields[0].mesh.locate(x);
                let mut w = [0.0; 3];
                lagrange_weights(&self.times, t, &mut w);
                let mut e = 0.0;
                for (i, f) in self.fields.iter().enumerate() {
                    e += w[i] * f.eval_e_at(loc);
                }
                e
            }
        };
        (y, e)
    }

    fn check_time_span(&self, t0: f64, t1: f64) -> Result<()> {
        check_span(&self.times, t0, t1)
    }
}

/// Fluid velocity field `(-Phi_y, Phi_x)` built from stream-function
/// snapshots.
pub struct FluidField<'a> {
    times: Vec<f64>,
    fields: Vec<&'a FieldSolution2D>,
}

impl<'a> FluidField<'a> {
    pub fn new(snaps: Vec<(f64, &'a FieldSolution2D)>, rule: TimeRule) -> Self {
        let need = match rule {
            TimeRule::Constant => 1,
            TimeRule::Linear => 2,
            TimeRule::Quadratic => 3,
        };
        assert!(
            snaps.len() == need,
            "rule {:?} requires {} snapshots, got {}",
            rule,
            need,
            snaps.len()
        );
        let (times, fields) = snaps.into_iter().unzip();
        Self { times, fields }
    }
}

impl Velocity2D for FluidField<'_> {
    #[inline]
    fn eval(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        match self.times.len() {
            1 => self.fields[0].eval_velocity(x, y),
            _ => {
                let loc = self.fields[0].mesh.locate(x, y);
                let mut w = [0.0; 3];
                lagrange_weights(&self.times, t, &mut w);
                let mut u = 0.0;
                let mut v = 0.0;
                for (i, f) in self.fields.iter().enumerate() {
                    let (ui, vi) = f.eval_velocity_at(loc);
                    u += w[i] * ui;
                    v += w[i] * vi;
                }
                (u, v)
            }
        }
    }

    fn check_time_span(&self, t0: f64, t1: f64) -> Result<()> {
        check_span(&self.times, t0, t1)
    }
}

fn check_span(times: &[f64], t0: f64, t1: f64) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-10 * (hi - lo).max(1.0);
    if t0 < lo - slack || t1 > hi + slack {
        return Err(SldgError::FieldTimeSpan {
            t: if t0 < lo - slack { t0 } else { t1 },
            t_lo: lo,
            t_hi: hi,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_advection_exact() {
        let tp = trace_back_1d(|_, _| 1.0, 2.0, 0.5, 0.0, 1);
        assert!((tp.foot - 1.5).abs() < 1e-15);
        let tp = trace_back_1d(|_, _| 0.0, 2.0, 0.5, 0.0, 3);
        assert_eq!(tp.foot, 2.0);
    }

    #[test]
    fn exponential_flow_oracle() {
        // dx/dt = x backward over 0.1: foot = x_end * exp(-0.1)
        let tp = trace_back_1d(|x, _| x, 1.7, 0.1, 0.0, 4);
        let exact = 1.7 * (-0.1f64).exp();
        assert!((tp.foot - exact).abs() <= 1e-8);
    }

    #[test]
    fn rotation_field_exact() {
        let rot = Analytic2D(|x, y, _| (-y, x));
        let dt = 0.05;
        let end = (1.0, 0.5);
        let tp = trace_back_2d(&rot, end, dt, 0.0, 4).unwrap();
        // rotation of the end point by -dt
        let (c, s) = (dt.cos(), (-dt).sin());
        let exact = (end.0 * c - end.1 * s, end.0 * s + end.1 * c);
        assert!((tp.foot.0 - exact.0).abs() < 1e-10);
        assert!((tp.foot.1 - exact.1).abs() < 1e-10);

        let zero = Analytic2D(|_, _, _| (0.0, 0.0));
        let tp = trace_back_2d(&zero, end, dt, 0.0, 1).unwrap();
        assert_eq!(tp.foot, end);
    }

    fn swirl(x: f64, y: f64, t: f64) -> (f64, f64) {
        let g = (std::f64::consts::PI * t / 1.5).cos() * std::f64::consts::PI;
        (
            -(x / 2.0).cos().powi(2) * y.sin() * g,
            x.sin() * (y / 2.0).cos().powi(2) * g,
        )
    }

    #[test]
    fn swirling_field_vs_refined_reference() {
        let f = Analytic2D(swirl);
        let reference = trace_back_2d(&f, (1.0, 1.0), 0.05, 0.0, 1000).unwrap();
        let got = trace_back_2d(&f, (1.0, 1.0), 0.05, 0.0, 4).unwrap();
        let err = (got.foot.0 - reference.foot.0)
            .abs()
            .max((got.foot.1 - reference.foot.1).abs());
        assert!(err <= 1e-9, "err = {err:e}");
    }

    #[test]
    fn fourth_order_substep_convergence() {
        let f = Analytic2D(swirl);
        let reference = trace_back_2d(&f, (0.8, -0.4), 0.4, 0.0, 1000).unwrap();
        let mut prev: Option<f64> = None;
        for substeps in [2usize, 4, 8] {
            let got = trace_back_2d(&f, (0.8, -0.4), 0.4, 0.0, substeps).unwrap();
            let err = ((got.foot.0 - reference.foot.0).powi(2)
                + (got.foot.1 - reference.foot.1).powi(2))
            .sqrt();
            if let Some(p) = prev {
                let ratio = p / err;
                assert!(
                    (12.0..=20.0).contains(&ratio),
                    "substeps {substeps}: ratio {ratio}"
                );
            }
            prev = Some(err);
        }
    }

    #[test]
    fn forward_backward_reversibility() {
        let f = Analytic2D(swirl);
        let start = (0.3, 0.9);
        let fwd = integrate_2d(&f, start, 0.0, 0.7, 1200);
        let back = integrate_2d(&f, fwd, 0.7, 0.0, 1200);
        let err = ((back.0 - start.0).powi(2) + (back.1 - start.1).powi(2)).sqrt();
        assert!(err <= 1e-10 * 0.7, "err = {err:e}");
    }

    #[test]
    fn default_substep_policy() {
        assert_eq!(default_substeps(0.3), 1);
        assert_eq!(default_substeps(1.0), 1);
        assert_eq!(default_substeps(2.5), 3);
        assert_eq!(default_substeps(10.5), 11);
    }
}
