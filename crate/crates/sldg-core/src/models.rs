//! Coupled nonlinear drivers: Vlasov-Poisson in phase space, and the
//! guiding-center / incompressible-Euler models in the vorticity /
//! charge-density formulation -- with splitting (tensor `Q^k` states) and
//! non-splitting (`P^k` states) time steps, the positivity limiter, and the
//! conserved-quantity diagnostics.
//!
//! The non-splitting steps use a prediction-correction treatment of the
//! nonlinear characteristics: an Euler-foot predictor provides the field at
//! the end (and midpoint, for third order) of the step, and the corrector
//! retraces the upstream geometry through the temporally reconstructed
//! field.

use crate::basis::{self, eval_2d, gauss_legendre, gauss_lobatto, SpaceTag};
use crate::error::{Result, SldgError};
use crate::mesh::Mesh2D;
use crate::nonsplit2d::{step_2d, SolutionP2D, UpstreamMode};
use crate::poisson::{
    lift_to_p, FieldSolution1D, FieldSolution2D, PoissonSign, PoissonSolver1D, PoissonSolver2D,
};
use crate::sldg1d::Solution1D;
use crate::split2d::{sweep, Dir, LineSpec, SolutionQ2D};
use crate::trace::{PhaseSpaceField, TimeRule, TraceScheme, Velocity2D};

/// Floor inside the entropy logarithm.
pub const ENTROPY_CLAMP: f64 = 1e-14;

/// A 2D transport state in either representation.
#[derive(Debug, Clone)]
pub enum Transport2D {
    Q(SolutionQ2D),
    P(SolutionP2D),
}

impl Transport2D {
    pub fn mesh(&self) -> &Mesh2D {
        match self {
            Transport2D::Q(u) => &u.mesh,
            Transport2D::P(u) => &u.mesh,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Transport2D::Q(u) => u.k,
            Transport2D::P(u) => u.k,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            Transport2D::Q(u) => u.time,
            Transport2D::P(u) => u.time,
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Transport2D::Q(u) => u.mass(),
            Transport2D::P(u) => u.mass(),
        }
    }

    pub fn eval_at(&self, x: f64, y: f64) -> f64 {
        match self {
            Transport2D::Q(u) => u.eval_at(x, y),
            Transport2D::P(u) => u.eval_at(x, y),
        }
    }

    fn parts(&self) -> (&Mesh2D, usize, SpaceTag, &[f64]) {
        match self {
            Transport2D::Q(u) => (&u.mesh, u.k, SpaceTag::Q, &u.coeffs[..]),
            Transport2D::P(u) => (&u.mesh, u.k, SpaceTag::P, &u.coeffs[..]),
        }
    }

    /// Per-cell projection onto `P^r` source coefficients for the Poisson
    /// solvers.
    pub fn lift_to_p(&self, r: usize) -> Vec<f64> {
        let (mesh, k, space, coeffs) = self.parts();
        lift_to_p(coeffs, k, space, mesh.n_cells(), r)
    }
}

/// Kinetic phase-space state `(x, v)` with its electric field.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub f: Transport2D,
    pub field: FieldSolution1D,
    pub time: f64,
}

/// Fluid state (vorticity or charge density) with its stream-function field.
#[derive(Debug, Clone)]
pub struct FluidState {
    pub w: Transport2D,
    pub field: FieldSolution2D,
    pub sign: PoissonSign,
    pub time: f64,
}

/// Time-series entry of the conserved quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantRecord {
    pub time: f64,
    pub l1: f64,
    pub l2: f64,
    pub energy: f64,
    /// Entropy for kinetic states, enstrophy for fluid states.
    pub entropy_or_enstrophy: f64,
}

// ---------------------------------------------------------------------------
// positivity limiter

fn limit_cells(
    cell_count: usize,
    nc: usize,
    coeffs: &mut [f64],
    eval_min: impl Fn(&[f64]) -> f64,
) -> Result<()> {
    for cell in 0..cell_count {
        let c = &mut coeffs[cell * nc..(cell + 1) * nc];
        let avg = c[0];
        if avg < 0.0 {
            return Err(SldgError::NegativeCellAverage { cell, avg });
        }
        let min = eval_min(c);
        if min < 0.0 {
            let theta = if avg - min > 0.0 {
                (avg / (avg - min)).min(1.0)
            } else {
                1.0
            };
            for v in c.iter_mut().skip(1) {
                *v *= theta;
            }
        }
    }
    Ok(())
}

/// Zhang-Shu style scaling limiter: if the minimum over the tensor
/// Gauss-Lobatto control points (`k + 2` per direction) is negative, scale
/// the deviation from the cell average so the minimum becomes zero. Cell
/// averages are untouched.
pub fn apply_positivity_limiter(u: &mut Transport2D) -> Result<()> {
    let (k, space) = match u {
        Transport2D::Q(s) => (s.k, SpaceTag::Q),
        Transport2D::P(s) => (s.k, SpaceTag::P),
    };
    let pts = gauss_lobatto(k + 2)?.nodes;
    let eval_min = move |c: &[f64]| -> f64 {
        let mut m = f64::INFINITY;
        for &xi in &pts {
            for &eta in &pts {
                m = m.min(eval_2d(c, k, space, xi, eta));
            }
        }
        m
    };
    match u {
        Transport2D::Q(s) => {
            let n = s.mesh.n_cells();
            let nc = s.n_coeffs();
            limit_cells(n, nc, &mut s.coeffs, eval_min)
        }
        Transport2D::P(s) => {
            let n = s.mesh.n_cells();
            let nc = s.n_coeffs();
            limit_cells(n, nc, &mut s.coeffs, eval_min)
        }
    }
}

// ---------------------------------------------------------------------------
// Vlasov-Poisson

/// Charge density `rho(x) = ∫ f dv - M / L_x`, where the uniform ion
/// background neutralizes the actual discrete mass (the analytic background
/// of 1 differs from it only by the truncated Maxwellian tail).
pub fn vp_charge_density(f: &Transport2D) -> Solution1D {
    let (mesh, k, space, coeffs) = f.parts();
    let nc1 = k + 1;
    let dv = mesh.dy();
    let mut rho = Solution1D::zeros(mesh.x.clone(), k, f.time()).expect("degree ok");
    let exps = basis::basis_exponents(k, space);
    for iy in 0..mesh.ny() {
        for ix in 0..mesh.nx() {
            let cell = mesh.cell_id(ix, iy);
            let nc = exps.len();
            let c = &coeffs[cell * nc..(cell + 1) * nc];
            let dst = rho.cell_mut(ix);
            for (m, &(a, b)) in exps.iter().enumerate() {
                if b == 0 && a < nc1 {
                    dst[a] += c[m] * dv;
                }
            }
        }
    }
    let background = rho.mass() / mesh.x.length();
    for ix in 0..mesh.nx() {
        rho.cell_mut(ix)[0] -= background;
    }
    rho
}

/// One Strang-split Vlasov-Poisson step: half advection in `x` (speed `v`),
/// Poisson solve at the half step, full acceleration in `v` with the frozen
/// field, half advection in `x`.
pub fn vp_strang_step(
    f: &SolutionQ2D,
    solver: &PoissonSolver1D,
    dt: f64,
    limiter: bool,
) -> Result<(SolutionQ2D, FieldSolution1D)> {
    let maybe_limit = |u: &mut SolutionQ2D| -> Result<()> {
        if limiter {
            let mut t = Transport2D::Q(std::mem::replace(
                u,
                SolutionQ2D::zeros(u.mesh.clone(), u.k, 0.0)?,
            ));
            apply_positivity_limiter(&mut t)?;
            let Transport2D::Q(s) = t else { unreachable!() };
            *u = s;
        }
        Ok(())
    };
    let t0 = f.time;
    let mut f1 = sweep(f, Dir::X, |_row, v| LineSpec::Constant(v), t0, 0.5 * dt, 1)?;
    maybe_limit(&mut f1)?;
    let rho = vp_charge_density(&Transport2D::Q(f1.clone()));
    let e_half = solver.solve(&rho)?;
    let mut f2 = sweep(
        &f1,
        Dir::Y,
        |_col, x| LineSpec::Constant(e_half.eval_e(x)),
        t0,
        dt,
        1,
    )?;
    maybe_limit(&mut f2)?;
    let mut f3 = sweep(&f2, Dir::X, |_row, v| LineSpec::Constant(v), t0 + 0.5 * dt, 0.5 * dt, 1)?;
    maybe_limit(&mut f3)?;
    f3.time = t0 + dt;
    Ok((f3, e_half))
}

/// Order-2 non-splitting VP update: Euler-foot predictor with the field at
/// `t^n`, Poisson solve on the prediction, corrector traced through the
/// linear-in-time field.
fn vp_step_order2(
    f: &SolutionP2D,
    e_n: &FieldSolution1D,
    dt: f64,
    mode: UpstreamMode,
    substeps: usize,
    solve: &dyn Fn(&SolutionP2D) -> Result<FieldSolution1D>,
) -> Result<(SolutionP2D, FieldSolution1D)> {
    let t0 = f.time;
    let frozen = PhaseSpaceField::new(vec![(t0, e_n)], TimeRule::Constant);
    let predicted = step_2d(f, &frozen, dt, mode, TraceScheme::EulerEnd)?;
    let e_pred = solve(&predicted)?;
    let lin = PhaseSpaceField::new(vec![(t0, e_n), (t0 + dt, &e_pred)], TimeRule::Linear);
    let corrected = step_2d(f, &lin, dt, mode, TraceScheme::rk4(substeps))?;
    Ok((corrected, e_pred))
}

/// One non-splitting VP step with second- or third-order characteristic
/// tracing.
pub fn vp_nonsplit_step(
    f: &SolutionP2D,
    e_n: &FieldSolution1D,
    solver: &PoissonSolver1D,
    dt: f64,
    order: usize,
    mode: UpstreamMode,
    limiter: bool,
    substeps: usize,
) -> Result<(SolutionP2D, FieldSolution1D)> {
    let solve = |s: &SolutionP2D| -> Result<FieldSolution1D> {
        solver.solve(&vp_charge_density(&Transport2D::P(s.clone())))
    };
    vp_nonsplit_step_with(f, e_n, dt, order, mode, limiter, substeps, &solve)
}

/// Non-splitting VP step with an injectable field solve (the production
/// driver passes the Poisson solve; tests may freeze the field).
#[allow(clippy::too_many_arguments)]
pub fn vp_nonsplit_step_with(
    f: &SolutionP2D,
    e_n: &FieldSolution1D,
    dt: f64,
    order: usize,
    mode: UpstreamMode,
    limiter: bool,
    substeps: usize,
    solve: &dyn Fn(&SolutionP2D) -> Result<FieldSolution1D>,
) -> Result<(SolutionP2D, FieldSolution1D)> {
    let t0 = f.time;
    let mut out = match order {
        2 => {
            let (corrected, _) = vp_step_order2(f, e_n, dt, mode, substeps, solve)?;
            corrected
        }
        3 => {
            let (half, _) = vp_step_order2(f, e_n, 0.5 * dt, mode, substeps, solve)?;
            let e_half = solve(&half)?;
            let (full, _) = vp_step_order2(f, e_n, dt, mode, substeps, solve)?;
            let e_full = solve(&full)?;
            let quad = PhaseSpaceField::new(
                vec![(t0, e_n), (t0 + 0.5 * dt, &e_half), (t0 + dt, &e_full)],
                TimeRule::Quadratic,
            );
            step_2d(f, &quad, dt, mode, TraceScheme::rk4(substeps))?
        }
        _ => {
            return Err(SldgError::Invalid(format!(
                "tracing order {order} not supported (2 or 3)"
            )))
        }
    };
    if limiter {
        let mut t = Transport2D::P(out);
        apply_positivity_limiter(&mut t)?;
        let Transport2D::P(s) = t else { unreachable!() };
        out = s;
    }
    let e_new = solve(&out)?;
    Ok((out, e_new))
}

// ---------------------------------------------------------------------------
// guiding center / incompressible Euler

/// Velocity of a frozen stream-function field, for the split sweeps.
fn fluid_x_speed(field: &FieldSolution2D, x: f64, y: f64) -> f64 {
    field.eval_velocity(x, y).0
}

fn fluid_y_speed(field: &FieldSolution2D, x: f64, y: f64) -> f64 {
    field.eval_velocity(x, y).1
}

/// One Strang-split step of the fluid models: Poisson solve, half sweep in
/// `x`, Poisson solve, full sweep in `y`, Poisson solve, half sweep in `x`.
/// Each sweep sees the field frozen at its preceding solve.
pub fn gc_split_step(
    w: &SolutionQ2D,
    solver: &PoissonSolver2D,
    sign: PoissonSign,
    dt: f64,
    limiter: bool,
    substeps: usize,
) -> Result<(SolutionQ2D, FieldSolution2D)> {
    let maybe_limit = |u: &mut SolutionQ2D| -> Result<()> {
        if limiter {
            let mut t = Transport2D::Q(std::mem::replace(
                u,
                SolutionQ2D::zeros(u.mesh.clone(), u.k, 0.0)?,
            ));
            apply_positivity_limiter(&mut t)?;
            let Transport2D::Q(s) = t else { unreachable!() };
            *u = s;
        }
        Ok(())
    };
    let r = solver.degree();
    let t0 = w.time;
    let field_a = solver.solve(&Transport2D::Q(w.clone()).lift_to_p(r), sign)?;
    let fa = &field_a;
    let mut w1 = sweep(
        w,
        Dir::X,
        |_row, y| LineSpec::Varying(Box::new(move |x, _t| fluid_x_speed(fa, x, y))),
        t0,
        0.5 * dt,
        substeps,
    )?;
    maybe_limit(&mut w1)?;
    let field_b = solver.solve(&Transport2D::Q(w1.clone()).lift_to_p(r), sign)?;
    let fb = &field_b;
    let mut w2 = sweep(
        &w1,
        Dir::Y,
        |_col, x| LineSpec::Varying(Box::new(move |y, _t| fluid_y_speed(fb, x, y))),
        t0,
        dt,
        substeps,
    )?;
    maybe_limit(&mut w2)?;
    let field_c = solver.solve(&Transport2D::Q(w2.clone()).lift_to_p(r), sign)?;
    let fc = &field_c;
    let mut w3 = sweep(
        &w2,
        Dir::X,
        |_row, y| LineSpec::Varying(Box::new(move |x, _t| fluid_x_speed(fc, x, y))),
        t0 + 0.5 * dt,
        0.5 * dt,
        substeps,
    )?;
    maybe_limit(&mut w3)?;
    w3.time = t0 + dt;
    Ok((w3, field_c))
}

/// Fluid velocity field with temporal reconstruction over stream-function
/// snapshots; thin adapter so the fluid drivers mirror the kinetic ones.
struct FluidSnapshots<'a> {
    inner: crate::trace::FluidField<'a>,
}

impl Velocity2D for FluidSnapshots<'_> {
    fn eval(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        self.inner.eval(x, y, t)
    }

    fn check_time_span(&self, t0: f64, t1: f64) -> Result<()> {
        self.inner.check_time_span(t0, t1)
    }
}

fn gc_step_order2(
    w: &SolutionP2D,
    field_n: &FieldSolution2D,
    dt: f64,
    mode: UpstreamMode,
    substeps: usize,
    solve: &dyn Fn(&SolutionP2D) -> Result<FieldSolution2D>,
) -> Result<(SolutionP2D, FieldSolution2D)> {
    let t0 = w.time;
    let frozen = FluidSnapshots {
        inner: crate::trace::FluidField::new(vec![(t0, field_n)], TimeRule::Constant),
    };
    let predicted = step_2d(w, &frozen, dt, mode, TraceScheme::EulerEnd)?;
    let field_pred = solve(&predicted)?;
    let lin = FluidSnapshots {
        inner: crate::trace::FluidField::new(
            vec![(t0, field_n), (t0 + dt, &field_pred)],
            TimeRule::Linear,
        ),
    };
    let corrected = step_2d(w, &lin, dt, mode, TraceScheme::rk4(substeps))?;
    Ok((corrected, field_pred))
}

/// One non-splitting step of the fluid models with prediction-correction
/// characteristic tracing of order 2 or 3.
pub fn gc_nonsplit_step(
    w: &SolutionP2D,
    field_n: &FieldSolution2D,
    solver: &PoissonSolver2D,
    sign: PoissonSign,
    dt: f64,
    order: usize,
    mode: UpstreamMode,
    limiter: bool,
    substeps: usize,
) -> Result<(SolutionP2D, FieldSolution2D)> {
    let r = solver.degree();
    let solve = |s: &SolutionP2D| -> Result<FieldSolution2D> {
        solver.solve(&Transport2D::P(s.clone()).lift_to_p(r), sign)
    };
    gc_nonsplit_step_with(w, field_n, dt, order, mode, limiter, substeps, &solve)
}

/// Variant with an injectable field solve.
#[allow(clippy::too_many_arguments)]
pub fn gc_nonsplit_step_with(
    w: &SolutionP2D,
    field_n: &FieldSolution2D,
    dt: f64,
    order: usize,
    mode: UpstreamMode,
    limiter: bool,
    substeps: usize,
    solve: &dyn Fn(&SolutionP2D) -> Result<FieldSolution2D>,
) -> Result<(SolutionP2D, FieldSolution2D)> {
    let t0 = w.time;
    let mut out = match order {
        2 => {
            let (corrected, _) = gc_step_order2(w, field_n, dt, mode, substeps, solve)?;
            corrected
        }
        3 => {
            let (half, _) = gc_step_order2(w, field_n, 0.5 * dt, mode, substeps, solve)?;
            let f_half = solve(&half)?;
            let (full, _) = gc_step_order2(w, field_n, dt, mode, substeps, solve)?;
            let f_full = solve(&full)?;
            let quad = FluidSnapshots {
                inner: crate::trace::FluidField::new(
                    vec![(t0, field_n), (t0 + 0.5 * dt, &f_half), (t0 + dt, &f_full)],
                    TimeRule::Quadratic,
                ),
            };
            step_2d(w, &quad, dt, mode, TraceScheme::rk4(substeps))?
        }
        _ => {
            return Err(SldgError::Invalid(format!(
                "tracing order {order} not supported (2 or 3)"
            )))
        }
    };
    if limiter {
        let mut t = Transport2D::P(out);
        apply_positivity_limiter(&mut t)?;
        let Transport2D::P(s) = t else { unreachable!() };
        out = s;
    }
    let field_new = solve(&out)?;
    Ok((out, field_new))
}

// ---------------------------------------------------------------------------
// invariants

fn quad_over_cells(
    mesh: &Mesh2D,
    k: usize,
    space: SpaceTag,
    coeffs: &[f64],
    mut visit: impl FnMut(f64, f64, f64, f64),
) {
    let rule = gauss_legendre(k + 3).expect("valid rule");
    let nc = basis::n_coeffs_2d(k, space);
    let hx = 0.5 * mesh.dx();
    let hy = 0.5 * mesh.dy();
    for iy in 0..mesh.ny() {
        let cy = mesh.y.center(iy);
        for ix in 0..mesh.nx() {
            let cell = mesh.cell_id(ix, iy);
            let c = &coeffs[cell * nc..(cell + 1) * nc];
            let cx = mesh.x.center(ix);
            for (&tx, &wx) in rule.nodes.iter().zip(&rule.weights) {
                for (&ty, &wy) in rule.nodes.iter().zip(&rule.weights) {
                    let v = eval_2d(c, k, space, tx, ty);
                    visit(v, cx + hx * tx, cy + hy * ty, wx * wy * hx * hy);
                }
            }
        }
    }
}

/// L1 and L2 norms of a transport state (per-cell Gauss quadrature with
/// `k + 3` points per direction).
pub fn scalar_norms(u: &Transport2D) -> (f64, f64) {
    let (mesh, k, space, coeffs) = u.parts();
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    quad_over_cells(mesh, k, space, coeffs, |v, _x, _y, w| {
        l1 += w * v.abs();
        l2 += w * v * v;
    });
    (l1, l2.sqrt())
}

/// Conserved quantities of a kinetic state: L1 and L2 norms, total energy
/// `∫∫ f v^2 + ∫ E^2`, and entropy `∫∫ f log f` (clamped at 1e-14).
pub fn vp_invariants(f: &Transport2D, e: &FieldSolution1D) -> InvariantRecord {
    let (mesh, k, space, coeffs) = f.parts();
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    let mut kinetic = 0.0;
    let mut entropy = 0.0;
    quad_over_cells(mesh, k, space, coeffs, |v, _x, vel, w| {
        l1 += w * v.abs();
        l2 += w * v * v;
        kinetic += w * v * vel * vel;
        entropy += w * v * v.max(ENTROPY_CLAMP).ln();
    });
    InvariantRecord {
        time: f.time(),
        l1,
        l2: l2.sqrt(),
        energy: kinetic + e.e_l2_sq(),
        entropy_or_enstrophy: entropy,
    }
}

/// Conserved quantities of a fluid state: L1 and L2 norms of the advected
/// scalar, flow energy `∫ |u|^2`, and enstrophy `∫ w^2`.
pub fn fluid_invariants(w: &Transport2D, field: &FieldSolution2D) -> InvariantRecord {
    let (mesh, k, space, coeffs) = w.parts();
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    quad_over_cells(mesh, k, space, coeffs, |v, _x, _y, wq| {
        l1 += wq * v.abs();
        l2 += wq * v * v;
    });
    InvariantRecord {
        time: w.time(),
        l1,
        l2: l2.sqrt(),
        energy: field.velocity_l2_sq(),
        entropy_or_enstrophy: l2,
    }
}
