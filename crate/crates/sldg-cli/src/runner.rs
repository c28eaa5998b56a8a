//! Time-stepping loop: CFL-based step sizes (re-measured from the current
//! field for the nonlinear models), invariant recording, and wall-clock
//! timing of the stepping work.

use std::time::Instant;

use sldg_core::models::{
    self, fluid_invariants, gc_nonsplit_step, gc_split_step, vp_charge_density, vp_invariants,
    vp_nonsplit_step, vp_strang_step, InvariantRecord, Transport2D,
};
use sldg_core::nonsplit2d::{step_2d, SolutionP2D, UpstreamMode};
use sldg_core::poisson::{PoissonSolver1D, PoissonSolver2D};
use sldg_core::split2d::{strang_step, SolutionQ2D};
use sldg_core::trace::TraceScheme;
use sldg_core::{Mesh2D, SldgError};

use crate::cases::{self, CaseKind};
use crate::config::{CaseConfig, Scheme};
use crate::io::{InvariantSample, Snapshot};

/// Failure of a run: configuration problems map to exit code 2, numerical
/// aborts to exit code 3 with the failing step index.
#[derive(Debug)]
pub enum RunError {
    Config(anyhow::Error),
    Numerical { step: usize, source: SldgError },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "configuration error: {e}"),
            RunError::Numerical { step, source } => {
                write!(f, "numerical abort at step {step}: {source}")
            }
        }
    }
}

impl std::error::Error for RunError {}

pub struct RunOutput {
    pub snapshot: Snapshot,
    pub samples: Vec<InvariantSample>,
    pub cpu_seconds: f64,
    pub steps: usize,
    pub initial_mass: f64,
}

impl RunOutput {
    /// Relative drift of the total integral over the run.
    pub fn mass_deviation(&self) -> f64 {
        let m0 = self.initial_mass;
        let l1 = self
            .samples
            .first()
            .map(|s| s.record.l1)
            .unwrap_or(1.0)
            .max(f64::MIN_POSITIVE);
        (self.snapshot.mass() - m0).abs() / m0.abs().max(l1)
    }
}

/// Time step from the CFL number and the per-direction maximum speeds; the
/// caller truncates the final step.
pub fn compute_dt(cfl: f64, mesh: &Mesh2D, a_max: f64, b_max: f64) -> Result<f64, SldgError> {
    let denom = a_max / mesh.dx() + b_max / mesh.dy();
    if !(denom > 0.0) {
        return Err(SldgError::Invalid(
            "zero transport speeds in both directions".into(),
        ));
    }
    Ok(cfl / denom)
}

struct StepClock {
    total: f64,
}

impl StepClock {
    fn new() -> Self {
        Self { total: 0.0 }
    }

    fn measure<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.total += t0.elapsed().as_secs_f64();
        out
    }
}

/// Execute one configured benchmark run.
pub fn run_case(cfg: &CaseConfig) -> Result<RunOutput, RunError> {
    cfg.validate().map_err(RunError::Config)?;
    let setup = cases::setup(cfg);
    let mesh = setup.mesh(cfg).map_err(|e| RunError::Numerical {
        step: 0,
        source: e,
    })?;
    let t_final = cfg.t_final;
    let t_eps = 1e-12 * t_final.max(1.0);
    let mode = if cfg.qc {
        UpstreamMode::Qc
    } else {
        UpstreamMode::Quad
    };
    let substeps = cfg.trace_substeps();
    let order = cfg.k + 1;
    let record_due = |step: usize| -> bool {
        cfg.invariant_stride > 0 && step % cfg.invariant_stride == 0
    };
    let numerical = |step: usize| move |source: SldgError| RunError::Numerical { step, source };

    let mut samples: Vec<InvariantSample> = Vec::new();
    let mut clock = StepClock::new();
    let mut steps = 0usize;

    macro_rules! record_linear {
        ($u:expr, $wrap:path) => {
            if record_due(steps) {
                let t = $wrap($u.clone());
                let (l1, l2) = models::scalar_norms(&t);
                samples.push(InvariantSample {
                    record: InvariantRecord {
                        time: t.time(),
                        l1,
                        l2,
                        energy: 0.0,
                        entropy_or_enstrophy: 0.0,
                    },
                    mass: t.mass(),
                });
            }
        };
    }

    let (snapshot, initial_mass) = match (&setup.kind, cfg.scheme) {
        (CaseKind::Linear(field), Scheme::Split) => {
            let mut u = SolutionQ2D::from_fn(mesh.clone(), cfg.k, 0.0, &setup.initial)
                .map_err(numerical(0))?;
            let m0 = u.mass();
            let (ax, by) = setup.linear_speeds;
            record_linear!(&u, Transport2D::Q);
            while u.time < t_final - t_eps {
                let dt = compute_dt(cfg.cfl, &mesh, ax, by)
                    .map_err(numerical(steps))?
                    .min(t_final - u.time);
                u = clock
                    .measure(|| strang_step(&u, field, dt, substeps))
                    .map_err(numerical(steps))?;
                steps += 1;
                record_linear!(&u, Transport2D::Q);
            }
            (Snapshot::from_q(&u), m0)
        }
        (CaseKind::Linear(field), Scheme::NonSplit) => {
            let mut u = SolutionP2D::from_fn(mesh.clone(), cfg.k, 0.0, &setup.initial)
                .map_err(numerical(0))?;
            let m0 = u.mass();
            let (ax, by) = setup.linear_speeds;
            record_linear!(&u, Transport2D::P);
            while u.time < t_final - t_eps {
                let dt = compute_dt(cfg.cfl, &mesh, ax, by)
                    .map_err(numerical(steps))?
                    .min(t_final - u.time);
                u = clock
                    .measure(|| step_2d(&u, field, dt, mode, TraceScheme::rk4(substeps)))
                    .map_err(numerical(steps))?;
                steps += 1;
                record_linear!(&u, Transport2D::P);
            }
            (Snapshot::from_p(&u), m0)
        }
        (CaseKind::VlasovPoisson, scheme) => {
            let r = cfg.poisson_degree;
            let solver = PoissonSolver1D::new(&mesh.x, r).map_err(numerical(0))?;
            let a_max = mesh.y.x_lo().abs().max(mesh.y.x_hi().abs());
            match scheme {
                Scheme::Split => {
                    let mut f = SolutionQ2D::from_fn(mesh.clone(), cfg.k, 0.0, &setup.initial)
                        .map_err(numerical(0))?;
                    let m0 = f.mass();
                    let mut e = solver
                        .solve(&vp_charge_density(&Transport2D::Q(f.clone())))
                        .map_err(numerical(0))?;
                    if record_due(0) {
                        let t = Transport2D::Q(f.clone());
                        samples.push(InvariantSample {
                            record: vp_invariants(&t, &e),
                            mass: t.mass(),
                        });
                    }
                    while f.time < t_final - t_eps {
                        let b_max = e.max_abs_e(cfg.k + 2);
                        let dt = compute_dt(cfg.cfl, &mesh, a_max, b_max)
                            .map_err(numerical(steps))?
                            .min(t_final - f.time);
                        let (next, e_half) = clock
                            .measure(|| vp_strang_step(&f, &solver, dt, cfg.limiter))
                            .map_err(numerical(steps))?;
                        f = next;
                        e = e_half;
                        steps += 1;
                        if record_due(steps) {
                            let t = Transport2D::Q(f.clone());
                            let e_rec = solver
                                .solve(&vp_charge_density(&t))
                                .map_err(numerical(steps))?;
                            samples.push(InvariantSample {
                                record: vp_invariants(&t, &e_rec),
                                mass: t.mass(),
                            });
                        }
                    }
                    (Snapshot::from_q(&f), m0)
                }
                Scheme::NonSplit => {
                    let mut f = SolutionP2D::from_fn(mesh.clone(), cfg.k, 0.0, &setup.initial)
                        .map_err(numerical(0))?;
                    let m0 = f.mass();
                    let mut e = solver
                        .solve(&vp_charge_density(&Transport2D::P(f.clone())))
                        .map_err(numerical(0))?;
                    if record_due(0) {
                        let t = Transport2D::P(f.clone());
                        samples.push(InvariantSample {
                            record: vp_invariants(&t, &e),
                            mass: t.mass(),
                        });
                    }
                    while f.time < t_final - t_eps {
                        let b_max = e.max_abs_e(cfg.k + 2);
                        let dt = compute_dt(cfg.cfl, &mesh, a_max, b_max)
                            .map_err(numerical(steps))?
                            .min(t_final - f.time);
                        let (next, e_next) = clock
                            .measure(|| {
                                vp_nonsplit_step(
                                    &f,
                                    &e,
                                    &solver,
                                    dt,
                                    order,
                                    mode,
                                    cfg.limiter,
                                    substeps,
                                )
                            })
                            .map_err(numerical(steps))?;
                        f = next;
                        e = e_next;
                        steps += 1;
                        if record_due(steps) {
                            let t = Transport2D::P(f.clone());
                            samples.push(InvariantSample {
                                record: vp_invariants(&t, &e),
                                mass: t.mass(),
                            });
                        }
                    }
                    (Snapshot::from_p(&f), m0)
                }
            }
        }
        (CaseKind::Fluid(sign), scheme) => {
            let r = cfg.poisson_degree;
            let solver = PoissonSolver2D::new(&mesh, r).map_err(numerical(0))?;
            let sign = *sign;
            match scheme {
                Scheme::Split => {
                    let mut w = SolutionQ2D::from_fn(mesh.clone(), cfg.k, 0.0, &setup.initial)
                        .map_err(numerical(0))?;
                    let m0 = w.mass();
                    let mut field = solver
                        .solve(&Transport2D::Q(w.clone()).lift_to_p(r), sign)
                        .map_err(numerical(0))?;
                    if record_due(0) {
                        let t = Transport2D::Q(w.clone());
                        samples.push(InvariantSample {
                            record: fluid_invariants(&t, &field),
                            mass: t.mass(),
                        });
                    }
                    while w.time < t_final - t_eps {
                        let (a_max, b_max) = field.max_speeds(cfg.k + 2);
                        let dt = compute_dt(cfg.cfl, &mesh, a_max, b_max)
                            .map_err(numerical(steps))?
                            .min(t_final - w.time);
                        let (next, f_next) = clock
                            .measure(|| {
                                gc_split_step(&w, &solver, sign, dt, cfg.limiter, substeps)
                            })
                            .map_err(numerical(steps))?;
                        w = next;
                        field = f_next;
                        steps += 1;
                        if record_due(steps) {
                            let t = Transport2D::Q(w.clone());
                            let f_rec = solver
                                .solve(&t.lift_to_p(r), sign)
                                .map_err(numerical(steps))?;
                            samples.push(InvariantSample {
                                record: fluid_invariants(&t, &f_rec),
                                mass: t.mass(),
                            });
                        }
                    }
                    (Snapshot::from_q(&w), m0)
                }
                Scheme::NonSplit => {
                    let mut w = SolutionP2D::from_fn(mesh.clone(), cfg.k, 0.0, &setup.initial)
                        .map_err(numerical(0))?;
                    let m0 = w.mass();
                    let mut field = solver
                        .solve(&Transport2D::P(w.clone()).lift_to_p(r), sign)
                        .map_err(numerical(0))?;
                    if record_due(0) {
                        let t = Transport2D::P(w.clone());
                        samples.push(InvariantSample {
                            record: fluid_invariants(&t, &field),
                            mass: t.mass(),
                        });
                    }
                    while w.time < t_final - t_eps {
                        let (a_max, b_max) = field.max_speeds(cfg.k + 2);
                        let dt = compute_dt(cfg.cfl, &mesh, a_max, b_max)
                            .map_err(numerical(steps))?
                            .min(t_final - w.time);
                        let (next, f_next) = clock
                            .measure(|| {
                                gc_nonsplit_step(
                                    &w,
                                    &field,
                                    &solver,
                                    sign,
                                    dt,
                                    order,
                                    mode,
                                    cfg.limiter,
                                    substeps,
                                )
                            })
                            .map_err(numerical(steps))?;
                        w = next;
                        field = f_next;
                        steps += 1;
                        if record_due(steps) {
                            let t = Transport2D::P(w.clone());
                            samples.push(InvariantSample {
                                record: fluid_invariants(&t, &field),
                                mass: t.mass(),
                            });
                        }
                    }
                    (Snapshot::from_p(&w), m0)
                }
            }
        }
    };

    Ok(RunOutput {
        snapshot,
        samples,
        cpu_seconds: clock.total,
        steps,
        initial_mass,
    })
}
