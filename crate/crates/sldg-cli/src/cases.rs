//! Registry of the benchmark experiments: domains, initial data, velocity
//! fields, transport-speed bounds, and exact solutions where available.

use sldg_core::poisson::PoissonSign;
use sldg_core::trace::Velocity2D;
use sldg_core::Mesh2D;

use crate::config::{CaseConfig, CaseId};

/// Analytic velocity field of the linear transport cases.
#[derive(Debug, Clone, Copy)]
pub enum LinearField {
    Const { a: f64, b: f64 },
    Rigid,
    Swirl { period: f64 },
}

impl Velocity2D for LinearField {
    #[inline]
    fn eval(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        match *self {
            LinearField::Const { a, b } => (a, b),
            LinearField::Rigid => (-y, x),
            LinearField::Swirl { period } => {
                let g = (std::f64::consts::PI * t / period).cos() * std::f64::consts::PI;
                (
                    -(x / 2.0).cos().powi(2) * y.sin() * g,
                    x.sin() * (y / 2.0).cos().powi(2) * g,
                )
            }
        }
    }

    fn x_line_constant(&self, y0: f64, _t0: f64, _t1: f64) -> Option<f64> {
        match *self {
            LinearField::Const { a, .. } => Some(a),
            LinearField::Rigid => Some(-y0),
            LinearField::Swirl { .. } => None,
        }
    }

    fn y_line_constant(&self, x0: f64, _t0: f64, _t1: f64) -> Option<f64> {
        match *self {
            LinearField::Const { b, .. } => Some(b),
            LinearField::Rigid => Some(x0),
            LinearField::Swirl { .. } => None,
        }
    }
}

/// What kind of coupling a case runs under.
pub enum CaseKind {
    Linear(LinearField),
    VlasovPoisson,
    Fluid(PoissonSign),
}

pub struct CaseSetup {
    pub kind: CaseKind,
    pub domain: (f64, f64, f64, f64),
    pub initial: Box<dyn Fn(f64, f64) -> f64>,
    /// Exact solution at time `t`, when one is known.
    pub exact: Option<Box<dyn Fn(f64, f64, f64) -> f64>>,
    /// Upper bounds for the transport speeds of linear cases (per direction).
    pub linear_speeds: (f64, f64),
}

impl CaseSetup {
    pub fn mesh(&self, cfg: &CaseConfig) -> sldg_core::Result<Mesh2D> {
        let (x0, x1, y0, y1) = self.domain;
        Mesh2D::new(x0, x1, cfg.nx, y0, y1, cfg.ny)
    }
}

/// Build the full description of the configured experiment.
pub fn setup(cfg: &CaseConfig) -> CaseSetup {
    let pi = std::f64::consts::PI;
    match cfg.case {
        CaseId::LinearConst => {
            let u0 = |x: f64, y: f64| (x + y).sin();
            CaseSetup {
                kind: CaseKind::Linear(LinearField::Const { a: 1.0, b: 1.0 }),
                domain: (-pi, pi, -pi, pi),
                initial: Box::new(u0),
                exact: Some(Box::new(move |x, y, t| (x + y - 2.0 * t).sin())),
                linear_speeds: (1.0, 1.0),
            }
        }
        CaseId::RigidBody => {
            let aniso = cfg.gauss_aniso;
            let u0 = move |x: f64, y: f64| (-(x * x) - aniso * y * y).exp();
            CaseSetup {
                kind: CaseKind::Linear(LinearField::Rigid),
                domain: (-2.0 * pi, 2.0 * pi, -2.0 * pi, 2.0 * pi),
                initial: Box::new(u0),
                exact: Some(Box::new(move |x, y, t| {
                    let (c, s) = (t.cos(), t.sin());
                    let xr = x * c + y * s;
                    let yr = -x * s + y * c;
                    u0(xr, yr)
                })),
                linear_speeds: (2.0 * pi, 2.0 * pi),
            }
        }
        CaseId::Swirling => {
            let r0 = cfg.bell_radius;
            let (cx, cy) = cfg.bell_center;
            let period = cfg.swirl_period;
            let u0 = move |x: f64, y: f64| {
                let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                if r < r0 {
                    r0 * (r / (2.0 * r0) * pi).cos().powi(6)
                } else {
                    0.0
                }
            };
            CaseSetup {
                kind: CaseKind::Linear(LinearField::Swirl { period }),
                domain: (-pi, pi, -pi, pi),
                initial: Box::new(u0),
                // the flow reverses: the solution returns to the initial
                // data at integer multiples of the period
                exact: Some(Box::new(move |x, y, t| {
                    let phase = t / period;
                    if (phase - phase.round()).abs() < 1e-12 {
                        u0(x, y)
                    } else {
                        f64::NAN
                    }
                })),
                linear_speeds: (pi, pi),
            }
        }
        CaseId::Landau => {
            let alpha = cfg.alpha;
            let k0 = cfg.k0;
            let f0 = move |x: f64, v: f64| {
                (1.0 + alpha * (k0 * x).cos()) * (-0.5 * v * v).exp() / (2.0 * pi).sqrt()
            };
            CaseSetup {
                kind: CaseKind::VlasovPoisson,
                domain: (0.0, 2.0 * pi / k0, -2.0 * pi, 2.0 * pi),
                initial: Box::new(f0),
                exact: None,
                linear_speeds: (0.0, 0.0),
            }
        }
        CaseId::EulerStationary => {
            let w0 = |x: f64, y: f64| -2.0 * x.sin() * y.sin();
            CaseSetup {
                kind: CaseKind::Fluid(PoissonSign::Euler),
                domain: (0.0, 2.0 * pi, 0.0, 2.0 * pi),
                initial: Box::new(w0),
                exact: Some(Box::new(move |x, y, _t| w0(x, y))),
                linear_speeds: (0.0, 0.0),
            }
        }
        CaseId::ShearLayer => {
            let delta = cfg.delta;
            let width = cfg.shear_width;
            let w0 = move |x: f64, y: f64| {
                let sech = |z: f64| 1.0 / z.cosh();
                if y <= pi {
                    delta * x.cos() - sech((y - pi / 2.0) / width).powi(2) / width
                } else {
                    delta * x.cos() + sech((1.5 * pi - y) / width).powi(2) / width
                }
            };
            CaseSetup {
                kind: CaseKind::Fluid(PoissonSign::Euler),
                domain: (0.0, 2.0 * pi, 0.0, 2.0 * pi),
                initial: Box::new(w0),
                exact: None,
                linear_speeds: (0.0, 0.0),
            }
        }
        CaseId::KelvinHelmholtz => {
            let k0 = cfg.k0;
            let r0 = move |x: f64, y: f64| y.sin() + 0.015 * (k0 * x).cos();
            CaseSetup {
                kind: CaseKind::Fluid(PoissonSign::Guiding),
                domain: (0.0, 4.0 * pi, 0.0, 2.0 * pi),
                initial: Box::new(r0),
                exact: None,
                linear_speeds: (0.0, 0.0),
            }
        }
    }
}
