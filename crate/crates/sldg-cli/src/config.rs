//! Benchmark case configuration: flat `key=value` files plus command-line
//! overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    LinearConst,
    RigidBody,
    Swirling,
    Landau,
    EulerStationary,
    ShearLayer,
    KelvinHelmholtz,
}

impl CaseId {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "linear-const" => Self::LinearConst,
            "rigid-body" => Self::RigidBody,
            "swirling" => Self::Swirling,
            "landau" => Self::Landau,
            "euler-stationary" => Self::EulerStationary,
            "shear-layer" => Self::ShearLayer,
            "kelvin-helmholtz" => Self::KelvinHelmholtz,
            other => bail!("unknown case id '{other}'"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::LinearConst => "linear-const",
            Self::RigidBody => "rigid-body",
            Self::Swirling => "swirling",
            Self::Landau => "landau",
            Self::EulerStationary => "euler-stationary",
            Self::ShearLayer => "shear-layer",
            Self::KelvinHelmholtz => "kelvin-helmholtz",
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(
            self,
            Self::Landau | Self::EulerStationary | Self::ShearLayer | Self::KelvinHelmholtz
        )
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Split,
    NonSplit,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "split" => Self::Split,
            "nonsplit" => Self::NonSplit,
            other => bail!("unknown scheme '{other}' (split|nonsplit)"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Split => "split",
            Self::NonSplit => "nonsplit",
        }
    }
}

/// Full description of one benchmark run.
#[derive(Debug, Clone)]
pub struct CaseConfig {
    pub case: CaseId,
    pub scheme: Scheme,
    pub k: usize,
    pub qc: bool,
    /// LDG degree for the field solve of the nonlinear models.
    pub poisson_degree: usize,
    pub nx: usize,
    pub ny: usize,
    pub cfl: f64,
    pub t_final: f64,
    pub limiter: bool,
    // initial-condition parameters
    pub alpha: f64,
    pub k0: f64,
    pub delta: f64,
    pub shear_width: f64,
    pub bell_radius: f64,
    pub bell_center: (f64, f64),
    pub gauss_aniso: f64,
    pub swirl_period: f64,
    // harness knobs
    pub substeps: Option<usize>,
    /// 1 records invariants every step, n every n-th step, 0 disables.
    pub invariant_stride: usize,
    pub output_dir: Option<PathBuf>,
    pub reference_snapshot: Option<PathBuf>,
    pub single_thread: bool,
}

impl CaseConfig {
    /// Paper defaults for one case.
    pub fn for_case(case: CaseId) -> Self {
        let pi = std::f64::consts::PI;
        let mut cfg = Self {
            case,
            scheme: Scheme::Split,
            k: 1,
            qc: false,
            poisson_degree: 2,
            nx: 40,
            ny: 40,
            cfl: 2.5,
            t_final: 1.0,
            limiter: false,
            alpha: 0.5,
            k0: 0.5,
            delta: 0.05,
            shear_width: pi / 15.0,
            bell_radius: 0.3 * pi,
            bell_center: (0.3 * pi, 0.0),
            gauss_aniso: 1.0,
            swirl_period: 1.5,
            substeps: None,
            invariant_stride: 1,
            output_dir: None,
            reference_snapshot: None,
            single_thread: false,
        };
        match case {
            CaseId::LinearConst => cfg.t_final = pi,
            CaseId::RigidBody => cfg.t_final = 20.0 * pi,
            CaseId::Swirling => cfg.t_final = 1.5,
            CaseId::Landau => {
                cfg.t_final = 2.0;
                cfg.cfl = 5.0;
                cfg.nx = 200;
                cfg.ny = 200;
                cfg.limiter = true;
            }
            CaseId::EulerStationary => {
                cfg.t_final = 1.0;
                cfg.cfl = 1.0;
            }
            CaseId::ShearLayer => {
                cfg.t_final = 8.0;
                cfg.cfl = 1.0;
                cfg.nx = 100;
                cfg.ny = 100;
                cfg.poisson_degree = 1;
            }
            CaseId::KelvinHelmholtz => {
                cfg.t_final = 40.0;
                cfg.cfl = 1.0;
                cfg.nx = 100;
                cfg.ny = 100;
                cfg.poisson_degree = 1;
            }
        }
        cfg
    }

    /// Parse a flat `key=value` file ('#' starts a comment).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_entries(parse_entries(&text)?)
    }

    pub fn from_entries(entries: BTreeMap<String, String>) -> Result<Self> {
        let case = CaseId::parse(
            entries
                .get("case")
                .ok_or_else(|| anyhow!("config is missing 'case'"))?,
        )?;
        let mut cfg = Self::for_case(case);
        cfg.apply_entries(entries)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply `key=value` overrides on top of the current values.
    pub fn apply_entries(&mut self, entries: BTreeMap<String, String>) -> Result<()> {
        for (key, value) in entries {
            self.set(&key, &value)
                .with_context(|| format!("config key '{key}'"))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let fnum = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| anyhow!("expected a number, got '{value}'"))
        };
        let unum = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| anyhow!("expected an integer, got '{value}'"))
        };
        let flag = || -> Result<bool> {
            match value {
                "true" | "1" | "on" => Ok(true),
                "false" | "0" | "off" => Ok(false),
                _ => bail!("expected true/false, got '{value}'"),
            }
        };
        match key {
            "case" => self.case = CaseId::parse(value)?,
            "scheme" => self.scheme = Scheme::parse(value)?,
            "k" => self.k = unum()?,
            "qc" => self.qc = flag()?,
            "poisson_degree" => self.poisson_degree = unum()?,
            "nx" => self.nx = unum()?,
            "ny" => self.ny = unum()?,
            "mesh" => {
                let n = unum()?;
                self.nx = n;
                self.ny = n;
            }
            "cfl" => self.cfl = fnum()?,
            "t_final" => self.t_final = fnum()?,
            "limiter" => self.limiter = flag()?,
            "alpha" => self.alpha = fnum()?,
            "k0" => self.k0 = fnum()?,
            "delta" => self.delta = fnum()?,
            "shear_width" => self.shear_width = fnum()?,
            "bell_radius" => self.bell_radius = fnum()?,
            "bell_center_x" => self.bell_center.0 = fnum()?,
            "bell_center_y" => self.bell_center.1 = fnum()?,
            "gauss_aniso" => self.gauss_aniso = fnum()?,
            "swirl_period" => self.swirl_period = fnum()?,
            "substeps" => self.substeps = Some(unum()?),
            "invariant_stride" => self.invariant_stride = unum()?,
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "reference_snapshot" => self.reference_snapshot = Some(PathBuf::from(value)),
            "single_thread" => self.single_thread = flag()?,
            other => bail!("unknown key '{other}'"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > 2 {
            bail!("k = {} out of range (1..=2)", self.k);
        }
        if self.qc && self.scheme != Scheme::NonSplit {
            bail!("quadratic-curved upstream cells require scheme=nonsplit");
        }
        if self.limiter && !self.case.is_nonlinear() {
            bail!("the positivity limiter applies to nonlinear cases only");
        }
        if self.nx == 0 || self.ny == 0 {
            bail!("mesh sizes must be positive");
        }
        if !(self.cfl > 0.0) {
            bail!("cfl must be positive");
        }
        if !(self.t_final > 0.0) {
            bail!("t_final must be positive");
        }
        if self.poisson_degree == 0 || self.poisson_degree > 3 {
            bail!("poisson_degree {} out of range (1..=3)", self.poisson_degree);
        }
        Ok(())
    }

    /// Substep count for the characteristic tracer.
    pub fn trace_substeps(&self) -> usize {
        self.substeps
            .unwrap_or_else(|| sldg_core::trace::default_substeps(self.cfl))
    }
}

pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key=value, got '{raw}'", lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Parse `key=value` override arguments from the command line.
pub fn parse_overrides(args: &[String]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for arg in args {
        let (key, value) = arg
            .split_once('=')
            .ok_or_else(|| anyhow!("override '{arg}' is not key=value"))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}
