//! File formats: modal-coefficient snapshots, invariant time series,
//! convergence tables, surface grids, and 1D cuts. All numeric output uses
//! 17 significant digits, so re-imported values are bit-identical.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use sldg_core::basis::{self, SpaceTag};
use sldg_core::models::InvariantRecord;
use sldg_core::nonsplit2d::SolutionP2D;
use sldg_core::split2d::SolutionQ2D;
use sldg_core::Mesh2D;

/// DG solution snapshot independent of the originating scheme.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub mesh: Mesh2D,
    pub k: usize,
    pub space: SpaceTag,
    pub time: f64,
    /// Cell-major modal coefficients; ordering documented in the README.
    pub coeffs: Vec<f64>,
}

impl Snapshot {
    pub fn from_q(u: &SolutionQ2D) -> Self {
        Self {
            mesh: u.mesh.clone(),
            k: u.k,
            space: SpaceTag::Q,
            time: u.time,
            coeffs: u.coeffs.clone(),
        }
    }

    pub fn from_p(u: &SolutionP2D) -> Self {
        Self {
            mesh: u.mesh.clone(),
            k: u.k,
            space: SpaceTag::P,
            time: u.time,
            coeffs: u.coeffs.clone(),
        }
    }

    #[inline]
    pub fn n_coeffs(&self) -> usize {
        basis::n_coeffs_2d(self.k, self.space)
    }

    pub fn eval_at(&self, x: f64, y: f64) -> f64 {
        let loc = self.mesh.locate(x, y);
        let nc = self.n_coeffs();
        let cell = self.mesh.cell_id(loc.ix, loc.iy);
        basis::eval_2d(
            &self.coeffs[cell * nc..(cell + 1) * nc],
            self.k,
            self.space,
            loc.xi,
            loc.eta,
        )
    }

    pub fn mass(&self) -> f64 {
        let nc = self.n_coeffs();
        let a = self.mesh.dx() * self.mesh.dy();
        self.coeffs.iter().step_by(nc).sum::<f64>() * a
    }

    pub fn same_domain(&self, other: &Snapshot) -> bool {
        let eps = 1e-12;
        (self.mesh.x.x_lo() - other.mesh.x.x_lo()).abs() < eps
            && (self.mesh.x.x_hi() - other.mesh.x.x_hi()).abs() < eps
            && (self.mesh.y.x_lo() - other.mesh.y.x_lo()).abs() < eps
            && (self.mesh.y.x_hi() - other.mesh.y.x_hi()).abs() < eps
    }
}

fn fmt_g(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let mesh = &snap.mesh;
    let mut out = String::new();
    out.push_str("# sldg-snapshot v1\n");
    writeln!(
        out,
        "# nx={} ny={} x_lo={} x_hi={} y_lo={} y_hi={} k={} space={} time={}",
        mesh.nx(),
        mesh.ny(),
        fmt_g(mesh.x.x_lo()),
        fmt_g(mesh.x.x_hi()),
        fmt_g(mesh.y.x_lo()),
        fmt_g(mesh.y.x_hi()),
        snap.k,
        match snap.space {
            SpaceTag::P => "P",
            SpaceTag::Q => "Q",
        },
        fmt_g(snap.time),
    )?;
    out.push_str("# coefficients: Q ordered by ix_deg*(k+1)+iy_deg, P graded-lex\n");
    out.push_str("ix,iy,coeffs...\n");
    let nc = snap.n_coeffs();
    for iy in 0..mesh.ny() {
        for ix in 0..mesh.nx() {
            let cell = mesh.cell_id(ix, iy);
            write!(out, "{ix},{iy}")?;
            for c in &snap.coeffs[cell * nc..(cell + 1) * nc] {
                write!(out, ",{}", fmt_g(*c))?;
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading snapshot {}", path.display()))?;
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or("");
    if magic.trim() != "# sldg-snapshot v1" {
        bail!("{} is not an sldg snapshot", path.display());
    }
    let header = lines
        .next()
        .ok_or_else(|| anyhow!("missing snapshot header"))?;
    let mut nx = 0usize;
    let mut ny = 0usize;
    let mut k = 0usize;
    let mut space = SpaceTag::P;
    let mut time = 0.0f64;
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for item in header.trim_start_matches('#').split_whitespace() {
        let Some((key, value)) = item.split_once('=') else {
            continue;
        };
        match key {
            "nx" => nx = value.parse()?,
            "ny" => ny = value.parse()?,
            "k" => k = value.parse()?,
            "space" => {
                space = match value {
                    "P" => SpaceTag::P,
                    "Q" => SpaceTag::Q,
                    v => bail!("unknown space tag '{v}'"),
                }
            }
            "time" => time = value.parse()?,
            "x_lo" => x_lo = value.parse()?,
            "x_hi" => x_hi = value.parse()?,
            "y_lo" => y_lo = value.parse()?,
            "y_hi" => y_hi = value.parse()?,
            _ => {}
        }
    }
    let mesh = Mesh2D::new(x_lo, x_hi, nx, y_lo, y_hi, ny).map_err(|e| anyhow!("{e}"))?;
    let nc = basis::n_coeffs_2d(k, space);
    let mut coeffs = vec![0.0; nx * ny * nc];
    let mut seen = 0usize;
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("ix,") {
            continue;
        }
        let mut parts = line.split(',');
        let ix: usize = parts.next().ok_or_else(|| anyhow!("bad row"))?.parse()?;
        let iy: usize = parts.next().ok_or_else(|| anyhow!("bad row"))?.parse()?;
        let cell = mesh.cell_id(ix, iy);
        for m in 0..nc {
            let v: f64 = parts
                .next()
                .ok_or_else(|| anyhow!("row ({ix},{iy}): expected {nc} coefficients"))?
                .parse()?;
            coeffs[cell * nc + m] = v;
        }
        seen += 1;
    }
    if seen != nx * ny {
        bail!("snapshot has {seen} rows, expected {}", nx * ny);
    }
    Ok(Snapshot {
        mesh,
        k,
        space,
        time,
        coeffs,
    })
}

/// One diagnostics sample per recorded step.
#[derive(Debug, Clone, Copy)]
pub struct InvariantSample {
    pub record: InvariantRecord,
    pub mass: f64,
}

/// Time series of the relative deviations of the conserved quantities.
pub fn write_invariants(path: &Path, samples: &[InvariantSample]) -> Result<()> {
    let mut out = String::from("time,L1_dev,L2_dev,energy_dev,entropy_or_enstrophy_dev\n");
    let Some(first) = samples.first() else {
        std::fs::write(path, out)?;
        return Ok(());
    };
    let dev = |v: f64, v0: f64| -> f64 {
        if v0.abs() > 0.0 {
            (v - v0) / v0.abs()
        } else {
            v - v0
        }
    };
    let r0 = first.record;
    for s in samples {
        let r = s.record;
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_g(r.time),
            fmt_g(dev(r.l1, r0.l1)),
            fmt_g(dev(r.l2, r0.l2)),
            fmt_g(dev(r.energy, r0.energy)),
            fmt_g(dev(r.entropy_or_enstrophy, r0.entropy_or_enstrophy)),
        )?;
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Solution sampled at cell centers, one row per cell.
pub fn write_surface(path: &Path, snap: &Snapshot) -> Result<()> {
    let mut out = String::from("x,y,value\n");
    for iy in 0..snap.mesh.ny() {
        for ix in 0..snap.mesh.nx() {
            let x = snap.mesh.x.center(ix);
            let y = snap.mesh.y.center(iy);
            writeln!(out, "{},{},{}", fmt_g(x), fmt_g(y), fmt_g(snap.eval_at(x, y)))?;
        }
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// 1D cut along a fixed line, four sample points per crossed cell.
pub fn write_cut(path: &Path, snap: &Snapshot, axis: char, at: f64) -> Result<()> {
    const OFFSETS: [f64; 4] = [-0.75, -0.25, 0.25, 0.75];
    let mut out = String::new();
    match axis {
        'x' => {
            // vertical cut x = at: sample along y
            out.push_str("y,value\n");
            for iy in 0..snap.mesh.ny() {
                let c = snap.mesh.y.center(iy);
                for &o in &OFFSETS {
                    let y = c + 0.5 * o * snap.mesh.dy();
                    writeln!(out, "{},{}", fmt_g(y), fmt_g(snap.eval_at(at, y)))?;
                }
            }
        }
        'y' => {
            out.push_str("x,value\n");
            for ix in 0..snap.mesh.nx() {
                let c = snap.mesh.x.center(ix);
                for &o in &OFFSETS {
                    let x = c + 0.5 * o * snap.mesh.dx();
                    writeln!(out, "{},{}", fmt_g(x), fmt_g(snap.eval_at(x, at)))?;
                }
            }
        }
        _ => bail!("cut axis must be 'x' or 'y'"),
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
