//! Non-splitting 2D SLDG scheme on `P^k` spaces: trace the upstream cell of
//! every Eulerian cell, approximate it by a straight or quadratic-curved
//! quadrilateral, clip it against the background mesh, reconstruct the
//! adjoint test polynomial by least squares, and assemble the new moments
//! from line integrals via Green's theorem.

pub mod geom;

use geom::{chain_area_centroid, partition_chain, split_pieces_at_lines, Axis, Piece};

use crate::basis::{
    self, basis_exponents, eval_2d, legendre_monomial_coeffs, n_coeffs_2d, SpaceTag, MAX_DEGREE,
};
use crate::error::{Result, SldgError};
use crate::linalg::{cholesky_factor, cholesky_solve};
use crate::mesh::{Mesh2D, EPS_GEOM_REL};
use crate::trace::{euler_foot_2d, integrate_2d, TraceScheme, Velocity2D};

/// Total-degree DG solution: `(k+1)(k+2)/2` coefficients per cell, y-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionP2D {
    pub mesh: Mesh2D,
    pub k: usize,
    pub coeffs: Vec<f64>,
    pub time: f64,
}

impl SolutionP2D {
    pub fn zeros(mesh: Mesh2D, k: usize, time: f64) -> Result<Self> {
        basis::check_degree(k)?;
        let n = mesh.n_cells() * n_coeffs_2d(k, SpaceTag::P);
        Ok(Self {
            mesh,
            k,
            coeffs: vec![0.0; n],
            time,
        })
    }

    pub fn from_fn(
        mesh: Mesh2D,
        k: usize,
        time: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut s = Self::zeros(mesh, k, time)?;
        let nc = s.n_coeffs();
        for iy in 0..s.mesh.ny() {
            for ix in 0..s.mesh.nx() {
                let p = basis::project_2d(
                    &f,
                    s.mesh.x.face(ix),
                    s.mesh.x.face(ix + 1),
                    s.mesh.y.face(iy),
                    s.mesh.y.face(iy + 1),
                    k,
                    SpaceTag::P,
                );
                let cell = s.mesh.cell_id(ix, iy);
                s.coeffs[cell * nc..(cell + 1) * nc].copy_from_slice(&p.coeffs);
            }
        }
        Ok(s)
    }

    #[inline]
    pub fn n_coeffs(&self) -> usize {
        n_coeffs_2d(self.k, SpaceTag::P)
    }

    #[inline]
    pub fn cell(&self, ix: usize, iy: usize) -> &[f64] {
        let nc = self.n_coeffs();
        let c = self.mesh.cell_id(ix, iy);
        &self.coeffs[c * nc..(c + 1) * nc]
    }

    pub fn poly(&self, ix: usize, iy: usize) -> basis::ModalPoly2D {
        basis::ModalPoly2D {
            k: self.k,
            space: SpaceTag::P,
            coeffs: self.cell(ix, iy).to_vec(),
        }
    }

    pub fn eval_at(&self, x: f64, y: f64) -> f64 {
        let loc = self.mesh.locate(x, y);
        eval_2d(self.cell(loc.ix, loc.iy), self.k, SpaceTag::P, loc.xi, loc.eta)
    }

    pub fn mass(&self) -> f64 {
        let nc = self.n_coeffs();
        let a = self.mesh.dx() * self.mesh.dy();
        self.coeffs.iter().step_by(nc).sum::<f64>() * a
    }

    pub fn l2_norm(&self) -> f64 {
        let nc = self.n_coeffs();
        let w = 0.25 * self.mesh.dx() * self.mesh.dy();
        let norms = basis::norms_sq_2d(self.k, SpaceTag::P);
        let mut s = 0.0;
        for cell in 0..self.mesh.n_cells() {
            for m in 0..nc {
                let c = self.coeffs[cell * nc + m];
                s += c * c * norms[m] * w;
            }
        }
        s.sqrt()
    }
}

/// Upstream-cell approximation quality: straight quadrilateral (second
/// order) or quadratic-curved edges (third order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpstreamMode {
    Quad,
    Qc,
}

/// Traced source points of one cell, in reference coordinates: four corners
/// counterclockwise from bottom-left, then the four edge midpoints, then the
/// center.
pub const SOURCE_POINTS: [(f64, f64); 9] = [
    (-1.0, -1.0),
    (1.0, -1.0),
    (1.0, 1.0),
    (-1.0, 1.0),
    (0.0, -1.0),
    (1.0, 0.0),
    (0.0, 1.0),
    (-1.0, 0.0),
    (0.0, 0.0),
];

/// Traced upstream cell: corner feet (and midpoint/center feet when nine
/// points are traced) plus the four boundary edges, counterclockwise.
#[derive(Debug, Clone)]
pub struct UpstreamCell {
    pub ix: usize,
    pub iy: usize,
    pub mode: UpstreamMode,
    /// 4 feet (corners) or 9 feet (corners, edge midpoints, center).
    pub feet: Vec<(f64, f64)>,
    pub edges: [Piece; 4],
    pub dx: f64,
    pub dy: f64,
}

fn segments_intersect(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64), p4: (f64, f64)) -> bool {
    let d = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    let d1 = d(p3, p4, p1);
    let d2 = d(p3, p4, p2);
    let d3 = d(p1, p2, p3);
    let d4 = d(p1, p2, p4);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn validate_corner_quad(cell: usize, feet: &[(f64, f64)]) -> Result<()> {
    let mut area = 0.0;
    for i in 0..4 {
        let (x0, y0) = feet[i];
        let (x1, y1) = feet[(i + 1) % 4];
        area += 0.5 * (x0 * y1 - x1 * y0);
    }
    if area <= 0.0 {
        return Err(SldgError::CharacteristicCrossing {
            cell,
            detail: format!("upstream corner polygon has signed area {area:.3e}"),
        });
    }
    if segments_intersect(feet[0], feet[1], feet[2], feet[3])
        || segments_intersect(feet[1], feet[2], feet[3], feet[0])
    {
        return Err(SldgError::CharacteristicCrossing {
            cell,
            detail: "upstream corner polygon self-intersects".into(),
        });
    }
    Ok(())
}

fn build_edges(mode: UpstreamMode, feet: &[(f64, f64)]) -> [Piece; 4] {
    match mode {
        UpstreamMode::Quad => [
            Piece::straight(feet[0], feet[1]),
            Piece::straight(feet[1], feet[2]),
            Piece::straight(feet[2], feet[3]),
            Piece::straight(feet[3], feet[0]),
        ],
        UpstreamMode::Qc => [
            Piece::quadratic(feet[0], feet[4], feet[1]),
            Piece::quadratic(feet[1], feet[5], feet[2]),
            Piece::quadratic(feet[2], feet[6], feet[3]),
            Piece::quadratic(feet[3], feet[7], feet[0]),
        ],
    }
}

/// Whether nine points are traced: curved edges always need them, and the
/// `k = 2` least-squares reconstruction needs nine constraints even with
/// straight edges.
#[inline]
pub fn needs_nine_points(mode: UpstreamMode, k: usize) -> bool {
    mode == UpstreamMode::Qc || k >= 2
}

/// Trace the upstream cell of `(ix, iy)` over `[t_end - dt, t_end]`.
pub fn trace_upstream_cell<V: Velocity2D + ?Sized>(
    mesh: &Mesh2D,
    ix: usize,
    iy: usize,
    field: &V,
    t_end: f64,
    dt: f64,
    mode: UpstreamMode,
    k: usize,
    substeps: usize,
) -> Result<UpstreamCell> {
    field.check_time_span(t_end - dt, t_end)?;
    let (x0, x1) = (mesh.x.face(ix), mesh.x.face(ix + 1));
    let (y0, y1) = (mesh.y.face(iy), mesh.y.face(iy + 1));
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let n_pts = if needs_nine_points(mode, k) { 9 } else { 4 };
    let mut feet = Vec::with_capacity(n_pts);
    for &(xi, eta) in SOURCE_POINTS.iter().take(n_pts) {
        let p = (
            cx + 0.5 * xi * (x1 - x0),
            cy + 0.5 * eta * (y1 - y0),
        );
        feet.push(integrate_2d(field, p, t_end, t_end - dt, substeps));
    }
    validate_corner_quad(mesh.cell_id(ix, iy), &feet)?;
    let edges = build_edges(mode, &feet);
    Ok(UpstreamCell {
        ix,
        iy,
        mode,
        feet,
        edges,
        dx: mesh.dx(),
        dy: mesh.dy(),
    })
}

/// One clipped subregion of an upstream cell, inside a single background
/// cell (unwrapped indices; `cell_*` are the wrapped equivalents).
#[derive(Debug, Clone)]
pub struct SubRegion {
    pub ix_unwrapped: i64,
    pub iy_unwrapped: i64,
    pub ix: usize,
    pub iy: usize,
    /// Closed counterclockwise boundary; pieces tagged `from_grid` run along
    /// grid lines.
    pub pieces: Vec<Piece>,
    pub area: f64,
}

fn clip_chain_into(
    chain: &[Piece],
    mesh: &Mesh2D,
    out: &mut Vec<SubRegion>,
    scratch: &mut ClipScratch,
) {
    let eps = mesh.eps_geom();
    let area_tol = EPS_GEOM_REL * mesh.dx() * mesh.dy();
    // bounding box of the chain
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for p in chain {
        let (lo, hi) = p.coord_range(Axis::X);
        xmin = xmin.min(lo);
        xmax = xmax.max(hi);
        let (lo, hi) = p.coord_range(Axis::Y);
        ymin = ymin.min(lo);
        ymax = ymax.max(hi);
    }
    // grid lines strictly inside the box (unwrapped face positions)
    let face_range = |m: &crate::mesh::Mesh1D, lo: f64, hi: f64| -> (i64, i64) {
        let f0 = ((lo + eps - m.x_lo()) / m.dx()).floor() as i64 + 1;
        let f1 = ((hi - eps - m.x_lo()) / m.dx()).ceil() as i64 - 1;
        (f0, f1)
    };
    let (fx0, fx1) = face_range(&mesh.x, xmin, xmax);
    let (fy0, fy1) = face_range(&mesh.y, ymin, ymax);
    scratch.x_lines.clear();
    for f in fx0..=fx1 {
        scratch.x_lines.push(mesh.x.face_unwrapped(f));
    }
    scratch.y_lines.clear();
    for f in fy0..=fy1 {
        scratch.y_lines.push(mesh.y.face_unwrapped(f));
    }

    scratch.work.clear();
    scratch.work.extend_from_slice(chain);
    split_pieces_at_lines(&mut scratch.work, Axis::X, &scratch.x_lines);
    split_pieces_at_lines(&mut scratch.work, Axis::Y, &scratch.y_lines);

    // partition into vertical bands, then each band by horizontal lines;
    // chain buffers are recycled through the scratch pool
    let grab = |pool: &mut Vec<Vec<Piece>>, src: &mut Vec<Piece>| -> Vec<Piece> {
        let mut buf = pool.pop().unwrap_or_default();
        buf.clear();
        buf.extend_from_slice(src);
        src.clear();
        buf
    };
    scratch.bands.clear();
    scratch.current.clear();
    let first = grab(&mut scratch.pool, &mut scratch.work);
    scratch.current.push(first);
    for i in 0..scratch.x_lines.len() {
        let line = scratch.x_lines[i];
        scratch.next.clear();
        for mut ch in scratch.current.drain(..) {
            partition_chain(&ch, Axis::X, line, eps, &mut scratch.below, &mut scratch.above);
            ch.clear();
            scratch.pool.push(ch);
            if !scratch.below.is_empty() {
                scratch.bands.push(grab(&mut scratch.pool, &mut scratch.below));
            }
            if !scratch.above.is_empty() {
                scratch.next.push(grab(&mut scratch.pool, &mut scratch.above));
            }
        }
        std::mem::swap(&mut scratch.current, &mut scratch.next);
    }
    scratch.bands.append(&mut scratch.current);

    let start = out.len();
    let n_bands = scratch.bands.len();
    for b in 0..n_bands {
        let mut band = std::mem::take(&mut scratch.bands[b]);
        // connectors inserted along vertical cut lines may cross horizontal
        // grid lines; split them before partitioning in y
        split_pieces_at_lines(&mut band, Axis::Y, &scratch.y_lines);
        scratch.current.clear();
        scratch.current.push(band);
        for i in 0..scratch.y_lines.len() {
            let line = scratch.y_lines[i];
            scratch.next.clear();
            for mut ch in scratch.current.drain(..) {
                partition_chain(&ch, Axis::Y, line, eps, &mut scratch.below, &mut scratch.above);
                ch.clear();
                scratch.pool.push(ch);
                if !scratch.below.is_empty() {
                    scratch.next.push(grab(&mut scratch.pool, &mut scratch.below));
                }
                if !scratch.above.is_empty() {
                    scratch.next.push(grab(&mut scratch.pool, &mut scratch.above));
                }
            }
            std::mem::swap(&mut scratch.current, &mut scratch.next);
        }
        for mut ch in scratch.current.drain(..) {
            let (area, cx, cy) = chain_area_centroid(&ch);
            if area <= area_tol {
                ch.clear();
                scratch.pool.push(ch);
                continue;
            }
            let ix_u = mesh.x.cell_index_unwrapped(cx);
            let iy_u = mesh.y.cell_index_unwrapped(cy);
            out.push(SubRegion {
                ix_unwrapped: ix_u,
                iy_unwrapped: iy_u,
                ix: mesh.x.wrap_cell(ix_u),
                iy: mesh.y.wrap_cell(iy_u),
                pieces: ch,
                area,
            });
        }
    }
    out[start..].sort_by_key(|sr| (sr.ix_unwrapped, sr.iy_unwrapped));
}

#[derive(Default)]
struct ClipScratch {
    x_lines: Vec<f64>,
    y_lines: Vec<f64>,
    work: Vec<Piece>,
    bands: Vec<Vec<Piece>>,
    current: Vec<Vec<Piece>>,
    next: Vec<Vec<Piece>>,
    below: Vec<Piece>,
    above: Vec<Piece>,
    /// retired chain buffers for reuse
    pool: Vec<Vec<Piece>>,
}

impl ClipScratch {
    /// Reclaim the piece buffers of consumed subregions.
    fn recycle(&mut self, subregions: &mut Vec<SubRegion>) {
        for sr in subregions.drain(..) {
            let mut v = sr.pieces;
            v.clear();
            self.pool.push(v);
        }
    }
}

/// Decompose an upstream cell into subregions against the background mesh.
pub fn clip_upstream(uc: &UpstreamCell, mesh: &Mesh2D) -> Result<Vec<SubRegion>> {
    let mut out = Vec::new();
    let mut scratch = ClipScratch::default();
    clip_chain_into(&uc.edges, mesh, &mut out, &mut scratch);
    if out.is_empty() {
        return Err(SldgError::Geometry {
            cell: mesh.cell_id(uc.ix, uc.iy),
            detail: "clipping produced no subregions".into(),
        });
    }
    Ok(out)
}

/// Adjoint test polynomial in physical coordinates: graded monomials in
/// `(x - x0) / sx` and `(y - y0) / sy`.
#[derive(Debug, Clone)]
pub struct TestPoly2D {
    pub k: usize,
    pub x0: f64,
    pub y0: f64,
    pub sx: f64,
    pub sy: f64,
    pub coeffs: Vec<f64>,
    /// Euclidean norm of the least-squares constraint residual.
    pub residual: f64,
}

impl TestPoly2D {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let xx = (x - self.x0) / self.sx;
        let yy = (y - self.y0) / self.sy;
        let exps = basis_exponents(self.k, SpaceTag::P);
        let mut s = 0.0;
        for (m, &(a, b)) in exps.iter().enumerate() {
            s += self.coeffs[m] * xx.powi(a as i32) * yy.powi(b as i32);
        }
        s
    }
}

/// Least-squares data shared by all test functions of one cell.
struct LsFactor {
    np: usize,
    n_pts: usize,
    /// scaled constraint matrix, row-major `n_pts x np`
    a: [f64; 9 * 10],
    /// Cholesky factor of the scaled normal matrix
    chol: [f64; 10 * 10],
    col_scale: [f64; 10],
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

/// Graded-lexicographic exponent pairs up to total degree 3; prefixes serve
/// lower degrees (the first `(k+1)(k+2)/2` entries).
const P_EXPONENTS: [(usize, usize); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

fn ls_factor(
    cell: usize,
    feet: &[(f64, f64)],
    k: usize,
    dx: f64,
    dy: f64,
) -> Result<LsFactor> {
    let np = n_coeffs_2d(k, SpaceTag::P);
    let n_pts = feet.len();
    if n_pts < np {
        return Err(SldgError::IllConditioned {
            cell,
            detail: format!("{n_pts} constraint points for {np} coefficients"),
        });
    }
    let (mut x0, mut y0) = (0.0, 0.0);
    for &(x, y) in feet.iter().take(4) {
        x0 += 0.25 * x;
        y0 += 0.25 * y;
    }
    let mut a = [0.0; 9 * 10];
    for (q, &(x, y)) in feet.iter().enumerate() {
        let xx = (x - x0) / dx;
        let yy = (y - y0) / dy;
        let mut px = [1.0; 4];
        let mut py = [1.0; 4];
        for d in 1..=k {
            px[d] = px[d - 1] * xx;
            py[d] = py[d - 1] * yy;
        }
        for (j, &(p, r)) in P_EXPONENTS[..np].iter().enumerate() {
            a[q * np + j] = px[p] * py[r];
        }
    }
    let mut col_scale = [1.0; 10];
    for (j, cs) in col_scale.iter_mut().enumerate().take(np) {
        let mut m = 0.0f64;
        for q in 0..n_pts {
            m = m.max(a[q * np + j].abs());
        }
        *cs = if m > 0.0 { m } else { 1.0 };
    }
    for q in 0..n_pts {
        for j in 0..np {
            a[q * np + j] /= col_scale[j];
        }
    }
    let mut normal = [0.0; 10 * 10];
    for i in 0..np {
        for j in 0..np {
            let mut s = 0.0;
            for q in 0..n_pts {
                s += a[q * np + i] * a[q * np + j];
            }
            normal[i * np + j] = s;
        }
    }
    cholesky_factor(&mut normal[..np * np], np)
        .map_err(|detail| SldgError::IllConditioned { cell, detail })?;
    Ok(LsFactor {
        np,
        n_pts,
        a,
        chol: normal,
        col_scale,
        x0,
        y0,
        sx: dx,
        sy: dy,
    })
}

impl LsFactor {
    /// Solve for the test polynomial matching `values` at the feet.
    fn solve(&self, values: &[f64], coeffs: &mut [f64]) {
        let np = self.np;
        let mut rhs = [0.0; 10];
        for (j, r) in rhs.iter_mut().enumerate().take(np) {
            let mut s = 0.0;
            for q in 0..self.n_pts {
                s += self.a[q * np + j] * values[q];
            }
            *r = s;
        }
        let mut z = [0.0; 10];
        cholesky_solve(&self.chol[..np * np], np, &rhs[..np], &mut z[..np]);
        for j in 0..np {
            coeffs[j] = z[j] / self.col_scale[j];
        }
    }

    /// Euclidean norm of the constraint residual of a solved fit.
    fn residual(&self, values: &[f64], coeffs: &[f64]) -> f64 {
        let np = self.np;
        let mut res_sq = 0.0;
        for q in 0..self.n_pts {
            let mut fit = 0.0;
            for j in 0..np {
                fit += self.a[q * np + j] * (coeffs[j] * self.col_scale[j]);
            }
            res_sq += (fit - values[q]) * (fit - values[q]);
        }
        res_sq.sqrt()
    }
}

/// Reconstruct the adjoint test polynomial for one basis function:
/// least-squares fit to `psi_star(foot_q) = psi(source_q)`.
pub fn reconstruct_test_poly(uc: &UpstreamCell, psi: &basis::ModalPoly2D) -> Result<TestPoly2D> {
    let k = psi.k;
    let n_pts = if k >= 2 { 9 } else { 4 };
    if uc.feet.len() < n_pts {
        return Err(SldgError::IllConditioned {
            cell: 0,
            detail: format!(
                "upstream cell carries {} feet but k={k} needs {n_pts}",
                uc.feet.len()
            ),
        });
    }
    let lf = ls_factor(0, &uc.feet[..n_pts], k, uc.dx, uc.dy)?;
    let mut values = [0.0; 9];
    for (q, &(xi, eta)) in SOURCE_POINTS.iter().take(n_pts).enumerate() {
        values[q] = psi.eval(xi, eta);
    }
    let mut coeffs = vec![0.0; lf.np];
    lf.solve(&values[..n_pts], &mut coeffs);
    let residual = lf.residual(&values[..n_pts], &coeffs);
    Ok(TestPoly2D {
        k,
        x0: lf.x0,
        y0: lf.y0,
        sx: lf.sx,
        sy: lf.sy,
        coeffs,
        residual,
    })
}

/// Graded-lexicographic index of the monomial `x^p y^q`.
#[inline]
fn mono_index(p: usize, q: usize) -> usize {
    let d = p + q;
    d * (d + 1) / 2 + (d - p)
}

/// Monomial moments of a chain in a local frame: `m[pq] = ∬ X^p Y^q dX dY`
/// over the enclosed region, via `∮ X^{p+1}/(p+1) Y^q dY`. Straight pieces
/// use a Gauss rule exact for their degree; curved pieces use 6-point Gauss.
/// Axis-aligned straight pieces short-circuit: horizontal ones carry no
/// `dY`, vertical ones integrate in closed form.
fn chain_moments(
    pieces: &[Piece],
    map_x: (f64, f64),
    map_y: (f64, f64),
    max_deg: usize,
    out: &mut [f64],
) {
    // fixed-degree instantiations keep the inner loops free of bounds checks
    match max_deg {
        2 => chain_moments_fixed::<2, 6>(pieces, map_x, map_y, out),
        4 => chain_moments_fixed::<4, 15>(pieces, map_x, map_y, out),
        6 => chain_moments_fixed::<6, 28>(pieces, map_x, map_y, out),
        _ => unreachable!("unsupported moment degree {max_deg}"),
    }
}

fn chain_moments_fixed<const MD: usize, const NM: usize>(
    pieces: &[Piece],
    map_x: (f64, f64), // X = (x - c) * s  => (c, s)
    map_y: (f64, f64),
    out: &mut [f64],
) {
    const G3N: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const G3W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    const G6N: [f64; 6] = [
        -0.932_469_514_203_152_1,
        -0.661_209_386_466_264_5,
        -0.238_619_186_083_196_9,
        0.238_619_186_083_196_9,
        0.661_209_386_466_264_5,
        0.932_469_514_203_152_1,
    ];
    const G6W: [f64; 6] = [
        0.171_324_492_379_170_4,
        0.360_761_573_048_138_6,
        0.467_913_934_572_691_1,
        0.467_913_934_572_691_1,
        0.360_761_573_048_138_6,
        0.171_324_492_379_170_4,
    ];
    // INV[j] = 1/j for the antiderivative X^{p+1}/(p+1)
    const INV: [f64; 9] = [
        0.0,
        1.0,
        1.0 / 2.0,
        1.0 / 3.0,
        1.0 / 4.0,
        1.0 / 5.0,
        1.0 / 6.0,
        1.0 / 7.0,
        1.0 / 8.0,
    ];
    let out = &mut out[..NM];
    out.fill(0.0);
    // fixed capacity for MD <= 6; loops run to the const bound
    let mut px = [0.0; 8];
    let mut py = [0.0; 8];
    let mut qx = [0.0; 8];
    for piece in pieces {
        if piece.cy == 0.0 && piece.by == 0.0 {
            // constant Y: no dY contribution
            continue;
        }
        // map the piece into the local frame (affine)
        let ax = (piece.ax - map_x.0) * map_x.1;
        let bx = piece.bx * map_x.1;
        let cx = piece.cx * map_x.1;
        let ay = (piece.ay - map_y.0) * map_y.1;
        let by = piece.by * map_y.1;
        let cy = piece.cy * map_y.1;
        if bx == 0.0 && cx == 0.0 && cy == 0.0 {
            // vertical straight piece: X constant, closed-form in Y
            let y0 = ay;
            let y1 = ay + by;
            px[0] = 1.0;
            for p in 1..=MD + 1 {
                px[p] = px[p - 1] * ax;
            }
            let mut py0 = y0;
            let mut py1 = y1;
            // Y^{q+1}/(q+1) differences of the closed-form antiderivative
            let mut ydiff = [0.0; 8];
            for (q, yd) in ydiff.iter_mut().enumerate().take(MD + 1) {
                *yd = (py1 - py0) * INV[q + 1];
                py0 *= y0;
                py1 *= y1;
            }
            let mut idx = 0;
            for d in 0..=MD {
                for p in (0..=d).rev() {
                    out[idx] += px[p + 1] * INV[p + 1] * ydiff[d - p];
                    idx += 1;
                }
            }
            continue;
        }
        let (nodes, weights): (&[f64], &[f64]) = if piece.is_straight() {
            (&G3N, &G3W)
        } else {
            (&G6N, &G6W)
        };
        for (&t, &w) in nodes.iter().zip(weights) {
            let s = 0.5 * (t + 1.0);
            let x = ax + s * (bx + s * cx);
            let y = ay + s * (by + s * cy);
            let wdy = w * 0.5 * (by + 2.0 * cy * s); // ds jacobian folded in
            px[0] = 1.0;
            for p in 1..=MD + 1 {
                px[p] = px[p - 1] * x;
            }
            for p in 0..=MD {
                qx[p] = wdy * px[p + 1] * INV[p + 1];
            }
            py[0] = 1.0;
            for q in 1..=MD {
                py[q] = py[q - 1] * y;
            }
            let mut idx = 0;
            for d in 0..=MD {
                for p in (0..=d).rev() {
                    out[idx] += qx[p] * py[d - p];
                    idx += 1;
                }
            }
        }
    }
}

/// Expand a test polynomial into the reference frame of a background cell:
/// substitute `X = ax*xi + bx`, `Y = ay*eta + by` into the graded monomials.
fn expand_to_cell_frame(
    k: usize,
    coeffs: &[f64],
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
    out: &mut [f64],
) {
    let np = n_coeffs_2d(k, SpaceTag::P);
    out[..np].fill(0.0);
    let mut powx = [1.0; 4];
    let mut powy = [1.0; 4];
    let mut sax = [1.0; 4];
    let mut say = [1.0; 4];
    for p in 1..4 {
        powx[p] = powx[p - 1] * bx;
        powy[p] = powy[p - 1] * by;
        sax[p] = sax[p - 1] * ax;
        say[p] = say[p - 1] * ay;
    }
    for (m, &(a, b)) in P_EXPONENTS[..np].iter().enumerate() {
        let c = coeffs[m];
        if c == 0.0 {
            continue;
        }
        for i in 0..=a {
            let fa = BIN[a][i] * sax[i] * powx[a - i];
            for j in 0..=b {
                let fb = BIN[b][j] * say[j] * powy[b - j];
                out[mono_index(i, j)] += c * fa * fb;
            }
        }
    }
}

const BIN: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0],
    [1.0, 3.0, 3.0, 1.0],
];

/// Legendre-to-monomial conversion matrix for the P^k basis (row-major:
/// `mono[i] = sum_m mat[m * np + i] * legendre[m]`).
fn legendre_to_mono_matrix(k: usize) -> Vec<f64> {
    let exps = basis_exponents(k, SpaceTag::P);
    let np = exps.len();
    let mut mat = vec![0.0; np * np];
    for (m, &(a, b)) in exps.iter().enumerate() {
        let la = legendre_monomial_coeffs(a);
        let lb = legendre_monomial_coeffs(b);
        for (i, &ca) in la.iter().enumerate().take(a + 1) {
            if ca == 0.0 {
                continue;
            }
            for (j, &cb) in lb.iter().enumerate().take(b + 1) {
                if cb == 0.0 {
                    continue;
                }
                if i + j <= k {
                    mat[m * np + mono_index(i, j)] += ca * cb;
                }
            }
        }
    }
    mat
}

/// Integral of `u_l * psi_star` over one subregion, evaluated as line
/// integrals of the x-antiderivative along the subregion boundary.
pub fn green_integral(
    u_l: &basis::ModalPoly2D,
    psi: &TestPoly2D,
    sr: &SubRegion,
    mesh: &Mesh2D,
) -> f64 {
    assert_eq!(u_l.space, SpaceTag::P);
    let ku = u_l.k;
    let kp = psi.k;
    let max_deg = ku + kp;
    let xc = mesh.x.center_unwrapped(sr.ix_unwrapped);
    let yc = mesh.y.center_unwrapped(sr.iy_unwrapped);
    let mut moments = [0.0; 28];
    chain_moments(
        &sr.pieces,
        (xc, 2.0 / mesh.dx()),
        (yc, 2.0 / mesh.dy()),
        max_deg,
        &mut moments,
    );
    // u in cell-frame monomials
    let conv = legendre_to_mono_matrix(ku);
    let npu = n_coeffs_2d(ku, SpaceTag::P);
    let mut u_mono = vec![0.0; npu];
    for m in 0..npu {
        let c = u_l.coeffs[m];
        for i in 0..npu {
            u_mono[i] += c * conv[m * npu + i];
        }
    }
    // psi in the cell frame: X = (x - x0)/sx with x = xc + xi*dx/2
    let bx = (xc - psi.x0) / psi.sx;
    let by = (yc - psi.y0) / psi.sy;
    let ax = 0.5 * mesh.dx() / psi.sx;
    let ay = 0.5 * mesh.dy() / psi.sy;
    let npp = n_coeffs_2d(kp, SpaceTag::P);
    let mut psi_mono = vec![0.0; npp];
    expand_to_cell_frame(kp, &psi.coeffs, ax, bx, ay, by, &mut psi_mono);
    let exps_u = basis_exponents(ku, SpaceTag::P);
    let exps_p = basis_exponents(kp, SpaceTag::P);
    let mut s = 0.0;
    for (i, &(pu, qu)) in exps_u.iter().enumerate() {
        if u_mono[i] == 0.0 {
            continue;
        }
        for (j, &(pp, qp)) in exps_p.iter().enumerate() {
            s += u_mono[i] * psi_mono[j] * moments[mono_index(pu + pp, qu + qp)];
        }
    }
    s * 0.25 * mesh.dx() * mesh.dy()
}

/// One step of the non-splitting scheme over `dt`.
pub fn step_2d<V: Velocity2D + ?Sized>(
    u: &SolutionP2D,
    field: &V,
    dt: f64,
    mode: UpstreamMode,
    tracer: TraceScheme,
) -> Result<SolutionP2D> {
    let mesh = &u.mesh;
    let k = u.k;
    let t_end = u.time + dt;
    field.check_time_span(u.time, t_end)?;
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let nine = needs_nine_points(mode, k);

    // shared traces at true physical positions: corners at the (nx+1)*(ny+1)
    // grid nodes, edge midpoints, cell centers. Neighbors share feet exactly,
    // so the upstream cells tile; at the periodic seam the two traces agree
    // to roundoff for periodic fields.
    let trace = |x: f64, y: f64| match tracer {
        TraceScheme::Rk4 { substeps } => integrate_2d(field, (x, y), t_end, u.time, substeps),
        TraceScheme::EulerEnd => euler_foot_2d(field, (x, y), t_end, dt),
    };
    let cw = nx + 1;
    let mut corners = vec![(0.0, 0.0); cw * (ny + 1)];
    for iy in 0..=ny {
        for ix in 0..=nx {
            corners[iy * cw + ix] = trace(mesh.x.face(ix), mesh.y.face(iy));
        }
    }
    let (mut xmids, mut ymids, mut centers) = (Vec::new(), Vec::new(), Vec::new());
    if nine {
        xmids = vec![(0.0, 0.0); nx * (ny + 1)];
        ymids = vec![(0.0, 0.0); cw * ny];
        centers = vec![(0.0, 0.0); nx * ny];
        for iy in 0..=ny {
            for ix in 0..nx {
                xmids[iy * nx + ix] = trace(mesh.x.center(ix), mesh.y.face(iy));
            }
        }
        for iy in 0..ny {
            for ix in 0..=nx {
                ymids[iy * cw + ix] = trace(mesh.x.face(ix), mesh.y.center(iy));
            }
        }
        for iy in 0..ny {
            for ix in 0..nx {
                centers[iy * nx + ix] = trace(mesh.x.center(ix), mesh.y.center(iy));
            }
        }
    }
    let n_pts = if nine { 9 } else { 4 };

    match k {
        1 => assemble_cells::<3, 2, 6>(
            u, mesh, mode, n_pts, &corners, &xmids, &ymids, &centers, t_end,
        ),
        2 => assemble_cells::<6, 4, 15>(
            u, mesh, mode, n_pts, &corners, &xmids, &ymids, &centers, t_end,
        ),
        other => Err(SldgError::UnsupportedDegree(other)),
    }
}

/// Per-cell assembly, monomorphized on the coefficient count `NP`, the
/// product degree `MD = 2k`, and the moment count `NM`.
#[allow(clippy::too_many_arguments)]
fn assemble_cells<const NP: usize, const MD: usize, const NM: usize>(
    u: &SolutionP2D,
    mesh: &Mesh2D,
    mode: UpstreamMode,
    n_pts: usize,
    corners: &[(f64, f64)],
    xmids: &[(f64, f64)],
    ymids: &[(f64, f64)],
    centers: &[(f64, f64)],
    t_end: f64,
) -> Result<SolutionP2D> {
    let k = u.k;
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let (dx, dy) = (mesh.dx(), mesh.dy());
    let cw = nx + 1;
    let nine = n_pts == 9;

    // constraint values: basis functions at the source points (fixed per k)
    let mut basis_vals = [[0.0; 9]; NP];
    {
        let mut px = [0.0; MAX_DEGREE + 1];
        let mut py = [0.0; MAX_DEGREE + 1];
        for (q, &(xi, eta)) in SOURCE_POINTS.iter().take(n_pts).enumerate() {
            basis::legendre_all(k, xi, &mut px);
            basis::legendre_all(k, eta, &mut py);
            for (m, &(a, b)) in P_EXPONENTS[..NP].iter().enumerate() {
                basis_vals[m][q] = px[a] * py[b];
            }
        }
    }
    let conv_v = legendre_to_mono_matrix(k);
    let mut conv = [[0.0; NP]; NP];
    for m in 0..NP {
        for i in 0..NP {
            conv[m][i] = conv_v[m * NP + i];
        }
    }
    let norms_v = basis::norms_sq_2d(k, SpaceTag::P);
    let mut inv_norms = [0.0; NP];
    for m in 0..NP {
        inv_norms[m] = 1.0 / norms_v[m];
    }
    // pair index table for the fused product-moment contraction
    let mut pair_idx = [[0usize; NP]; NP];
    for (i, &(pu, qu)) in P_EXPONENTS[..NP].iter().enumerate() {
        for (j, &(pp, qp)) in P_EXPONENTS[..NP].iter().enumerate() {
            pair_idx[i][j] = mono_index(pu + pp, qu + qp);
        }
    }

    let mut out = SolutionP2D::zeros(mesh.clone(), k, t_end)?;
    let mut feet = [(0.0, 0.0); 9];
    let mut scratch = ClipScratch::default();
    let mut subregions: Vec<SubRegion> = Vec::new();
    let mut test_coeffs = [[0.0; NP]; NP];
    let mut moments = [0.0; NM];
    let inv_dx2 = 2.0 / dx;
    let inv_dy2 = 2.0 / dy;

    for iy in 0..ny {
        for ix in 0..nx {
            let cell = mesh.cell_id(ix, iy);
            feet[0] = corners[iy * cw + ix];
            feet[1] = corners[iy * cw + ix + 1];
            feet[2] = corners[(iy + 1) * cw + ix + 1];
            feet[3] = corners[(iy + 1) * cw + ix];
            if nine {
                feet[4] = xmids[iy * nx + ix];
                feet[5] = ymids[iy * cw + ix + 1];
                feet[6] = xmids[(iy + 1) * nx + ix];
                feet[7] = ymids[iy * cw + ix];
                feet[8] = centers[iy * nx + ix];
            }
            validate_corner_quad(cell, &feet[..4])?;
            let edges = build_edges(mode, &feet[..n_pts.max(4)]);

            scratch.recycle(&mut subregions);
            clip_chain_into(&edges, mesh, &mut subregions, &mut scratch);
            if subregions.is_empty() {
                return Err(SldgError::Geometry {
                    cell,
                    detail: "clipping produced no subregions".into(),
                });
            }

            let lf = ls_factor_c::<NP>(cell, &feet[..n_pts], k, dx, dy)?;
            for m in 0..NP {
                lf.solve(&basis_vals[m], n_pts, &mut test_coeffs[m]);
            }

            // accumulate, per subregion, the u-weighted moments contracted
            // with the upstream-frame monomials; the per-test-function work
            // reduces to one dot product at the end
            let mut vsum = [0.0; NP];
            for sr in subregions.iter() {
                let xc = mesh.x.center_unwrapped(sr.ix_unwrapped);
                let yc = mesh.y.center_unwrapped(sr.iy_unwrapped);
                chain_moments_fixed::<MD, NM>(
                    &sr.pieces,
                    (xc, inv_dx2),
                    (yc, inv_dy2),
                    &mut moments,
                );
                let donor = u.cell(sr.ix, sr.iy);
                let mut u_mono = [0.0; NP];
                for m in 0..NP {
                    let c = donor[m];
                    if c != 0.0 {
                        for i in 0..NP {
                            u_mono[i] += c * conv[m][i];
                        }
                    }
                }
                // u_weighted[j] = ∬ u * xi^{pj} eta^{qj} over the subregion
                let mut u_weighted = [0.0; NP];
                for (j, uw) in u_weighted.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for i in 0..NP {
                        s += u_mono[i] * moments[pair_idx[i][j]];
                    }
                    *uw = s;
                }
                let bx = (xc - lf.x0) / lf.sx;
                let by = (yc - lf.y0) / lf.sy;
                accumulate_weights_c::<NP>(bx, by, &u_weighted, &mut vsum);
            }
            let dst = &mut out.coeffs[cell * NP..(cell + 1) * NP];
            for m in 0..NP {
                let tc = &test_coeffs[m];
                let mut s = 0.0;
                for j in 0..NP {
                    s += tc[j] * vsum[j];
                }
                dst[m] = s * inv_norms[m];
            }
        }
    }
    Ok(out)
}

/// Least-squares factor with compile-time coefficient count.
struct LsFactorC<const NP: usize> {
    a: [[f64; NP]; 9],
    chol: [[f64; NP]; NP],
    col_scale: [f64; NP],
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

fn ls_factor_c<const NP: usize>(
    cell: usize,
    feet: &[(f64, f64)],
    k: usize,
    dx: f64,
    dy: f64,
) -> Result<LsFactorC<NP>> {
    let n_pts = feet.len();
    let (mut x0, mut y0) = (0.0, 0.0);
    for &(x, y) in feet.iter().take(4) {
        x0 += 0.25 * x;
        y0 += 0.25 * y;
    }
    let mut a = [[0.0; NP]; 9];
    for (q, &(x, y)) in feet.iter().enumerate() {
        let xx = (x - x0) / dx;
        let yy = (y - y0) / dy;
        let mut px = [1.0; 4];
        let mut py = [1.0; 4];
        for d in 1..=k {
            px[d] = px[d - 1] * xx;
            py[d] = py[d - 1] * yy;
        }
        for (j, &(p, r)) in P_EXPONENTS[..NP].iter().enumerate() {
            a[q][j] = px[p] * py[r];
        }
    }
    let mut col_scale = [1.0; NP];
    for (j, cs) in col_scale.iter_mut().enumerate() {
        let mut m = 0.0f64;
        for row in a.iter().take(n_pts) {
            m = m.max(row[j].abs());
        }
        *cs = if m > 0.0 { m } else { 1.0 };
    }
    for row in a.iter_mut().take(n_pts) {
        for j in 0..NP {
            row[j] /= col_scale[j];
        }
    }
    let mut chol = [[0.0; NP]; NP];
    for i in 0..NP {
        for j in 0..NP {
            let mut s = 0.0;
            for row in a.iter().take(n_pts) {
                s += row[i] * row[j];
            }
            chol[i][j] = s;
        }
    }
    cholesky_factor_c(&mut chol)
        .map_err(|detail| SldgError::IllConditioned { cell, detail })?;
    Ok(LsFactorC {
        a,
        chol,
        col_scale,
        x0,
        y0,
        sx: dx,
        sy: dy,
    })
}

impl<const NP: usize> LsFactorC<NP> {
    #[inline]
    fn solve(&self, values: &[f64; 9], n_pts: usize, coeffs: &mut [f64; NP]) {
        let mut rhs = [0.0; NP];
        for (j, r) in rhs.iter_mut().enumerate() {
            let mut s = 0.0;
            for q in 0..n_pts {
                s += self.a[q][j] * values[q];
            }
            *r = s;
        }
        let mut z = [0.0; NP];
        cholesky_solve_c(&self.chol, &rhs, &mut z);
        for j in 0..NP {
            coeffs[j] = z[j] / self.col_scale[j];
        }
    }
}

fn cholesky_factor_c<const N: usize>(a: &mut [[f64; N]; N]) -> std::result::Result<(), String> {
    for col in 0..N {
        for row in col..N {
            let mut s = a[row][col];
            for j in 0..col {
                s -= a[row][j] * a[col][j];
            }
            if row == col {
                if s <= 0.0 {
                    return Err(format!("non-positive pivot {s:.3e} in column {col}"));
                }
                a[col][col] = s.sqrt();
            } else {
                a[row][col] = s / a[col][col];
            }
        }
    }
    Ok(())
}

#[inline]
fn cholesky_solve_c<const N: usize>(l: &[[f64; N]; N], b: &[f64; N], out: &mut [f64; N]) {
    let mut y = [0.0; N];
    for row in 0..N {
        let mut s = b[row];
        for j in 0..row {
            s -= l[row][j] * y[j];
        }
        y[row] = s / l[row][row];
    }
    for row in (0..N).rev() {
        let mut s = y[row];
        for j in row + 1..N {
            s -= l[j][row] * out[j];
        }
        out[row] = s / l[row][row];
    }
}

/// `accumulate_frame_weights` with compile-time coefficient count.
#[inline]
fn accumulate_weights_c<const NP: usize>(bx: f64, by: f64, u_weighted: &[f64; NP], acc: &mut [f64; NP]) {
    const HALF: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
    let mut powx = [1.0; 4];
    let mut powy = [1.0; 4];
    for p in 1..4 {
        powx[p] = powx[p - 1] * bx;
        powy[p] = powy[p - 1] * by;
    }
    for (m, &(a, b)) in P_EXPONENTS[..NP].iter().enumerate() {
        let mut s = 0.0;
        for i in 0..=a {
            let fa = BIN[a][i] * HALF[i] * powx[a - i];
            for j in 0..=b {
                let fb = BIN[b][j] * HALF[j] * powy[b - j];
                s += fa * fb * u_weighted[mono_index(i, j)];
            }
        }
        acc[m] += s;
    }
}
