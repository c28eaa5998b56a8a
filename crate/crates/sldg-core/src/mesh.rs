//! Uniform periodic Cartesian meshes in one and two dimensions.
//!
//! Cell `j` of a 1D mesh occupies `[face(j), face(j+1)]`; the mesh is
//! periodic, so cell `n-1` neighbors cell `0`. Points within `eps_geom` of a
//! face are snapped to the face and assigned to the cell on its right.

use crate::error::{Result, SldgError};

/// Relative geometric tolerance; scaled by the cell width (1D) or by
/// `max(dx, dy)` (2D) to obtain the absolute snapping distance.
pub const EPS_GEOM_REL: f64 = 1e-12;

/// Uniform periodic mesh of an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    x_lo: f64,
    x_hi: f64,
    n: usize,
    dx: f64,
    inv_dx: f64,
    inv_len: f64,
}

/// Cell index plus local reference coordinate in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellLocation {
    pub cell: usize,
    pub xi: f64,
}

/// Cell index pair plus local reference coordinates for a 2D mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellLocation2D {
    pub ix: usize,
    pub iy: usize,
    pub xi: f64,
    pub eta: f64,
}

impl Mesh1D {
    pub fn new(x_lo: f64, x_hi: f64, n: usize) -> Result<Self> {
        if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(SldgError::InvalidMesh(format!(
                "empty or non-finite interval [{x_lo}, {x_hi}]"
            )));
        }
        if n == 0 {
            return Err(SldgError::InvalidMesh("n_cells must be positive".into()));
        }
        let dx = (x_hi - x_lo) / n as f64;
        Ok(Self {
            x_lo,
            x_hi,
            n,
            dx,
            inv_dx: 1.0 / dx,
            inv_len: 1.0 / (x_hi - x_lo),
        })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }

    #[inline]
    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    /// Absolute snapping tolerance for this mesh.
    #[inline]
    pub fn eps_geom(&self) -> f64 {
        EPS_GEOM_REL * self.dx
    }

    /// Left face of cell `j` (`j` may equal `n_cells`, giving `x_hi`).
    #[inline]
    pub fn face(&self, j: usize) -> f64 {
        self.x_lo + j as f64 * self.dx
    }

    /// Face position for an unwrapped (possibly negative) face index.
    #[inline]
    pub fn face_unwrapped(&self, j: i64) -> f64 {
        self.x_lo + j as f64 * self.dx
    }

    #[inline]
    pub fn center(&self, j: usize) -> f64 {
        self.x_lo + (j as f64 + 0.5) * self.dx
    }

    /// Center position for an unwrapped cell index.
    #[inline]
    pub fn center_unwrapped(&self, j: i64) -> f64 {
        self.x_lo + (j as f64 + 0.5) * self.dx
    }

    /// Wrap an unwrapped cell index into `0..n_cells`.
    #[inline]
    pub fn wrap_cell(&self, j: i64) -> usize {
        j.rem_euclid(self.n as i64) as usize
    }

    /// Map `x` into `[x_lo, x_hi)` modulo the domain length.
    #[inline]
    pub fn wrap_periodic(&self, x: f64) -> f64 {
        let len = self.length();
        let off = x - self.x_lo;
        // fast path: already inside the period
        let mut w = if off >= 0.0 && off < len {
            x
        } else {
            (off - (off * self.inv_len).floor() * len) + self.x_lo
        };
        if w >= self.x_hi {
            w = self.x_lo;
        }
        if w < self.x_lo {
            w = self.x_lo;
        }
        w
    }

    /// Unwrapped cell index containing `x` (face points snap to the right
    /// cell). The index may be negative or `>= n_cells`.
    pub fn cell_index_unwrapped(&self, x: f64) -> i64 {
        let u = (x - self.x_lo) * self.inv_dx;
        let snapped = u.round();
        let j = if (u - snapped).abs() * self.dx <= self.eps_geom() {
            snapped
        } else {
            u.floor()
        };
        j as i64
    }

    /// Locate the wrapped image of `x`: cell index and local coordinate.
    pub fn locate(&self, x: f64) -> CellLocation {
        let xw = self.wrap_periodic(x);
        let mut j = self.cell_index_unwrapped(xw);
        if j >= self.n as i64 {
            j = 0; // snapped up to x_hi, identified with x_lo
        }
        let cell = self.wrap_cell(j);
        let mut xi = 2.0 * (xw - self.face_unwrapped(j)) * self.inv_dx - 1.0;
        if xi < -1.0 {
            xi = -1.0;
        } else if xi > 1.0 {
            xi = 1.0;
        }
        CellLocation { cell, xi }
    }

    /// Local coordinate of (unwrapped) `x` relative to unwrapped cell `j`.
    #[inline]
    pub fn local_coord_unwrapped(&self, x: f64, j: i64) -> f64 {
        2.0 * (x - self.center_unwrapped(j)) / self.dx
    }
}

/// Tensor product of two 1D meshes; periodic in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    pub x: Mesh1D,
    pub y: Mesh1D,
}

impl Mesh2D {
    pub fn new(x_lo: f64, x_hi: f64, nx: usize, y_lo: f64, y_hi: f64, ny: usize) -> Result<Self> {
        Ok(Self {
            x: Mesh1D::new(x_lo, x_hi, nx)?,
            y: Mesh1D::new(y_lo, y_hi, ny)?,
        })
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.x.n_cells()
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.y.n_cells()
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx() * self.ny()
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.x.dx()
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        self.y.dx()
    }

    #[inline]
    pub fn eps_geom(&self) -> f64 {
        EPS_GEOM_REL * self.dx().max(self.dy())
    }

    /// Flat cell index, y-major: `iy * nx + ix`.
    #[inline]
    pub fn cell_id(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx() + ix
    }

    pub fn locate(&self, x: f64, y: f64) -> CellLocation2D {
        let lx = self.x.locate(x);
        let ly = self.y.locate(y);
        CellLocation2D {
            ix: lx.cell,
            iy: ly.cell,
            xi: lx.xi,
            eta: ly.xi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_subdivision() {
        let m = Mesh1D::new(0.0, 2.0 * PI, 4).unwrap();
        assert!((m.dx() - PI / 2.0).abs() < 1e-15);
        assert!((m.face(1) - PI / 2.0).abs() < 1e-15);
        // sum of widths equals domain length up to roundoff
        let total: f64 = (0..4).map(|_| m.dx()).sum();
        assert!((total - m.length()).abs() < 1e-14);
    }

    #[test]
    fn paper_mesh_width() {
        // [-pi, pi] with 20 cells, as in the coarsest benchmark meshes
        let m = Mesh1D::new(-PI, PI, 20).unwrap();
        assert!((m.dx() - PI / 10.0).abs() < 1e-15);
    }

    #[test]
    fn single_cell_mesh() {
        let m = Mesh1D::new(0.0, 1.0, 1).unwrap();
        assert_eq!(m.n_cells(), 1);
        assert!((m.dx() - 1.0).abs() < 1e-15);
        let loc = m.locate(0.7);
        assert_eq!(loc.cell, 0);
    }

    #[test]
    fn invalid_meshes_rejected() {
        assert!(Mesh1D::new(1.0, 1.0, 4).is_err());
        assert!(Mesh1D::new(0.0, 1.0, 0).is_err());
        assert!(Mesh1D::new(2.0, 1.0, 4).is_err());
    }

    #[test]
    fn wrap_identifies_period() {
        let m = Mesh1D::new(0.0, 2.0 * PI, 4).unwrap();
        assert_eq!(m.wrap_periodic(2.0 * PI), 0.0);
        // half a cell below x_lo wraps near the top
        let w = m.wrap_periodic(-PI / 4.0);
        assert!((w - (2.0 * PI - PI / 4.0)).abs() < 1e-14);
        // multi-period wrap
        let w = m.wrap_periodic(3.0 * 2.0 * PI + 0.1);
        assert!((w - 0.1).abs() < 1e-13);
    }

    #[test]
    fn locate_midpoint_and_faces() {
        let m = Mesh1D::new(0.0, 1.0, 8).unwrap();
        let loc = m.locate(m.center(3));
        assert_eq!(loc.cell, 3);
        assert!(loc.xi.abs() < 1e-12);
        // exactly on a face: belongs to the right cell with xi = -1
        let loc = m.locate(m.face(5));
        assert_eq!(loc.cell, 5);
        assert!((loc.xi + 1.0).abs() < 1e-12);
        // x_hi identifies with x_lo
        let loc = m.locate(1.0);
        assert_eq!(loc.cell, 0);
    }

    #[test]
    fn locate_matches_linear_scan() {
        let m = Mesh1D::new(-PI, PI, 13).unwrap();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let x = -PI + 2.0 * PI * next();
            let loc = m.locate(x);
            // brute-force scan over faces
            let mut expect = m.n_cells() - 1;
            for j in 0..m.n_cells() {
                if x >= m.face(j) && x < m.face(j + 1) {
                    expect = j;
                    break;
                }
            }
            assert_eq!(loc.cell, expect, "x = {x}");
        }
    }

    #[test]
    fn wrap_locate_roundtrip() {
        let m = Mesh1D::new(-2.0, 5.0, 7).unwrap();
        let len = m.length();
        for i in 0..200 {
            let x = -30.0 + 0.37 * i as f64;
            let loc = m.locate(m.wrap_periodic(x));
            let back = m.face(loc.cell) + 0.5 * (loc.xi + 1.0) * m.dx();
            let diff = (back - x).rem_euclid(len);
            let dist = diff.min(len - diff);
            assert!(dist <= 1e-13 * len, "x={x} dist={dist}");
        }
    }

    #[test]
    fn refinement_halves_dx() {
        let a = Mesh1D::new(0.25, 1.75, 12).unwrap();
        let b = Mesh1D::new(0.25, 1.75, 24).unwrap();
        assert_eq!(a.dx(), 2.0 * b.dx());
    }

    #[test]
    fn mesh2d_basics() {
        let m = Mesh2D::new(-PI, PI, 10, 0.0, 1.0, 5).unwrap();
        assert_eq!(m.n_cells(), 50);
        let loc = m.locate(0.0, 0.99999);
        assert_eq!(loc.iy, 4);
        assert_eq!(m.cell_id(loc.ix, loc.iy), 4 * 10 + loc.ix);
    }
}
