//! Upstream-cell boundary geometry: parametric quadratic pieces, splitting at
//! grid-line crossings, and half-plane partition of closed chains.
//!
//! A region boundary is a closed counterclockwise chain of pieces, each
//! straight or quadratic in its parameter. Clipping first subdivides every
//! piece at its grid-line crossings, then partitions the chain against one
//! line at a time; replaced runs become straight connectors along the cut
//! line, so the output chains remain closed (possibly with degenerate
//! bridges, which integrate to zero).

/// One boundary piece: `P(s) = a + b s + c s^2` for `s` in `[0, 1]`.
/// Straight pieces have `c = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub ax: f64,
    pub bx: f64,
    pub cx: f64,
    pub ay: f64,
    pub by: f64,
    pub cy: f64,
    /// True for connectors inserted along grid lines during clipping.
    pub from_grid: bool,
}

/// Axis selector for grid lines: `X` means vertical lines `x = const`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Piece {
    pub fn straight(p0: (f64, f64), p1: (f64, f64)) -> Self {
        Self {
            ax: p0.0,
            bx: p1.0 - p0.0,
            cx: 0.0,
            ay: p0.1,
            by: p1.1 - p0.1,
            cy: 0.0,
            from_grid: false,
        }
    }

    /// Quadratic through `p0` at `s = 0`, `pm` at `s = 1/2`, `p1` at `s = 1`.
    pub fn quadratic(p0: (f64, f64), pm: (f64, f64), p1: (f64, f64)) -> Self {
        Self {
            ax: p0.0,
            bx: -3.0 * p0.0 + 4.0 * pm.0 - p1.0,
            cx: 2.0 * p0.0 - 4.0 * pm.0 + 2.0 * p1.0,
            ay: p0.1,
            by: -3.0 * p0.1 + 4.0 * pm.1 - p1.1,
            cy: 2.0 * p0.1 - 4.0 * pm.1 + 2.0 * p1.1,
            from_grid: false,
        }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> (f64, f64) {
        (
            self.ax + s * (self.bx + s * self.cx),
            self.ay + s * (self.by + s * self.cy),
        )
    }

    #[inline]
    pub fn start(&self) -> (f64, f64) {
        (self.ax, self.ay)
    }

    #[inline]
    pub fn end(&self) -> (f64, f64) {
        (self.ax + self.bx + self.cx, self.ay + self.by + self.cy)
    }

    #[inline]
    pub fn is_straight(&self) -> bool {
        self.cx == 0.0 && self.cy == 0.0
    }

    #[inline]
    pub fn coord(&self, axis: Axis, s: f64) -> f64 {
        match axis {
            Axis::X => self.ax + s * (self.bx + s * self.cx),
            Axis::Y => self.ay + s * (self.by + s * self.cy),
        }
    }

    fn coeffs(&self, axis: Axis) -> (f64, f64, f64) {
        match axis {
            Axis::X => (self.ax, self.bx, self.cx),
            Axis::Y => (self.ay, self.by, self.cy),
        }
    }

    /// Restriction to `[s0, s1]`, reparametrized to `[0, 1]`.
    pub fn subpiece(&self, s0: f64, s1: f64) -> Piece {
        let d = s1 - s0;
        Piece {
            ax: self.ax + s0 * (self.bx + s0 * self.cx),
            bx: (self.bx + 2.0 * self.cx * s0) * d,
            cx: self.cx * d * d,
            ay: self.ay + s0 * (self.by + s0 * self.cy),
            by: (self.by + 2.0 * self.cy * s0) * d,
            cy: self.cy * d * d,
            from_grid: self.from_grid,
        }
    }

    /// Coordinate range along an axis over `[0, 1]`, including the interior
    /// extremum of a quadratic.
    pub fn coord_range(&self, axis: Axis) -> (f64, f64) {
        let (a, b, c) = self.coeffs(axis);
        let v0 = a;
        let v1 = a + b + c;
        let mut lo = v0.min(v1);
        let mut hi = v0.max(v1);
        if c != 0.0 {
            let s = -b / (2.0 * c);
            if s > 0.0 && s < 1.0 {
                let v = a + s * (b + s * c);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// Parameters in `(0, 1)` where the piece crosses `coord(axis) = line`.
/// Closed-form roots of the quadratic, with a monotone-span bisection
/// fallback if a root fails verification.
fn crossings(piece: &Piece, axis: Axis, line: f64, out: &mut Vec<f64>) {
    let (a, b, c) = piece.coeffs(axis);
    let scale = a.abs().max((a + b + c).abs()).max(line.abs()).max(1e-300);
    let s_eps = 1e-11;
    let mut push = |s: f64| {
        if s > s_eps && s < 1.0 - s_eps {
            out.push(s);
        }
    };
    if c.abs() <= 1e-14 * (b.abs() + c.abs()).max(scale) {
        // effectively linear
        if b != 0.0 {
            push((line - a) / b);
        }
        return;
    }
    let disc = b * b - 4.0 * c * (a - line);
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // citardauq form for the root subject to cancellation
        let q = -0.5 * (b + b.signum() * sq);
        let r1 = q / c;
        let r2 = if q != 0.0 { (a - line) / q } else { -b / c - r1 };
        for r in [r1, r2] {
            if r.is_finite() && (piece.coord(axis, r) - line).abs() <= 1e-9 * scale {
                push(r);
            } else {
                // verify by bisection over the monotone span containing r
                if let Some(s) = bisect_span(a, b, c, line, r) {
                    push(s);
                }
            }
        }
    }
}

/// Bisection on the monotone span of `a + b s + c s^2` around `hint`.
fn bisect_span(a: f64, b: f64, c: f64, line: f64, hint: f64) -> Option<f64> {
    let vertex = if c != 0.0 { -b / (2.0 * c) } else { f64::NAN };
    let spans: [(f64, f64); 2] = if vertex.is_finite() && vertex > 0.0 && vertex < 1.0 {
        [(0.0, vertex), (vertex, 1.0)]
    } else {
        [(0.0, 1.0), (f64::NAN, f64::NAN)]
    };
    let f = |s: f64| a + s * (b + s * c) - line;
    for &(mut lo, mut hi) in spans.iter() {
        if !lo.is_finite() {
            continue;
        }
        if !(hint >= lo - 0.5 && hint <= hi + 0.5) {
            continue;
        }
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            return Some(lo);
        }
        if fhi == 0.0 {
            return Some(hi);
        }
        if flo * fhi > 0.0 {
            continue;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 || hi - lo < 1e-15 {
                return Some(mid);
            }
            if flo * fm <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Some(0.5 * (lo + hi));
    }
    None
}

/// Split every piece at its crossings with the given sorted grid lines so
/// that no piece interior crosses any of them.
pub fn split_pieces_at_lines(pieces: &mut Vec<Piece>, axis: Axis, lines: &[f64]) {
    if lines.is_empty() {
        return;
    }
    let mut out = Vec::with_capacity(pieces.len() + 4);
    let mut params: Vec<f64> = Vec::new();
    for piece in pieces.iter() {
        params.clear();
        let (lo, hi) = piece.coord_range(axis);
        for &line in lines {
            if line > lo && line < hi {
                crossings(piece, axis, line, &mut params);
            }
        }
        if params.is_empty() {
            out.push(*piece);
            continue;
        }
        params.sort_by(|a, b| a.partial_cmp(b).unwrap());
        params.dedup_by(|a, b| (*a - *b).abs() < 1e-11);
        let mut s0 = 0.0;
        for &s in params.iter() {
            out.push(piece.subpiece(s0, s));
            s0 = s;
        }
        out.push(piece.subpiece(s0, 1.0));
    }
    std::mem::swap(pieces, &mut out);
}

/// Partition a closed chain against `coord(axis) = line` into the part below
/// (or left) and the part above (or right). Pieces must not cross the line
/// in their interior. `eps` is the geometric snapping tolerance.
pub fn partition_chain(
    chain: &[Piece],
    axis: Axis,
    line: f64,
    eps: f64,
    below: &mut Vec<Piece>,
    above: &mut Vec<Piece>,
) {
    below.clear();
    above.clear();
    if chain.is_empty() {
        return;
    }
    let n = chain.len();
    let side_of = |p: &Piece| -> i8 {
        let mid = p.coord(axis, 0.5);
        let d = mid - line;
        if d.abs() > eps {
            return if d < 0.0 { -1 } else { 1 };
        }
        // piece lies along the line: the interior of a CCW chain is to the
        // left of the travel direction; probe a point nudged that way
        let (tx, ty) = match axis {
            Axis::X => (p.bx + p.cx, p.by + p.cy),
            Axis::Y => (p.bx + p.cx, p.by + p.cy),
        };
        let norm = (tx * tx + ty * ty).sqrt().max(1e-300);
        let (nx, ny) = (-ty / norm, tx / norm);
        let delta = 1e4 * eps;
        let probe = match axis {
            Axis::X => p.coord(Axis::X, 0.5) + nx * delta,
            Axis::Y => p.coord(Axis::Y, 0.5) + ny * delta,
        };
        if probe - line < 0.0 {
            -1
        } else {
            1
        }
    };
    let sides: Vec<i8> = chain.iter().map(side_of).collect();
    if sides.iter().all(|&s| s == sides[0]) {
        let dst = if sides[0] < 0 { below } else { above };
        dst.extend_from_slice(chain);
        return;
    }
    // start the cyclic walk at a transition
    let mut start = 0;
    for i in 0..n {
        if sides[i] != sides[(i + n - 1) % n] {
            start = i;
            break;
        }
    }
    // snap a point's axis coordinate onto the line
    let snap = |p: (f64, f64)| -> (f64, f64) {
        match axis {
            Axis::X => (line, p.1),
            Axis::Y => (p.0, line),
        }
    };
    let emit = |side: i8, run: &[Piece], below: &mut Vec<Piece>, above: &mut Vec<Piece>| {
        let dst = if side < 0 { below } else { above };
        if let Some(last) = dst.last() {
            // close the gap left by the excluded run with a grid connector
            let from = snap(last.end());
            let to = snap(run[0].start());
            if (from.0 - to.0).abs() > eps || (from.1 - to.1).abs() > eps {
                let mut conn = Piece::straight(from, to);
                conn.from_grid = true;
                dst.push(conn);
            }
        }
        dst.extend_from_slice(run);
    };
    let mut i = start;
    let mut run: Vec<Piece> = Vec::new();
    let mut run_side = sides[start];
    for _ in 0..n {
        if sides[i] == run_side {
            run.push(chain[i]);
        } else {
            emit(run_side, &run, below, above);
            run.clear();
            run_side = sides[i];
            run.push(chain[i]);
        }
        i = (i + 1) % n;
    }
    emit(run_side, &run, below, above);
    // close each output chain back to its first piece
    for dst in [below, above] {
        if !dst.is_empty() {
            let from = snap(dst.last().unwrap().end());
            let to = snap(dst[0].start());
            if (from.0 - to.0).abs() > eps || (from.1 - to.1).abs() > eps {
                let mut conn = Piece::straight(from, to);
                conn.from_grid = true;
                dst.push(conn);
            }
        }
    }
}

/// Signed area of a closed chain via the Green integral `∮ x dy`.
/// Exact for quadratic pieces (2-point Gauss, degree 3 integrand).
pub fn chain_area(chain: &[Piece]) -> f64 {
    const NODES: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
    let mut a = 0.0;
    for p in chain {
        for &t in &NODES {
            let s = 0.5 * (t + 1.0);
            let x = p.ax + s * (p.bx + s * p.cx);
            let dy = p.by + 2.0 * p.cy * s;
            a += 0.5 * x * dy;
        }
    }
    a
}

/// Area and centroid of a closed chain (3-point Gauss, exact to degree 5).
pub fn chain_area_centroid(chain: &[Piece]) -> (f64, f64, f64) {
    const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut a = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for p in chain {
        for (&t, &w) in NODES.iter().zip(&WEIGHTS) {
            let s = 0.5 * (t + 1.0);
            let x = p.ax + s * (p.bx + s * p.cx);
            let y = p.ay + s * (p.by + s * p.cy);
            let dx = p.bx + 2.0 * p.cx * s;
            let dy = p.by + 2.0 * p.cy * s;
            a += 0.5 * w * x * dy;
            mx += 0.5 * w * x * x * dy; // ∮ x^2/2 dy
            my -= 0.5 * w * y * y * dx; // -∮ y^2/2 dx
        }
    }
    mx *= 0.5;
    my *= 0.5;
    if a.abs() < 1e-300 {
        let p0 = chain.first().map(|p| p.start()).unwrap_or((0.0, 0.0));
        (a, p0.0, p0.1)
    } else {
        (a, mx / a, my / a)
    }
}

/// Maximum gap between consecutive piece endpoints of a closed chain.
pub fn chain_closure_gap(chain: &[Piece]) -> f64 {
    let n = chain.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let e = chain[i].end();
        let s = chain[(i + 1) % n].start();
        worst = worst.max((e.0 - s.0).abs().max((e.1 - s.1).abs()));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, w: f64) -> Vec<Piece> {
        vec![
            Piece::straight((x0, y0), (x0 + w, y0)),
            Piece::straight((x0 + w, y0), (x0 + w, y0 + w)),
            Piece::straight((x0 + w, y0 + w), (x0, y0 + w)),
            Piece::straight((x0, y0 + w), (x0, y0)),
        ]
    }

    #[test]
    fn area_of_square_and_triangle() {
        assert!((chain_area(&square(0.0, 0.0, 2.0)) - 4.0).abs() < 1e-13);
        let tri = vec![
            Piece::straight((0.0, 0.0), (1.0, 0.0)),
            Piece::straight((1.0, 0.0), (0.0, 1.0)),
            Piece::straight((0.0, 1.0), (0.0, 0.0)),
        ];
        assert!((chain_area(&tri) - 0.5).abs() < 1e-14);
        let (a, cx, cy) = chain_area_centroid(&tri);
        assert!((a - 0.5).abs() < 1e-14);
        assert!((cx - 1.0 / 3.0).abs() < 1e-13);
        assert!((cy - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn quadratic_piece_interpolates() {
        let p = Piece::quadratic((0.0, 0.0), (0.5, 0.3), (1.0, 0.0));
        assert_eq!(p.eval(0.0), (0.0, 0.0));
        let m = p.eval(0.5);
        assert!((m.0 - 0.5).abs() < 1e-15 && (m.1 - 0.3).abs() < 1e-15);
        let e = p.eval(1.0);
        assert!((e.0 - 1.0).abs() < 1e-15 && e.1.abs() < 1e-15);
        // subpiece keeps the same locus
        let sub = p.subpiece(0.25, 0.75);
        for i in 0..5 {
            let s = i as f64 / 4.0;
            let q = sub.eval(s);
            let r = p.eval(0.25 + 0.5 * s);
            assert!((q.0 - r.0).abs() < 1e-14 && (q.1 - r.1).abs() < 1e-14);
        }
    }

    #[test]
    fn split_and_partition_square() {
        let mut chain = square(0.0, 0.0, 1.0);
        split_pieces_at_lines(&mut chain, Axis::X, &[0.4]);
        assert_eq!(chain.len(), 6);
        let mut left = Vec::new();
        let mut right = Vec::new();
        partition_chain(&chain, Axis::X, 0.4, 1e-12, &mut left, &mut right);
        assert!((chain_area(&left) - 0.4).abs() < 1e-13);
        assert!((chain_area(&right) - 0.6).abs() < 1e-13);
        assert!(chain_closure_gap(&left) < 1e-12);
        assert!(chain_closure_gap(&right) < 1e-12);
    }

    #[test]
    fn partition_edge_on_line_keeps_area() {
        // square whose left edge lies exactly on the cut line
        let chain = square(0.0, 0.0, 1.0);
        let mut left = Vec::new();
        let mut right = Vec::new();
        partition_chain(&chain, Axis::X, 0.0, 1e-12, &mut left, &mut right);
        assert!(chain_area(&left).abs() < 1e-13);
        assert!((chain_area(&right) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn curved_edge_crossings_found() {
        // A bulging edge crossing x = 1.05 twice
        let p = Piece::quadratic((1.0, 0.0), (1.1, 0.5), (1.0, 1.0));
        let mut out = Vec::new();
        crossings(&p, Axis::X, 1.05, &mut out);
        assert_eq!(out.len(), 2);
        for &s in &out {
            assert!((p.coord(Axis::X, s) - 1.05).abs() < 1e-10);
        }
    }

    #[test]
    fn random_quadrilateral_partition_conserves_area() {
        let mut state = 0xdeadbeefu64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            // convex-ish quadrilateral around the unit square
            let pts: Vec<(f64, f64)> = (0..4)
                .map(|q| {
                    let ang = std::f64::consts::FRAC_PI_2 * q as f64
                        + 0.8 * (next() - 0.5);
                    let r = 0.6 + 0.5 * next();
                    (0.5 + r * ang.cos(), 0.5 + r * ang.sin())
                })
                .collect();
            let mut chain: Vec<Piece> = (0..4)
                .map(|i| Piece::straight(pts[i], pts[(i + 1) % 4]))
                .collect();
            let total = chain_area(&chain);
            if total <= 0.0 {
                continue;
            }
            let line = 0.2 + 0.6 * next();
            split_pieces_at_lines(&mut chain, Axis::Y, &[line]);
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            partition_chain(&chain, Axis::Y, line, 1e-12, &mut lo, &mut hi);
            let sum = chain_area(&lo) + chain_area(&hi);
            assert!(
                (sum - total).abs() < 1e-12 * total.abs().max(1.0),
                "area {total} vs {sum}"
            );
        }
    }
}
