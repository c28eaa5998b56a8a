//! Modal Legendre polynomial spaces on reference elements, Gauss quadrature,
//! and L2 projection.
//!
//! All solution data is stored in an orthogonal Legendre basis, so coefficient
//! zero is the cell average and mass matrices are diagonal. The 2D spaces are
//! `P^k` (total degree, graded-lexicographic ordering) and `Q^k` (tensor
//! product, ordered by `i * (k+1) + j` with `i` the x-degree).

use crate::error::{Result, SldgError};

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 3;

pub fn check_degree(k: usize) -> Result<()> {
    if k == 0 || k > MAX_DEGREE {
        return Err(SldgError::UnsupportedDegree(k));
    }
    Ok(())
}

/// Evaluate Legendre polynomials `P_0..=P_deg` at `x` into `out`.
#[inline]
pub fn legendre_all(deg: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if deg >= 1 {
        out[1] = x;
    }
    for m in 1..deg {
        out[m + 1] = ((2 * m + 1) as f64 * x * out[m] - m as f64 * out[m - 1]) / (m + 1) as f64;
    }
}

/// Evaluate `P_0..=deg` and their derivatives at `x`.
#[inline]
pub fn legendre_all_deriv(deg: usize, x: f64, vals: &mut [f64], ders: &mut [f64]) {
    vals[0] = 1.0;
    ders[0] = 0.0;
    if deg >= 1 {
        vals[1] = x;
        ders[1] = 1.0;
    }
    for m in 1..deg {
        vals[m + 1] = ((2 * m + 1) as f64 * x * vals[m] - m as f64 * vals[m - 1]) / (m + 1) as f64;
        ders[m + 1] = ders[m - 1] + (2 * m + 1) as f64 * vals[m];
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut d0 = 0.0;
    if n == 0 {
        return (p0, d0);
    }
    let mut p1 = x;
    let mut d1 = 1.0;
    for m in 1..n {
        let p2 = ((2 * m + 1) as f64 * x * p1 - m as f64 * p0) / (m + 1) as f64;
        let d2 = d0 + (2 * m + 1) as f64 * p1;
        p0 = p1;
        d0 = d1;
        p1 = p2;
        d1 = d2;
    }
    (p1, d1)
}

/// Monomial coefficients of `P_m` on `[-1, 1]` (constant term first).
pub fn legendre_monomial_coeffs(m: usize) -> [f64; MAX_DEGREE + 1] {
    match m {
        0 => [1.0, 0.0, 0.0, 0.0],
        1 => [0.0, 1.0, 0.0, 0.0],
        2 => [-0.5, 0.0, 1.5, 0.0],
        3 => [0.0, -1.5, 0.0, 2.5],
        _ => panic!("degree {m} out of range"),
    }
}

/// Squared L2 norm of `P_m` on `[-1, 1]`.
#[inline]
pub fn legendre_norm_sq(m: usize) -> f64 {
    2.0 / (2 * m + 1) as f64
}

/// Quadrature rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre rule with `n` nodes; exact for polynomials of degree
/// `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(SldgError::InvalidQuadrature(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-type initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss-Lobatto rule with `n >= 2` nodes including the endpoints; exact for
/// polynomials of degree `2n - 3`.
pub fn gauss_lobatto(n: usize) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(SldgError::InvalidQuadrature(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n - 1;
    let end_w = 2.0 / (m as f64 * (m + 1) as f64);
    nodes[0] = -1.0;
    nodes[n - 1] = 1.0;
    weights[0] = end_w;
    weights[n - 1] = end_w;
    // interior nodes are the roots of P'_{n-1}
    for i in 1..=(n - 1) / 2 {
        let mut x = ((i as f64 - 0.25) / (m as f64 - 0.5) * std::f64::consts::PI).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(m, x);
            // P''_m from the Legendre ODE
            let ddp = (2.0 * x * dp - (m * (m + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, _) = legendre_with_derivative(m, x);
        let w = 2.0 / (m as f64 * (m + 1) as f64 * p * p);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (p, _) = legendre_with_derivative(m, 0.0);
        weights[n / 2] = 2.0 / (m as f64 * (m + 1) as f64 * p * p);
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Tag for the 2D polynomial space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceTag {
    /// Total degree at most `k`; `(k+1)(k+2)/2` coefficients.
    P,
    /// Tensor degree at most `k` per variable; `(k+1)^2` coefficients.
    Q,
}

/// Number of coefficients for a 2D space of degree `k`.
#[inline]
pub fn n_coeffs_2d(k: usize, space: SpaceTag) -> usize {
    match space {
        SpaceTag::P => (k + 1) * (k + 2) / 2,
        SpaceTag::Q => (k + 1) * (k + 1),
    }
}

/// Basis exponent pairs `(a, b)` in storage order: `P^k` graded by total
/// degree with x-degree descending inside each grade, `Q^k` by
/// `i * (k+1) + j`.
pub fn basis_exponents(k: usize, space: SpaceTag) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n_coeffs_2d(k, space));
    match space {
        SpaceTag::P => {
            for d in 0..=k {
                for a in (0..=d).rev() {
                    v.push((a, d - a));
                }
            }
        }
        SpaceTag::Q => {
            for i in 0..=k {
                for j in 0..=k {
                    v.push((i, j));
                }
            }
        }
    }
    v
}

/// Degree-`k` polynomial on the reference interval, Legendre coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalPoly1D {
    pub k: usize,
    pub coeffs: Vec<f64>,
}

impl ModalPoly1D {
    pub fn zero(k: usize) -> Self {
        Self {
            k,
            coeffs: vec![0.0; k + 1],
        }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        eval_1d(&self.coeffs, xi)
    }

    /// Cell average (the constant-mode coefficient).
    pub fn average(&self) -> f64 {
        self.coeffs[0]
    }
}

/// Degree-`k` polynomial on the reference square.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalPoly2D {
    pub k: usize,
    pub space: SpaceTag,
    pub coeffs: Vec<f64>,
}

impl ModalPoly2D {
    pub fn zero(k: usize, space: SpaceTag) -> Self {
        Self {
            k,
            space,
            coeffs: vec![0.0; n_coeffs_2d(k, space)],
        }
    }

    pub fn eval(&self, xi: f64, eta: f64) -> f64 {
        eval_2d(&self.coeffs, self.k, self.space, xi, eta)
    }

    pub fn average(&self) -> f64 {
        self.coeffs[0]
    }
}

/// Evaluate a 1D Legendre expansion at `xi`.
#[inline]
pub fn eval_1d(coeffs: &[f64], xi: f64) -> f64 {
    let mut vals = [0.0; MAX_DEGREE + 1];
    let k = coeffs.len() - 1;
    legendre_all(k, xi, &mut vals);
    let mut s = 0.0;
    for (c, v) in coeffs.iter().zip(vals.iter()) {
        s += c * v;
    }
    s
}

/// Evaluate a 2D modal expansion at `(xi, eta)`.
pub fn eval_2d(coeffs: &[f64], k: usize, space: SpaceTag, xi: f64, eta: f64) -> f64 {
    let mut px = [0.0; MAX_DEGREE + 1];
    let mut py = [0.0; MAX_DEGREE + 1];
    legendre_all(k, xi, &mut px);
    legendre_all(k, eta, &mut py);
    let mut s = 0.0;
    match space {
        SpaceTag::Q => {
            let mut m = 0;
            for i in 0..=k {
                for j in 0..=k {
                    s += coeffs[m] * px[i] * py[j];
                    m += 1;
                }
            }
        }
        SpaceTag::P => {
            let mut m = 0;
            for d in 0..=k {
                for a in (0..=d).rev() {
                    s += coeffs[m] * px[a] * py[d - a];
                    m += 1;
                }
            }
        }
    }
    s
}

/// Squared L2 norms of the 2D basis functions on the reference square, in
/// storage order.
pub fn norms_sq_2d(k: usize, space: SpaceTag) -> Vec<f64> {
    basis_exponents(k, space)
        .iter()
        .map(|&(a, b)| legendre_norm_sq(a) * legendre_norm_sq(b))
        .collect()
}

/// Number of quadrature points used for projecting general (non-polynomial)
/// data. Over-integration keeps the initialization error far below the
/// scheme's discretization error.
#[inline]
pub fn projection_points(k: usize) -> usize {
    k + 6
}

/// L2-project `f` (physical coordinates) onto degree `k` over `[a, b]`.
pub fn project_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, k: usize) -> ModalPoly1D {
    let rule = gauss_legendre(projection_points(k)).expect("valid rule");
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut coeffs = vec![0.0; k + 1];
    let mut vals = [0.0; MAX_DEGREE + 1];
    for (&xi, &w) in rule.nodes.iter().zip(&rule.weights) {
        let fx = f(mid + half * xi);
        legendre_all(k, xi, &mut vals);
        for m in 0..=k {
            coeffs[m] += w * fx * vals[m];
        }
    }
    for m in 0..=k {
        coeffs[m] /= legendre_norm_sq(m);
    }
    ModalPoly1D { k, coeffs }
}

/// L2-project `f` (physical coordinates) onto the chosen space over the
/// rectangle `[ax, bx] x [ay, by]`.
pub fn project_2d(
    f: impl Fn(f64, f64) -> f64,
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
    k: usize,
    space: SpaceTag,
) -> ModalPoly2D {
    let rule = gauss_legendre(projection_points(k)).expect("valid rule");
    let (mx, hx) = (0.5 * (ax + bx), 0.5 * (bx - ax));
    let (my, hy) = (0.5 * (ay + by), 0.5 * (by - ay));
    let exps = basis_exponents(k, space);
    let mut coeffs = vec![0.0; exps.len()];
    let mut px = [0.0; MAX_DEGREE + 1];
    let mut py = [0.0; MAX_DEGREE + 1];
    for (&xi, &wx) in rule.nodes.iter().zip(&rule.weights) {
        legendre_all(k, xi, &mut px);
        let pxs = px;
        for (&eta, &wy) in rule.nodes.iter().zip(&rule.weights) {
            legendre_all(k, eta, &mut py);
            let fv = f(mx + hx * xi, my + hy * eta);
            let w = wx * wy * fv;
            for (m, &(a, b)) in exps.iter().enumerate() {
                coeffs[m] += w * pxs[a] * py[b];
            }
        }
    }
    let norms = norms_sq_2d(k, space);
    for (c, n) in coeffs.iter_mut().zip(&norms) {
        *c /= n;
    }
    ModalPoly2D { k, space, coeffs }
}

/// Exact integral of the product of two 1D modal polynomials over the
/// sub-interval `[a, b]` of the reference interval (zero if inverted).
pub fn integrate_product_1d(pa: &ModalPoly1D, pb: &ModalPoly1D, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = pa.k.max(pb.k) + 1;
    let rule = gauss_legendre(n).expect("valid rule");
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let xi = mid + half * t;
        s += w * pa.eval(xi) * pb.eval(xi);
    }
    s * half
}

/// Exact integral of the product of two 2D modal polynomials over the
/// sub-rectangle `[ax, bx] x [ay, by]` of the reference square.
pub fn integrate_product_2d(
    pa: &ModalPoly2D,
    pb: &ModalPoly2D,
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
) -> f64 {
    if bx <= ax || by <= ay {
        return 0.0;
    }
    let n = pa.k.max(pb.k) + 1;
    let rule = gauss_legendre(n).expect("valid rule");
    let (mx, hx) = (0.5 * (ax + bx), 0.5 * (bx - ax));
    let (my, hy) = (0.5 * (ay + by), 0.5 * (by - ay));
    let mut s = 0.0;
    for (&tx, &wx) in rule.nodes.iter().zip(&rule.weights) {
        let xi = mx + hx * tx;
        for (&ty, &wy) in rule.nodes.iter().zip(&rule.weights) {
            let eta = my + hy * ty;
            s += wx * wy * pa.eval(xi, eta) * pb.eval(xi, eta);
        }
    }
    s * hx * hy
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral(p: u32) -> f64 {
        // closed form for int_{-1}^{1} x^p dx
        if p % 2 == 1 {
            0.0
        } else {
            2.0 / (p as f64 + 1.0)
        }
    }

    #[test]
    fn gauss_legendre_small_rules() {
        let r1 = gauss_legendre(1).unwrap();
        assert_eq!(r1.nodes, vec![0.0]);
        assert_eq!(r1.weights, vec![2.0]);
        let r2 = gauss_legendre(2).unwrap();
        let s3 = 1.0 / 3.0_f64.sqrt();
        assert!((r2.nodes[0] + s3).abs() < 1e-15);
        assert!((r2.nodes[1] - s3).abs() < 1e-15);
        assert!((r2.weights[0] - 1.0).abs() < 1e-15);
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn gauss_legendre_monomial_exactness() {
        // n = 5 integrates x^8 exactly: 2/9
        let r = gauss_legendre(5).unwrap();
        let val: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(&x, &w)| w * x.powi(8))
            .sum();
        assert!((val - 2.0 / 9.0).abs() < 1e-14);
        // all rules: weights sum to 2, monomials exact up to 2n-1
        for n in 1..=12 {
            let r = gauss_legendre(n).unwrap();
            let ws: f64 = r.weights.iter().sum();
            assert!((ws - 2.0).abs() < 1e-14, "n={n}");
            for p in 0..=(2 * n - 1) as u32 {
                let val: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(&x, &w)| w * x.powi(p as i32))
                    .sum();
                let exact = monomial_integral(p);
                assert!(
                    (val - exact).abs() <= 1e-13 * exact.abs().max(1.0),
                    "n={n} p={p}: {val} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn gauss_lobatto_rules() {
        let r2 = gauss_lobatto(2).unwrap();
        assert_eq!(r2.nodes, vec![-1.0, 1.0]);
        assert_eq!(r2.weights, vec![1.0, 1.0]);
        let r3 = gauss_lobatto(3).unwrap();
        assert_eq!(r3.nodes, vec![-1.0, 0.0, 1.0]);
        assert!((r3.weights[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((r3.weights[1] - 4.0 / 3.0).abs() < 1e-15);
        assert!(gauss_lobatto(1).is_err());
        // n = 4 integrates x^4 exactly: 2/5
        let r4 = gauss_lobatto(4).unwrap();
        let val: f64 = r4
            .nodes
            .iter()
            .zip(&r4.weights)
            .map(|(&x, &w)| w * x.powi(4))
            .sum();
        assert!((val - 0.4).abs() < 1e-14);
        for n in 2..=10 {
            let r = gauss_lobatto(n).unwrap();
            assert!((r.nodes[0] + 1.0).abs() < 1e-15);
            assert!((r.nodes[n - 1] - 1.0).abs() < 1e-15);
            for p in 0..=(2 * n - 3) as u32 {
                let val: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(&x, &w)| w * x.powi(p as i32))
                    .sum();
                let exact = monomial_integral(p);
                assert!(
                    (val - exact).abs() <= 1e-13 * exact.abs().max(1.0),
                    "n={n} p={p}"
                );
            }
        }
    }

    #[test]
    fn projection_reproduces_constants_and_polynomials() {
        let p = project_1d(|_| 1.0, 0.3, 1.1, 2);
        assert!((p.coeffs[0] - 1.0).abs() < 1e-14);
        assert!(p.coeffs[1].abs() < 1e-14 && p.coeffs[2].abs() < 1e-14);

        // degree <= k data round-trips exactly
        let f = |x: f64| 0.7 - 1.3 * x + 0.25 * x * x;
        let p = project_1d(f, -0.5, 2.0, 2);
        for i in 0..10 {
            let xi = -1.0 + 2.0 * i as f64 / 9.0;
            let x = 0.75 + 1.25 * xi;
            assert!((p.eval(xi) - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_matches_refined_quadrature_oracle() {
        // project sin(x) on [0, pi/2] at k = 2; oracle uses a 50-point rule
        let (a, b) = (0.0, std::f64::consts::FRAC_PI_2);
        let p = project_1d(|x| x.sin(), a, b, 2);
        let rule = gauss_legendre(50).unwrap();
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for m in 0..=2 {
            let mut num = 0.0;
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let mut vals = [0.0; MAX_DEGREE + 1];
                legendre_all(2, t, &mut vals);
                num += w * (mid + half * t).sin() * vals[m];
            }
            let oracle = num / legendre_norm_sq(m);
            assert!((p.coeffs[m] - oracle).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn projection_is_a_contraction() {
        let (a, b) = (-1.2, 0.8);
        let f = |x: f64| (3.0 * x).sin() + 0.5 * (7.0 * x).cos();
        let p = project_1d(f, a, b, 2);
        let rule = gauss_legendre(40).unwrap();
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut nf = 0.0;
        let mut np = 0.0;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            nf += w * f(mid + half * t).powi(2);
            np += w * p.eval(t).powi(2);
        }
        assert!(np.sqrt() <= nf.sqrt() + 1e-12);
    }

    #[test]
    fn eval_matches_monomial_expansion_oracle() {
        let coeffs = vec![0.37, -1.21, 0.64, 0.11];
        let p = ModalPoly1D { k: 3, coeffs };
        for i in 0..21 {
            let x = -1.0 + 0.1 * i as f64;
            // Horner on the summed monomial expansion
            let mut mono = [0.0; 4];
            for (m, &c) in p.coeffs.iter().enumerate() {
                let lm = legendre_monomial_coeffs(m);
                for j in 0..4 {
                    mono[j] += c * lm[j];
                }
            }
            let horner = ((mono[3] * x + mono[2]) * x + mono[1]) * x + mono[0];
            assert!((p.eval(x) - horner).abs() < 1e-13);
        }
        assert_eq!(ModalPoly1D::zero(2).eval(0.33), 0.0);
    }

    #[test]
    fn integrate_product_basics() {
        let one = ModalPoly1D {
            k: 2,
            coeffs: vec![1.0, 0.0, 0.0],
        };
        assert!((integrate_product_1d(&one, &one, -1.0, 1.0) - 2.0).abs() < 1e-14);
        // orthogonality of distinct basis functions over the full element
        let p1 = ModalPoly1D {
            k: 2,
            coeffs: vec![0.0, 1.0, 0.0],
        };
        let p2 = ModalPoly1D {
            k: 2,
            coeffs: vec![0.0, 0.0, 1.0],
        };
        assert!(integrate_product_1d(&p1, &p2, -1.0, 1.0).abs() < 1e-14);
        // inverted region gives zero
        assert_eq!(integrate_product_1d(&p1, &p2, 0.5, -0.5), 0.0);
    }

    #[test]
    fn integrate_product_matches_refined_quadrature() {
        let pa = ModalPoly1D {
            k: 2,
            coeffs: vec![0.4, -0.9, 1.7],
        };
        let pb = ModalPoly1D {
            k: 2,
            coeffs: vec![-0.2, 0.55, 0.31],
        };
        let (a, b) = (-0.3, 0.7);
        let got = integrate_product_1d(&pa, &pb, a, b);
        let rule = gauss_legendre(50).unwrap();
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let oracle: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| {
                let xi = mid + half * t;
                w * pa.eval(xi) * pb.eval(xi)
            })
            .sum::<f64>()
            * half;
        assert!((got - oracle).abs() < 1e-13);
    }

    #[test]
    fn q_space_contains_p_space() {
        let exps_p = basis_exponents(2, SpaceTag::P);
        let exps_q = basis_exponents(2, SpaceTag::Q);
        let mut pc = ModalPoly2D::zero(2, SpaceTag::P);
        for (m, c) in pc.coeffs.iter_mut().enumerate() {
            *c = 0.3 + 0.1 * m as f64;
        }
        // embed into Q by matching exponents, then project back via sampling
        let mut qc = ModalPoly2D::zero(2, SpaceTag::Q);
        for (m, &(a, b)) in exps_p.iter().enumerate() {
            let qidx = exps_q.iter().position(|&e| e == (a, b)).unwrap();
            qc.coeffs[qidx] = pc.coeffs[m];
        }
        let q = project_2d(
            |x, y| qc.eval(x, y),
            -1.0,
            1.0,
            -1.0,
            1.0,
            2,
            SpaceTag::Q,
        );
        for (a, b) in [(0.3, -0.7), (-0.9, 0.2), (0.5, 0.5)] {
            assert!((q.eval(a, b) - pc.eval(a, b)).abs() < 1e-13);
        }
    }

    #[test]
    fn p_space_ordering_is_graded_lex() {
        assert_eq!(
            basis_exponents(2, SpaceTag::P),
            vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        );
        assert_eq!(n_coeffs_2d(2, SpaceTag::P), 6);
        assert_eq!(n_coeffs_2d(2, SpaceTag::Q), 9);
    }

    #[test]
    fn project_2d_separable() {
        let f = |x: f64, y: f64| (1.0 + x) * (2.0 - y);
        let p = project_2d(f, 0.0, 2.0, -1.0, 3.0, 1, SpaceTag::Q);
        for (xi, eta) in [(-1.0, -1.0), (0.2, 0.6), (1.0, 1.0)] {
            let x = 1.0 + xi;
            let y = 1.0 + 2.0 * eta;
            assert!((p.eval(xi, eta) - f(x, y)).abs() < 1e-13);
        }
    }
}
