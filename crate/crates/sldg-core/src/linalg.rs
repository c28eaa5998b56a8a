//! Small dense solvers used by the schemes: partial-pivot LU for systems up
//! to a few unknowns, a complex variant for the per-mode Poisson blocks, and
//! Cholesky for least-squares normal equations.

use num_complex::Complex64;

const N_MAX: usize = 16;

/// LU factorization with partial pivoting of an `n x n` matrix, `n <= 16`.
pub struct LuSmall {
    lu: [f64; N_MAX * N_MAX],
    piv: [usize; N_MAX],
    n: usize,
}

impl LuSmall {
    pub fn factor(a: &[f64], n: usize) -> Result<Self, String> {
        assert!(n <= N_MAX && a.len() >= n * n);
        let mut lu = [0.0; N_MAX * N_MAX];
        lu[..n * n].copy_from_slice(&a[..n * n]);
        let mut piv = [0usize; N_MAX];
        let mut scale = 0.0f64;
        for v in &a[..n * n] {
            scale = scale.max(v.abs());
        }
        let tol = 1e-14 * scale.max(1.0);
        for col in 0..n {
            let mut p = col;
            let mut best = lu[col * n + col].abs();
            for row in col + 1..n {
                let v = lu[row * n + col].abs();
                if v > best {
                    best = v;
                    p = row;
                }
            }
            if best <= tol {
                return Err(format!("singular pivot {best:.3e} in column {col}"));
            }
            piv[col] = p;
            if p != col {
                for j in 0..n {
                    lu.swap(col * n + j, p * n + j);
                }
            }
            let d = lu[col * n + col];
            for row in col + 1..n {
                let f = lu[row * n + col] / d;
                lu[row * n + col] = f;
                for j in col + 1..n {
                    lu[row * n + j] -= f * lu[col * n + j];
                }
            }
        }
        Ok(Self { lu, piv, n })
    }

    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut y = [0.0; N_MAX];
        y[..n].copy_from_slice(&rhs[..n]);
        // apply all interchanges first: multipliers are stored in final row order
        for col in 0..n {
            y.swap(col, self.piv[col]);
        }
        for col in 0..n {
            for row in col + 1..n {
                y[row] -= self.lu[row * n + col] * y[col];
            }
        }
        for row in (0..n).rev() {
            let mut s = y[row];
            for j in row + 1..n {
                s -= self.lu[row * n + j] * out[j];
            }
            out[row] = s / self.lu[row * n + row];
        }
    }
}

/// Complex LU with partial pivoting for the per-wavenumber Poisson blocks.
pub struct LuComplex {
    lu: Vec<Complex64>,
    piv: Vec<usize>,
    n: usize,
}

impl LuComplex {
    pub fn factor(a: &[Complex64], n: usize) -> Result<Self, String> {
        assert!(a.len() >= n * n);
        let mut lu = a[..n * n].to_vec();
        let mut piv = vec![0usize; n];
        let mut scale = 0.0f64;
        for v in &lu {
            scale = scale.max(v.norm_sqr());
        }
        let tol = 1e-28 * scale.max(1.0);
        for col in 0..n {
            let mut p = col;
            let mut best = lu[col * n + col].norm_sqr();
            for row in col + 1..n {
                let v = lu[row * n + col].norm_sqr();
                if v > best {
                    best = v;
                    p = row;
                }
            }
            if best <= tol {
                return Err(format!("singular pivot in column {col}"));
            }
            piv[col] = p;
            if p != col {
                for j in 0..n {
                    lu.swap(col * n + j, p * n + j);
                }
            }
            let d = lu[col * n + col];
            for row in col + 1..n {
                let f = lu[row * n + col] / d;
                lu[row * n + col] = f;
                for j in col + 1..n {
                    let v = lu[col * n + j];
                    lu[row * n + j] -= f * v;
                }
            }
        }
        Ok(Self { lu, piv, n })
    }

    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let n = self.n;
        for col in 0..n {
            x.swap(col, self.piv[col]);
        }
        for col in 0..n {
            for row in col + 1..n {
                let f = self.lu[row * n + col];
                let v = x[col];
                x[row] -= f * v;
            }
        }
        for row in (0..n).rev() {
            let mut s = x[row];
            for j in row + 1..n {
                s -= self.lu[row * n + j] * x[j];
            }
            x[row] = s / self.lu[row * n + row];
        }
    }
}

/// In-place Cholesky factorization of a symmetric positive-definite matrix.
/// Returns an error string if a pivot collapses.
pub fn cholesky_factor(a: &mut [f64], n: usize) -> Result<(), String> {
    for col in 0..n {
        for row in col..n {
            let mut s = a[row * n + col];
            for j in 0..col {
                s -= a[row * n + j] * a[col * n + j];
            }
            if row == col {
                if s <= 0.0 {
                    return Err(format!("non-positive pivot {s:.3e} in column {col}"));
                }
                a[col * n + col] = s.sqrt();
            } else {
                a[row * n + col] = s / a[col * n + col];
            }
        }
    }
    Ok(())
}

/// Solve `L L^T x = b` with `L` from [`cholesky_factor`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64], out: &mut [f64]) {
    let mut y = [0.0; N_MAX];
    for row in 0..n {
        let mut s = b[row];
        for j in 0..row {
            s -= l[row * n + j] * y[j];
        }
        y[row] = s / l[row * n + row];
    }
    for row in (0..n).rev() {
        let mut s = y[row];
        for j in row + 1..n {
            s -= l[j * n + row] * out[j];
        }
        out[row] = s / l[row * n + row];
    }
}
