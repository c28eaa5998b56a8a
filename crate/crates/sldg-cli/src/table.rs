//! Error measurement against exact solutions or reference snapshots, and
//! convergence tables with spatial or temporal orders.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use sldg_core::basis::gauss_legendre;

use crate::io::Snapshot;

/// L2 and Linf errors of `snap` against a pointwise reference, measured at
/// `k + 3` Gauss points per direction on the snapshot's own mesh. The L2
/// norm is normalized by the square root of the domain area, matching the
/// benchmark tables.
pub fn errors_against(snap: &Snapshot, reference: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let rule = gauss_legendre(snap.k + 3).expect("valid rule");
    let mesh = &snap.mesh;
    let hx = 0.5 * mesh.dx();
    let hy = 0.5 * mesh.dy();
    let mut l2 = 0.0;
    let mut linf = 0.0f64;
    for iy in 0..mesh.ny() {
        let cy = mesh.y.center(iy);
        for ix in 0..mesh.nx() {
            let cx = mesh.x.center(ix);
            for (&tx, &wx) in rule.nodes.iter().zip(&rule.weights) {
                let x = cx + hx * tx;
                for (&ty, &wy) in rule.nodes.iter().zip(&rule.weights) {
                    let y = cy + hy * ty;
                    let d = snap.eval_at(x, y) - reference(x, y);
                    l2 += wx * wy * hx * hy * d * d;
                    linf = linf.max(d.abs());
                }
            }
        }
    }
    let area = mesh.x.length() * mesh.y.length();
    ((l2 / area).sqrt(), linf)
}

/// Errors of `snap` against a reference snapshot on the same domain (the
/// reference may live on the same or a finer mesh).
pub fn compare_solutions(snap: &Snapshot, reference: &Snapshot) -> Result<(f64, f64)> {
    if !snap.same_domain(reference) {
        bail!("mismatched domains between solution and reference");
    }
    Ok(errors_against(snap, |x, y| reference.eval_at(x, y)))
}

/// One row of a convergence table.
#[derive(Debug, Clone)]
pub struct TableRow {
    /// Mesh resolution (`n` for an `n x n` mesh) or CFL number.
    pub label: f64,
    pub l2_error: f64,
    pub l2_order: Option<f64>,
    pub linf_error: f64,
    pub linf_order: Option<f64>,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Rows are mesh resolutions; order is measured against `h`.
    Mesh,
    /// Rows are CFL numbers at a fixed mesh; order is measured against `dt`.
    Cfl,
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub kind: SweepKind,
    pub rows: Vec<TableRow>,
}

/// Assemble a table from `(label, l2, linf, cpu)` entries; orders are
/// computed between adjacent rows and the first row is blank.
pub fn convergence_table(kind: SweepKind, entries: &[(f64, f64, f64, f64)]) -> ResultTable {
    let mut rows = Vec::with_capacity(entries.len());
    for (i, &(label, l2, linf, cpu)) in entries.iter().enumerate() {
        let order = |prev: f64, cur: f64, prev_label: f64| -> Option<f64> {
            if prev <= 0.0 || cur <= 0.0 {
                return None;
            }
            let ratio = match kind {
                SweepKind::Mesh => label / prev_label,
                SweepKind::Cfl => label / prev_label,
            };
            if ratio <= 1.0 {
                return None;
            }
            Some(match kind {
                // error ~ h^p = (1/n)^p
                SweepKind::Mesh => (prev / cur).ln() / ratio.ln(),
                // error ~ dt^p ~ CFL^p at fixed mesh
                SweepKind::Cfl => (cur / prev).ln() / ratio.ln(),
            })
        };
        let (l2_order, linf_order) = if i == 0 {
            (None, None)
        } else {
            let p = &entries[i - 1];
            (order(p.1, l2, p.0), order(p.2, linf, p.0))
        };
        rows.push(TableRow {
            label,
            l2_error: l2,
            l2_order,
            linf_error: linf,
            linf_order,
            cpu_seconds: cpu,
        });
    }
    ResultTable { kind, rows }
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "mesh_or_cfl,l2_error,l2_order,linf_error,linf_order,cpu_seconds\n",
        );
        for r in &self.rows {
            let ord = |o: Option<f64>| o.map(|v| format!("{v:.16e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.16e},{},{:.16e},{},{:.16e}",
                r.label,
                r.l2_error,
                ord(r.l2_order),
                r.linf_error,
                ord(r.linf_order),
                r.cpu_seconds
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).with_context(|| format!("writing {}", path.display()))
    }

    /// Human-readable table for the terminal.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let label = match self.kind {
            SweepKind::Mesh => "mesh",
            SweepKind::Cfl => "CFL",
        };
        writeln!(
            out,
            "{label:>8}  {:>12}  {:>6}  {:>12}  {:>6}  {:>8}",
            "L2 error", "order", "Linf error", "order", "cpu (s)"
        )
        .unwrap();
        for r in &self.rows {
            let ord = |o: Option<f64>| o.map(|v| format!("{v:6.2}")).unwrap_or("    --".into());
            writeln!(
                out,
                "{:>8}  {:>12.4e}  {}  {:>12.4e}  {}  {:>8.2}",
                r.label,
                r.l2_error,
                ord(r.l2_order),
                r.linf_error,
                ord(r.linf_order),
                r.cpu_seconds
            )
            .unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_orders_from_synthetic_errors() {
        // e(h) = h^3 sampled at four meshes gives order 3 everywhere
        let entries: Vec<(f64, f64, f64, f64)> = [10.0f64, 20.0, 40.0, 80.0]
            .iter()
            .map(|&n| (n, (1.0 / n).powi(3), (1.0 / n).powi(3), 0.0))
            .collect();
        let t = convergence_table(SweepKind::Mesh, &entries);
        assert!(t.rows[0].l2_order.is_none());
        for r in &t.rows[1..] {
            assert!((r.l2_order.unwrap() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn simple_error_pair_order_two() {
        let entries = [(20.0, 4e-3, 4e-3, 0.0), (40.0, 1e-3, 1e-3, 0.0)];
        let t = convergence_table(SweepKind::Mesh, &entries);
        assert!((t.rows[1].l2_order.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cfl_orders_match_paper_formula() {
        // temporal order between CFL 5 and 10 with errors 2.06e-4, 8.16e-4
        let entries = [(5.0, 2.06e-4, 0.0, 0.0), (10.0, 8.16e-4, 0.0, 0.0)];
        let t = convergence_table(SweepKind::Cfl, &entries);
        let o = t.rows[1].l2_order.unwrap();
        assert!((o - 1.99).abs() < 0.01, "order {o}");
    }

    #[test]
    fn orders_are_scale_invariant() {
        let entries = [(20.0, 3e-2, 5e-2, 0.0), (40.0, 9e-3, 1.2e-2, 0.0), (80.0, 2e-3, 3e-3, 0.0)];
        let scaled: Vec<_> = entries
            .iter()
            .map(|&(n, a, b, c)| (n, 7.3 * a, 7.3 * b, c))
            .collect();
        let t1 = convergence_table(SweepKind::Mesh, &entries);
        let t2 = convergence_table(SweepKind::Mesh, &scaled);
        for (a, b) in t1.rows.iter().zip(&t2.rows) {
            match (a.l2_order, b.l2_order) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
                (None, None) => {}
                _ => panic!("order presence must match"),
            }
        }
    }

    #[test]
    fn zero_error_rows_leave_order_blank() {
        let entries = [(20.0, 1e-3, 1e-3, 0.0), (40.0, 0.0, 0.0, 0.0)];
        let t = convergence_table(SweepKind::Mesh, &entries);
        assert!(t.rows[1].l2_order.is_none());
    }
}
