//! Compressed sparse rows and a Jacobi-preconditioned BiCGStab solver.
//!
//! The cut-cell stencils are not symmetric, so a nonsymmetric Krylov method is
//! used everywhere. Iteration order is fixed and single-threaded; identical
//! inputs reproduce identical solutions bit-for-bit.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds a matrix from per-row (column, value) lists; duplicate columns
    /// accumulate.
    pub fn from_rows(n: usize, mut rows: Vec<Vec<(u32, f64)>>) -> Csr {
        assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = row[i].1;
                let mut j = i + 1;
                while j < row.len() && row[j].0 == c {
                    v += row[j].1;
                    j += 1;
                }
                cols.push(c);
                vals.push(v);
                i = j;
            }
            row_ptr.push(cols.len());
        }
        Csr { n, row_ptr, cols, vals }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] as usize == r {
                    d[r] = self.vals[k];
                }
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// BiCGStab with Jacobi (diagonal) preconditioning.
pub fn bicgstab(
    a: &Csr,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n;
    let inv_d: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 })
        .collect();

    let bnorm = norm(b).max(1e-300);
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm(&r) / bnorm <= tol {
        return Ok((x, SolveStats { iterations: 0, rel_residual: norm(&r) / bnorm }));
    }

    let mut r_hat = r.clone();
    let mut rho_old = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];

    for it in 1..=max_iter {
        let mut rho = dot(&r_hat, &r);
        if rho.abs() < 1e-290 {
            // Restart with the current residual.
            r_hat.copy_from_slice(&r);
            rho = dot(&r, &r);
            omega = 1.0;
            alpha = 1.0;
            for e in v.iter_mut() {
                *e = 0.0;
            }
            for e in p.iter_mut() {
                *e = 0.0;
            }
        }
        let beta = (rho / rho_old) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        for i in 0..n {
            p_hat[i] = p[i] * inv_d[i];
        }
        a.matvec(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < 1e-290 {
            return Err(Error::Solver("bicgstab breakdown (r_hat . v)".into(), norm(&r) / bnorm));
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            a.matvec(&x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            return Ok((x, SolveStats { iterations: it, rel_residual: norm(&r) / bnorm }));
        }
        for i in 0..n {
            s_hat[i] = s[i] * inv_d[i];
        }
        a.matvec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt.abs() < 1e-290 {
            return Err(Error::Solver("bicgstab breakdown (t . t)".into(), norm(&s) / bnorm));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
        }
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok((x, SolveStats { iterations: it, rel_residual: rel }));
        }
        rho_old = rho;
    }
    Err(Error::Solver(
        format!("bicgstab did not converge in {max_iter} iterations"),
        norm(&r) / bnorm,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        // 1D convection-diffusion style tridiagonal.
        let n = 50;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = vec![(i as u32, 2.2)];
            if i > 0 {
                row.push(((i - 1) as u32, -1.1));
            }
            if i + 1 < n {
                row.push(((i + 1) as u32, -0.9));
            }
            rows.push(row);
        }
        let a = Csr::from_rows(n, rows);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&x_true, &mut b);
        let (x, stats) = bicgstab(&a, &b, None, 1e-12, 1000).unwrap();
        assert!(stats.rel_residual <= 1e-12);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-9);
        }
    }
}
