//! Body-fitted polar discretization of the n = 2 torsion problem
//! (Delta u = 1, u = 0 on the boundary).
//!
//! The map r = s rho(theta) pulls the body back to the fixed annulus-free
//! rectangle (s, theta) in (0, 1] x S^1, where the Laplacian becomes
//!
//!   rho^2 Delta u = A U_ss + (B / s) U_{s theta} + (1 / s^2) U_{theta theta}
//!                 + (D / s) U_s,
//!   A = 1 + (rho'/rho)^2,  B = -2 rho'/rho,  D = 1 - rho''/rho + 2 (rho'/rho)^2.
//!
//! Every coefficient is a pointwise function of theta, so a rotationally
//! symmetric body yields an exactly theta-independent discrete solution: balls
//! are fixed points of the flow to roundoff, not merely to truncation error.
//! The ray crossing s = 0 is continued antipodally (U(-s, theta) =
//! U(s, theta + pi)); the boundary row uses one-sided stencils against
//! u(1, theta) = 0.

use std::f64::consts::PI;

use crate::body::Body;
use crate::error::{Error, Result};
use crate::sphere::fornberg_weights;

use super::linsolve::{bicgstab, Csr};

#[derive(Debug, Clone)]
pub struct PolarSolution {
    pub layers: usize,
    pub ntheta: usize,
    /// Unknowns, s-major: u[j * ntheta + i] at s_j = (j + 1/2)/layers.
    pub u: Vec<f64>,
    pub g_radial: Vec<f64>,
    pub linear_iterations: usize,
}

pub struct PolarOutput {
    pub solution: PolarSolution,
    pub g_support: Vec<f64>,
    pub u_min: f64,
    pub neg_u_integral: f64,
    pub residual: f64,
}

pub fn solve_poisson_polar(body: &Body, layers: usize, warm: Option<&[f64]>) -> Result<PolarOutput> {
    if body.dimension() != 2 {
        return Err(Error::Config("polar torsion backend is n = 2 only".into()));
    }
    if layers < 8 {
        return Err(Error::Config(format!("polar backend needs at least 8 layers, got {layers}")));
    }
    let grid = body.grid().clone();
    let n = grid.len();
    let half = n / 2;
    let ds = 1.0 / layers as f64;
    let dtheta = 2.0 * PI / n as f64;

    let rho_series = body
        .radial()
        .series()
        .ok_or_else(|| Error::Config("polar backend needs a circle grid".into()))?;
    let thetas = grid.thetas().unwrap();
    let mut rho = Vec::with_capacity(n);
    let mut coef_a = Vec::with_capacity(n);
    let mut coef_b = Vec::with_capacity(n);
    let mut coef_d = Vec::with_capacity(n);
    for &t in thetas {
        let r = rho_series.eval(t);
        let rp = rho_series.eval_deriv(t);
        let rpp = rho_series.eval_second(t);
        let q = rp / r;
        rho.push(r);
        coef_a.push(1.0 + q * q);
        coef_b.push(-2.0 * q);
        coef_d.push(1.0 - rpp / r + 2.0 * q * q);
    }

    let unknowns = layers * n;
    let s_of = |j: usize| (j as f64 + 0.5) * ds;
    let idx = |j: usize, i: usize| (j * n + i) as u32;

    // One-sided stencils at the boundary row against u(1) = 0.
    let j_last = layers - 1;
    let bpts = [s_of(j_last) - ds, s_of(j_last), 1.0];
    let bw = fornberg_weights(s_of(j_last), &bpts, 2);

    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(unknowns);
    let mut rhs = Vec::with_capacity(unknowns);
    for j in 0..layers {
        let s = s_of(j);
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            let a = coef_a[i];
            let b = coef_b[i];
            let d = coef_d[i];
            let mut row: Vec<(u32, f64)> = Vec::with_capacity(10);

            // Radial column references with antipodal continuation at j = 0.
            let below = |col: usize| -> (u32, bool) {
                if j == 0 {
                    (idx(0, (col + half) % n), true)
                } else {
                    (idx(j - 1, col), true)
                }
            };

            if j < j_last {
                // Centered U_ss and U_s.
                let c_ss = a / (ds * ds);
                let c_s = d / (s * 2.0 * ds);
                row.push((idx(j, i), -2.0 * c_ss));
                row.push((idx(j + 1, i), c_ss + c_s));
                let (bidx, _) = below(i);
                row.push((bidx, c_ss - c_s));
            } else {
                // Boundary row: non-uniform 3-point stencils, zero boundary value
                // (bw[.][2] multiplies u(1) = 0).
                let c2 = a;
                let c1 = d / s;
                row.push((idx(j_last - 1, i), c2 * bw[2][0] + c1 * bw[1][0]));
                row.push((idx(j_last, i), c2 * bw[2][1] + c1 * bw[1][1]));
            }

            // U_theta_theta.
            let c_tt = 1.0 / (s * s * dtheta * dtheta);
            row.push((idx(j, ip), c_tt));
            row.push((idx(j, im), c_tt));
            row.push((idx(j, i), -2.0 * c_tt));

            // Mixed U_{s theta}.
            if b != 0.0 {
                let c_m = b / (s * 4.0 * ds * dtheta);
                if j < j_last {
                    row.push((idx(j + 1, ip), c_m));
                    row.push((idx(j + 1, im), -c_m));
                    let (bp, _) = if j == 0 { (idx(0, (ip + half) % n), true) } else { (idx(j - 1, ip), true) };
                    let (bm, _) = if j == 0 { (idx(0, (im + half) % n), true) } else { (idx(j - 1, im), true) };
                    row.push((bp, -c_m));
                    row.push((bm, c_m));
                } else {
                    // d/ds of U_theta by the boundary stencil; U_theta(1) = 0.
                    let c_m = b / (s * 2.0 * dtheta);
                    for (lvl, w) in [(j_last - 1, bw[1][0]), (j_last, bw[1][1])] {
                        row.push((idx(lvl, ip), c_m * w));
                        row.push((idx(lvl, im), -c_m * w));
                    }
                }
            }

            rows.push(row);
            rhs.push(rho[i] * rho[i]);
        }
    }

    let matrix = Csr::from_rows(unknowns, rows);
    let (u, stats) = bicgstab(&matrix, &rhs, warm, 1e-11, 200_000)?;

    // Residual of the discrete operator.
    let mut lu = vec![0.0; unknowns];
    matrix.matvec(&u, &mut lu);
    let mut res: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..unknowns {
        res = res.max((lu[i] - rhs[i]).abs());
        scale = scale.max(rhs[i].abs());
    }
    let residual = res / scale;

    // Boundary gradient per radial node: |Du| = U_s(1) sqrt(A)/rho, with the
    // one-sided derivative expanded at s = 1 itself.
    let bw_edge = fornberg_weights(1.0, &bpts, 1);
    let mut g_radial = Vec::with_capacity(n);
    for i in 0..n {
        let us = bw_edge[1][0] * u[(j_last - 1) * n + i] + bw_edge[1][1] * u[j_last * n + i];
        g_radial.push(us.abs() * coef_a[i].sqrt() / rho[i]);
    }

    // Compose onto support nodes: sample at the polar angle of X(x).
    let g_series = grid
        .trig_series(&g_radial)
        .expect("circle grid has trig series");
    let mut g_support = Vec::with_capacity(n);
    for i in 0..n {
        let bp = body.boundary()[i];
        g_support.push(g_series.eval(bp[1].atan2(bp[0])));
    }

    let mut u_min = f64::INFINITY;
    for &v in &u {
        u_min = u_min.min(v);
    }
    let mut neg_int = 0.0;
    for j in 0..layers {
        let s = s_of(j);
        for i in 0..n {
            neg_int -= u[j * n + i] * s * rho[i] * rho[i] * ds * dtheta;
        }
    }

    Ok(PolarOutput {
        solution: PolarSolution {
            layers,
            ntheta: n,
            u,
            g_radial,
            linear_iterations: stats.iterations,
        },
        g_support,
        u_min,
        neg_u_integral: neg_int,
        residual,
    })
}

