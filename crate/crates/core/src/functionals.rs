//! Scalar functionals and measures of a convex body under its torsion
//! solution: the torsional rigidity in its boundary (normal-parameter) and
//! radial-parameter forms, the dual rigidities, the dual torsional measure
//! over partitions of the normal sphere, the flow normalization eta, the
//! entropy functional Phi, and the cone-volume (Crofton) consistency audit.
//!
//! Conventions: all radial-parameter integrals run over the body's grid nodes
//! in the radial parameterization, with |Du| at the radial boundary points
//! taken from the solution's native samples when present and otherwise
//! composed with the Gauss-map table (one PDE solve per body).

use crate::body::{Body, Partition, SigmaConvention, SupportField};
use crate::error::{Error, Result};
use crate::la::{normalize, scale, Vec3};
use crate::sphere::SphereGrid;
use crate::torsion::TorsionSolution;

/// Normalized power: b^a / a for a != 0, log b for a = 0.
pub fn normalized_pow(b: f64, a: f64) -> f64 {
    if a == 0.0 {
        b.ln()
    } else {
        b.powf(a) / a
    }
}

/// Shared per-radial-node samples for the dual integrals.
struct RadialSamples {
    rho: Vec<f64>,
    g: Vec<f64>,
    w: Vec<f64>,
}

fn radial_samples(body: &Body, sol: &TorsionSolution) -> RadialSamples {
    RadialSamples {
        rho: body.radial().values().to_vec(),
        g: sol.g_on_radial_nodes(body),
        w: body.grid().weights().to_vec(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Rigidity {
    pub t_tilde: f64,
    pub t: f64,
}

/// T~_k via the boundary form (1/(k(n+2))) \int h g^{k+1} sigma_{n-k} dx,
/// with sigma under the body's convention; T_k = T~_k^k.
pub fn rigidity_tk(body: &Body, sol: &TorsionSolution, k: usize) -> Result<Rigidity> {
    let n = body.dimension();
    let sigma = body.sigma(k)?;
    let h = body.support().values();
    let w = body.grid().weights();
    let mut acc = 0.0;
    for i in 0..h.len() {
        acc += h[i] * sol.g_support[i].powi(k as i32 + 1) * sigma[i] * w[i];
    }
    let t_tilde = acc / (k as f64 * (n as f64 + 2.0));
    Ok(Rigidity { t_tilde, t: t_tilde.powi(k as i32) })
}

/// T~_k via the radial form (1/(k(n+2))) \int rho^{n+1-k} |Du|^{k+1} dv.
/// Coincides with `rigidity_tk` for k = 1; for k >= 2 the two differ by
/// binomial factors depending on the sigma convention (see `crofton_audit`).
pub fn rigidity_dual_form(body: &Body, sol: &TorsionSolution, k: usize) -> f64 {
    let n = body.dimension() as f64;
    let s = radial_samples(body, sol);
    let mut acc = 0.0;
    for j in 0..s.rho.len() {
        acc += s.rho[j].powf(n + 1.0 - k as f64) * s.g[j].powi(k as i32 + 1) * s.w[j];
    }
    acc / (k as f64 * (n + 2.0))
}

/// Dual k-torsional rigidity: (1/(n-p)) \int rho^{p+1-k} |Du|^{k+1} dv for
/// p != n, and the log branch \int log(rho) rho^{n+1-k} |Du|^{k+1} dv at p = n.
pub fn dual_rigidity_q(body: &Body, sol: &TorsionSolution, k: usize, p: f64) -> f64 {
    let n = body.dimension() as f64;
    let s = radial_samples(body, sol);
    let mut acc = 0.0;
    if p == n {
        for j in 0..s.rho.len() {
            acc += s.rho[j].ln()
                * s.rho[j].powf(n + 1.0 - k as f64)
                * s.g[j].powi(k as i32 + 1)
                * s.w[j];
        }
        acc
    } else {
        for j in 0..s.rho.len() {
            acc += s.rho[j].powf(p + 1.0 - k as f64) * s.g[j].powi(k as i32 + 1) * s.w[j];
        }
        acc / (n - p)
    }
}

/// Mixed dual rigidity \int rho_2^{\bar p} rho_1^{n+1-k-p} |Du_1|^{k+1} dv
/// with the normalized-power rule in the first factor. Both bodies must share
/// a grid; the torsion solution belongs to `body1`.
pub fn mixed_dual_rigidity(
    body1: &Body,
    body2: &Body,
    sol1: &TorsionSolution,
    k: usize,
    p: f64,
) -> Result<f64> {
    same_grid(body1, body2)?;
    let n = body1.dimension() as f64;
    let s = radial_samples(body1, sol1);
    let rho2 = body2.radial().values();
    let mut acc = 0.0;
    for j in 0..s.rho.len() {
        acc += normalized_pow(rho2[j], p)
            * s.rho[j].powf(n + 1.0 - k as f64 - p)
            * s.g[j].powi(k as i32 + 1)
            * s.w[j];
    }
    Ok(acc)
}

fn same_grid(a: &Body, b: &Body) -> Result<()> {
    if a.grid().spec() != b.grid().spec() {
        return Err(Error::Config("bodies must share a sphere grid".into()));
    }
    Ok(())
}

/// One part of a dual torsional measure.
#[derive(Debug, Clone)]
pub struct MeasureEntry {
    /// Index into the partition's regions; the last index is the complement.
    pub region: usize,
    /// Total quadrature weight (solid angle) of the radial nodes assigned here.
    pub solid_angle: f64,
    pub mass: f64,
}

/// Dual torsional measure evaluated over a partition of the normal sphere.
#[derive(Debug, Clone)]
pub struct DualMeasure {
    pub k: usize,
    pub p: f64,
    pub entries: Vec<MeasureEntry>,
    pub total: f64,
}

/// Masses mass(eta) = (1/(n-p)) sum over v with alpha(v) in eta of
/// rho^{p+1-k} |Du|^{k+1} w_v. Only p != n carries a measure.
pub fn dual_measure(
    body: &Body,
    sol: &TorsionSolution,
    k: usize,
    p: f64,
    partition: &Partition,
) -> Result<DualMeasure> {
    let n = body.dimension() as f64;
    if p == n {
        return Err(Error::Config(
            "the dual torsional measure is defined for p \u{2260} n only".into(),
        ));
    }
    let s = radial_samples(body, sol);
    let parts = partition.part_count();
    let mut entries: Vec<MeasureEntry> = (0..parts)
        .map(|region| MeasureEntry { region, solid_angle: 0.0, mass: 0.0 })
        .collect();
    for (j, gs) in body.gauss().iter().enumerate() {
        let region = partition.assign(&gs.alpha);
        let contrib =
            s.rho[j].powf(p + 1.0 - k as f64) * s.g[j].powi(k as i32 + 1) * s.w[j] / (n - p);
        entries[region].solid_angle += s.w[j];
        entries[region].mass += contrib;
    }
    let total = entries.iter().map(|e| e.mass).sum();
    Ok(DualMeasure { k, p, entries, total })
}

/// Atoms of the dual torsional measure of a polytope: one mass per facet
/// normal, integrating the radial density over the facet's normal-fan cone.
pub fn polytope_atoms(
    body: &Body,
    sol: &TorsionSolution,
    k: usize,
    p: f64,
) -> Result<Vec<(Vec3, f64)>> {
    let partition = Partition::facet_caps(body)?;
    let normals: Vec<Vec3> = match body.geometry() {
        crate::body::Geometry::Polygon(poly) => poly.facet_normals.clone(),
        crate::body::Geometry::Smooth => unreachable!(),
    };
    let measure = dual_measure(body, sol, k, p, &partition)?;
    let mut atoms = Vec::with_capacity(normals.len());
    for (i, nrm) in normals.iter().enumerate() {
        atoms.push((*nrm, measure.entries[i].mass));
    }
    Ok(atoms)
}

/// Evaluates both sides of the pushforward identity for a test function on
/// the normal sphere: the measure side (partition refinement into `bins`
/// angular bins with mass-weighted representatives) against the radial side
/// (1/(n-p)) \int g_fn(alpha(v)) rho^{p+1-k} |Du|^{k+1} dv.
pub fn pushforward_integral(
    g_fn: &dyn Fn(&Vec3) -> f64,
    body: &Body,
    sol: &TorsionSolution,
    k: usize,
    p: f64,
    bins: usize,
) -> Result<(f64, f64)> {
    let n = body.dimension() as f64;
    if p == n {
        return Err(Error::Config(
            "the pushforward identity is stated for p \u{2260} n only".into(),
        ));
    }
    let s = radial_samples(body, sol);

    let two_pi = 2.0 * std::f64::consts::PI;
    let bin_of = |alpha: &Vec3| -> usize {
        if body.dimension() == 2 {
            let a = alpha[1].atan2(alpha[0]).rem_euclid(two_pi);
            ((a / two_pi * bins as f64) as usize).min(bins - 1)
        } else {
            let bands = bins;
            let sectors = 2 * bins;
            let zb = (((alpha[2] + 1.0) / 2.0 * bands as f64) as usize).min(bands - 1);
            let a = alpha[1].atan2(alpha[0]).rem_euclid(two_pi);
            let sb = ((a / two_pi * sectors as f64) as usize).min(sectors - 1);
            zb * sectors + sb
        }
    };
    let nbins = if body.dimension() == 2 { bins } else { bins * 2 * bins };
    let mut mass = vec![0.0; nbins];
    let mut rep = vec![[0.0_f64; 3]; nbins];
    let mut rhs = 0.0;
    for (j, gs) in body.gauss().iter().enumerate() {
        let contrib =
            s.rho[j].powf(p + 1.0 - k as f64) * s.g[j].powi(k as i32 + 1) * s.w[j] / (n - p);
        rhs += g_fn(&gs.alpha) * contrib;
        let b = bin_of(&gs.alpha);
        mass[b] += contrib;
        rep[b] = crate::la::add(&rep[b], &scale(&gs.alpha, contrib.abs().max(1e-300)));
    }
    let mut lhs = 0.0;
    for b in 0..nbins {
        if mass[b] != 0.0 {
            let r = normalize(&rep[b]);
            lhs += g_fn(&r) * mass[b];
        }
    }
    Ok((lhs, rhs))
}

/// Integral of a test function against the dual torsional measure, evaluated
/// directly in the radial parameterization:
/// (1/(n-p)) \int g_fn(alpha(v)) rho^{p+1-k} |Du|^{k+1} dv.
pub fn measure_integral(
    g_fn: &dyn Fn(&Vec3) -> f64,
    body: &Body,
    sol: &TorsionSolution,
    k: usize,
    p: f64,
) -> Result<f64> {
    let n = body.dimension() as f64;
    if p == n {
        return Err(Error::Config(
            "the dual torsional measure is defined for p \u{2260} n only".into(),
        ));
    }
    let s = radial_samples(body, sol);
    let mut acc = 0.0;
    for (j, gs) in body.gauss().iter().enumerate() {
        acc += g_fn(&gs.alpha)
            * s.rho[j].powf(p + 1.0 - k as f64)
            * s.g[j].powi(k as i32 + 1)
            * s.w[j];
    }
    Ok(acc / (n - p))
}

/// Total mass of the two-body mixed dual measure
/// (1/(n-p)) \int rho_1^{n-p} rho_3^{p+1-k} |Du_1|^{k+1} dv.
pub fn mixed_measure_total(
    body1: &Body,
    body3: &Body,
    sol1: &TorsionSolution,
    k: usize,
    p: f64,
) -> Result<f64> {
    mixed_measure_integral(&|_| 1.0, body1, body3, sol1, k, p)
}

/// Integral of a test function against the two-body mixed dual measure.
pub fn mixed_measure_integral(
    g_fn: &dyn Fn(&Vec3) -> f64,
    body1: &Body,
    body3: &Body,
    sol1: &TorsionSolution,
    k: usize,
    p: f64,
) -> Result<f64> {
    same_grid(body1, body3)?;
    let n = body1.dimension() as f64;
    if p == n {
        return Err(Error::Config(
            "the mixed dual measure is defined for p \u{2260} n only".into(),
        ));
    }
    let s = radial_samples(body1, sol1);
    let rho3 = body3.radial().values();
    let mut acc = 0.0;
    for (j, gs) in body1.gauss().iter().enumerate() {
        acc += g_fn(&gs.alpha)
            * s.rho[j].powf(n - p)
            * rho3[j].powf(p + 1.0 - k as f64)
            * s.g[j].powi(k as i32 + 1)
            * s.w[j];
    }
    Ok(acc / (n - p))
}

/// Flow normalization eta = \int rho^{p+1-k} |Du|^{k+1} dv / \int f dx.
pub fn eta(body: &Body, sol: &TorsionSolution, f: &[f64], k: usize, p: f64) -> f64 {
    let s = radial_samples(body, sol);
    let mut num = 0.0;
    for j in 0..s.rho.len() {
        num += s.rho[j].powf(p + 1.0 - k as f64) * s.g[j].powi(k as i32 + 1) * s.w[j];
    }
    num / body.grid().integrate(f)
}

/// Entropy functional Phi = \int f log h dx. Positivity of h is validated so
/// the logarithm is well-defined.
pub fn phi(grid: &SphereGrid, h: &[f64], f: &[f64]) -> Result<f64> {
    if h.len() != grid.len() || f.len() != grid.len() {
        return Err(Error::Validation("phi: field length mismatch".into()));
    }
    let mut acc = 0.0;
    for i in 0..h.len() {
        if !(h[i] > 0.0) {
            return Err(Error::Validation(format!(
                "phi: support value must be positive, got {} at node {i}",
                h[i]
            )));
        }
        acc += f[i] * h[i].ln() * grid.weights()[i];
    }
    Ok(acc)
}

pub fn phi_of_support(support: &SupportField, f: &[f64]) -> Result<f64> {
    phi(support.grid(), support.values(), f)
}

/// Relative discrepancy of the cone-volume identity
/// \int rho^{n+1-k} dv = \int h sigma_{n-k} dx under both sigma conventions.
#[derive(Debug, Clone, Copy)]
pub struct CroftonAudit {
    pub lhs_radial: f64,
    pub rhs_elementary: f64,
    pub rhs_mean: f64,
    pub rel_elementary: f64,
    pub rel_mean: f64,
}

pub fn crofton_audit(body: &Body, k: usize) -> Result<CroftonAudit> {
    let n = body.dimension() as f64;
    let w = body.grid().weights();
    let rho = body.radial().values();
    let mut lhs = 0.0;
    for j in 0..rho.len() {
        lhs += rho[j].powf(n + 1.0 - k as f64) * w[j];
    }
    let h = body.support().values();
    let sig_e = crate::body::curvature_sigma(body.support(), k, SigmaConvention::Elementary)?;
    let sig_m = crate::body::curvature_sigma(body.support(), k, SigmaConvention::Mean)?;
    let mut rhs_e = 0.0;
    let mut rhs_m = 0.0;
    for i in 0..h.len() {
        rhs_e += h[i] * sig_e[i] * w[i];
        rhs_m += h[i] * sig_m[i] * w[i];
    }
    Ok(CroftonAudit {
        lhs_radial: lhs,
        rhs_elementary: rhs_e,
        rhs_mean: rhs_m,
        rel_elementary: (lhs - rhs_e).abs() / lhs,
        rel_mean: (lhs - rhs_m).abs() / lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{Body, Partition, Region, SigmaConvention};
    use crate::sphere::SphereGrid;
    use crate::torsion::{solve_khessian, solve_poisson_polar};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn rel_close(a: f64, b: f64, tol: f64) {
        assert!(
            ((a - b) / b).abs() <= tol,
            "expected {b} within {tol:.2e} relative, got {a}"
        );
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    fn circle(n: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::circle(n).unwrap())
    }

    fn sphere(nlat: usize, nlon: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::lat_lon(nlat, nlon).unwrap())
    }

    #[test]
    fn normalized_power_rule() {
        close(normalized_pow(2.0, 3.0), 8.0 / 3.0, 1e-15);
        close(normalized_pow(2.0, 0.0), 2.0_f64.ln(), 1e-15);
        // Continuity up to the additive constant: (b^a - 1)/a -> log b.
        let b = 1.7_f64;
        let mut prev = f64::INFINITY;
        for a in [1e-2, 1e-4, 1e-6] {
            let diff = ((b.powf(a) - 1.0) / a - b.ln()).abs();
            assert!(diff < prev);
            prev = diff;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn disk_rigidities() {
        let grid = circle(128);
        let disk = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let sol = solve_poisson_polar(&disk, 96, None).unwrap();
        let rig = rigidity_tk(&disk, &sol, 1).unwrap();
        rel_close(rig.t_tilde, PI / 8.0, 1e-3);
        rel_close(rig.t, PI / 8.0, 1e-3);
        rel_close(rigidity_dual_form(&disk, &sol, 1), PI / 8.0, 1e-3);
        rel_close(sol.neg_u_integral, PI / 8.0, 1e-3);

        // Homogeneity degree n+2 of T~.
        let disk2 = Body::ball(grid.clone(), 2.0, SigmaConvention::Elementary).unwrap();
        let sol2 = solve_poisson_polar(&disk2, 96, None).unwrap();
        let rig2 = rigidity_tk(&disk2, &sol2, 1).unwrap();
        rel_close(rig2.t_tilde, 2.0 * PI, 1e-3);
    }

    #[test]
    fn ellipse_rigidity() {
        let grid = circle(128);
        let ell = Body::ellipse(grid.clone(), 2.0, 1.0, SigmaConvention::Elementary).unwrap();
        let sol = solve_khessian(&ell, 1, 160).unwrap();
        let rig = rigidity_tk(&ell, &sol, 1).unwrap();
        rel_close(rig.t_tilde, 2.0 * PI / 5.0, 1e-2);
        rel_close(sol.neg_u_integral, 2.0 * PI / 5.0, 1e-2);
        rel_close(rigidity_dual_form(&ell, &sol, 1), 2.0 * PI / 5.0, 1e-2);
    }

    #[test]
    fn ball3_k2_dual_vs_boundary_form() {
        let grid = sphere(16, 32);
        let ball = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let sol = solve_khessian(&ball, 2, 40).unwrap();
        let dual = rigidity_dual_form(&ball, &sol, 2);
        rel_close(dual, 2.0 * PI / (15.0 * 3.0_f64.sqrt()), 5e-2);
        let rig = rigidity_tk(&ball, &sol, 2).unwrap();
        rel_close(rig.t_tilde, 4.0 * PI / (15.0 * 3.0_f64.sqrt()), 5e-2);
        rel_close(rig.t_tilde / dual, 2.0, 1e-6);
        // Pohozaev under the elementary convention on balls.
        rel_close(sol.neg_u_integral, rig.t_tilde, 2e-2);
    }

    #[test]
    fn dual_rigidity_disk() {
        let grid = circle(128);
        let disk = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let sol = solve_poisson_polar(&disk, 96, None).unwrap();
        rel_close(dual_rigidity_q(&disk, &sol, 1, -1.0), PI / 6.0, 1e-3);
        // p = n log branch vanishes on the unit disk.
        close(dual_rigidity_q(&disk, &sol, 1, 2.0), 0.0, 1e-10);

        // Scaling degree p + 2.
        let disk_r = Body::ball(grid.clone(), 1.7, SigmaConvention::Elementary).unwrap();
        let sol_r = solve_poisson_polar(&disk_r, 96, None).unwrap();
        rel_close(dual_rigidity_q(&disk_r, &sol_r, 1, -1.0), PI / 6.0 * 1.7, 1e-3);
    }

    #[test]
    fn mixed_rigidity_examples() {
        let grid = circle(128);
        let disk = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let sol = solve_poisson_polar(&disk, 96, None).unwrap();
        let q11 = mixed_dual_rigidity(&disk, &disk, &sol, 1, 1.0).unwrap();
        rel_close(q11, PI / 2.0, 1e-3);
        // T~ = (p/(k(n+2))) Q~_k at p = 1.
        let rig = rigidity_tk(&disk, &sol, 1).unwrap();
        rel_close(0.25 * q11, rig.t_tilde, 1e-3);

        let ball2 = Body::ball(grid.clone(), 2.0, SigmaConvention::Elementary).unwrap();
        let q = mixed_dual_rigidity(&disk, &ball2, &sol, 1, 2.0).unwrap();
        rel_close(q, PI, 1e-3);

        let ball_e =
            Body::ball(grid.clone(), std::f64::consts::E, SigmaConvention::Elementary).unwrap();
        let q0 = mixed_dual_rigidity(&disk, &ball_e, &sol, 1, 0.0).unwrap();
        rel_close(q0, PI / 2.0, 1e-3);
    }

    #[test]
    fn eta_examples() {
        let grid = circle(128);
        let f = vec![1.0; grid.len()];
        for r in [1.0, 1.6] {
            let disk = Body::ball(grid.clone(), r, SigmaConvention::Elementary).unwrap();
            let sol = solve_poisson_polar(&disk, 96, None).unwrap();
            rel_close(eta(&disk, &sol, &f, 1, -1.0), r / 4.0, 1e-3);
            // Doubling f halves eta.
            let f2 = vec![2.0; grid.len()];
            rel_close(eta(&disk, &sol, &f2, 1, -1.0), r / 8.0, 1e-3);
        }

        let g3 = sphere(16, 32);
        let ball = Body::ball(g3.clone(), 1.0, SigmaConvention::Mean).unwrap();
        let sol = solve_khessian(&ball, 2, 40).unwrap();
        let f3 = vec![1.0; g3.len()];
        rel_close(eta(&ball, &sol, &f3, 2, 0.0), 3.0_f64.powf(-1.5), 2e-2);
    }

    #[test]
    fn phi_examples() {
        let g2 = circle(64);
        let f = vec![1.0; g2.len()];
        close(phi(&g2, &vec![1.0; g2.len()], &f).unwrap(), 0.0, 1e-12);
        let r = 2.5;
        rel_close(phi(&g2, &vec![r; g2.len()], &f).unwrap(), 2.0 * PI * r.ln(), 1e-12);
        let g3 = sphere(16, 32);
        let f3 = vec![1.0; g3.len()];
        rel_close(phi(&g3, &vec![r; g3.len()], &f3).unwrap(), 4.0 * PI * r.ln(), 1e-10);
        // Scaling shift: Phi(lambda K) = Phi(K) + log(lambda) \int f.
        let h: Vec<f64> = g2.nodes().iter().map(|x| 1.0 + 0.2 * x[0]).collect();
        let lam = 1.9;
        let h_scaled: Vec<f64> = h.iter().map(|v| v * lam).collect();
        let p0 = phi(&g2, &h, &f).unwrap();
        let p1 = phi(&g2, &h_scaled, &f).unwrap();
        close(p1 - p0, lam.ln() * 2.0 * PI, 1e-10);
    }

    #[test]
    fn crofton_identity() {
        let grid = circle(256);
        let body = Body::from_support_fn(
            grid,
            |x| {
                let t = x[1].atan2(x[0]);
                1.0 + 0.2 * t.cos() + 0.07 * (3.0 * t).sin()
            },
            SigmaConvention::Elementary,
        )
        .unwrap();
        let audit = crofton_audit(&body, 1).unwrap();
        assert!(audit.rel_elementary < 1e-6, "rel = {:.3e}", audit.rel_elementary);

        let g3 = sphere(24, 48);
        let ball = Body::ball(g3, 1.0, SigmaConvention::Elementary).unwrap();
        let audit = crofton_audit(&ball, 2).unwrap();
        rel_close(audit.rhs_elementary / audit.lhs_radial, 2.0, 1e-6);
        assert!(audit.rel_mean < 1e-6);
    }

    #[test]
    fn measure_additivity_and_symmetry() {
        let grid = circle(128);
        let disk = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let sol = solve_poisson_polar(&disk, 64, None).unwrap();

        let whole = dual_measure(&disk, &sol, 1, -1.0, &Partition::whole_sphere()).unwrap();
        let q = dual_rigidity_q(&disk, &sol, 1, -1.0);
        close(whole.total, q, 1e-12);

        let halves =
            dual_measure(&disk, &sol, 1, -1.0, &Partition::hemispheres([0.0, 1.0, 0.0])).unwrap();
        close(halves.total, q, 1e-12);
        // Hemisphere masses agree up to the two equator nodes.
        rel_close(halves.entries[0].mass, halves.entries[1].mass, 2e-2);

        // Partition refinement keeps the total exactly.
        let bins = dual_measure(&disk, &sol, 1, -1.0, &Partition::angle_bins(37)).unwrap();
        close(bins.total, q, 1e-12);

        // p = n carries no measure.
        assert!(dual_measure(&disk, &sol, 1, 2.0, &Partition::whole_sphere()).is_err());
    }

    #[test]
    fn square_atoms() {
        let grid = circle(256);
        let square = Body::polygon(
            grid.clone(),
            vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
            SigmaConvention::Elementary,
        )
        .unwrap();
        let sol = solve_khessian(&square, 1, 128).unwrap();
        let atoms = polytope_atoms(&square, &sol, 1, -1.0).unwrap();
        assert_eq!(atoms.len(), 4);
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let q = dual_rigidity_q(&square, &sol, 1, -1.0);
        rel_close(total, q, 1e-12);
        let mean = total / 4.0;
        for (_, m) in &atoms {
            rel_close(*m, mean, 5e-3);
        }
    }

    #[test]
    fn pushforward_identity() {
        let grid = circle(256);
        let disk = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let sol = solve_poisson_polar(&disk, 64, None).unwrap();
        let one = |_: &Vec3| 1.0;
        let (lhs, rhs) = pushforward_integral(&one, &disk, &sol, 1, -1.0, 512).unwrap();
        let q = dual_rigidity_q(&disk, &sol, 1, -1.0);
        close(lhs, q, 1e-12);
        close(rhs, q, 1e-12);

        let odd = |x: &Vec3| x[0];
        let (lhs, rhs) = pushforward_integral(&odd, &disk, &sol, 1, -1.0, 512).unwrap();
        close(lhs, 0.0, 1e-10);
        close(rhs, 0.0, 1e-10);

        let ell = Body::ellipse(grid.clone(), 1.3, 0.9, SigmaConvention::Elementary).unwrap();
        let sol_e = solve_poisson_polar(&ell, 96, None).unwrap();
        let wave = |x: &Vec3| {
            let t = x[1].atan2(x[0]);
            (2.0 * t).cos()
        };
        let (lhs, rhs) = pushforward_integral(&wave, &ell, &sol_e, 1, -1.0, 1024).unwrap();
        rel_close(lhs, rhs, 1e-3);
    }

    #[test]
    fn absolute_continuity_proxy() {
        // A region avoiding every facet normal of a polytope picks up zero
        // dual-measure mass, mirroring absolute continuity w.r.t. the area
        // measure, whose polytope version concentrates on facet normals.
        let grid = circle(128);
        let square = Body::polygon(
            grid.clone(),
            vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
            SigmaConvention::Elementary,
        )
        .unwrap();
        let sol = solve_khessian(&square, 1, 96).unwrap();
        let diag = std::f64::consts::FRAC_1_SQRT_2;
        let partition = Partition {
            regions: vec![Region::Cap { axis: [diag, diag, 0.0], min_dot: (0.3_f64).cos() }],
        };
        let m = dual_measure(&square, &sol, 1, -1.0, &partition).unwrap();
        assert_eq!(m.entries[0].mass, 0.0);
        rel_close(m.entries[1].mass, m.total, 1e-12);
    }

    #[test]
    fn weak_convergence_of_measures() {
        let grid = circle(128);
        let base = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let sol0 = solve_poisson_polar(&base, 64, None).unwrap();
        let tests: Vec<Box<dyn Fn(&Vec3) -> f64>> = vec![
            Box::new(|_| 1.0),
            Box::new(|x: &Vec3| x[0]),
            Box::new(|x: &Vec3| x[1]),
            Box::new(|x: &Vec3| x[0] * x[0]),
            Box::new(|x: &Vec3| (3.0 * x[1].atan2(x[0])).sin()),
        ];
        let integral = |body: &Body, sol: &TorsionSolution, gf: &dyn Fn(&Vec3) -> f64| {
            pushforward_integral(gf, body, sol, 1, -1.0, 256).unwrap().1
        };
        let i0: Vec<f64> = tests.iter().map(|g| integral(&base, &sol0, g.as_ref())).collect();
        let mut prev_err = vec![f64::INFINITY; tests.len()];
        for eps in [0.2, 0.1, 0.05] {
            let body = Body::from_support_fn(
                grid.clone(),
                move |x| {
                    let t = x[1].atan2(x[0]);
                    1.0 + eps * (2.0 * t).cos()
                },
                SigmaConvention::Elementary,
            )
            .unwrap();
            let sol = solve_poisson_polar(&body, 64, None).unwrap();
            for (ti, g) in tests.iter().enumerate() {
                let err = (integral(&body, &sol, g.as_ref()) - i0[ti]).abs();
                assert!(
                    err < prev_err[ti] + 1e-12,
                    "test fn {ti}: error {err:.3e} did not shrink (prev {:.3e})",
                    prev_err[ti]
                );
                prev_err[ti] = err;
            }
        }
        for e in prev_err {
            assert!(e < 0.05);
        }
    }

    #[test]
    fn q_homogeneity() {
        let grid = circle(128);
        let base =
            Body::from_support_fn(grid.clone(), |x| 1.0 + 0.2 * x[0], SigmaConvention::Elementary)
                .unwrap();
        let sol = solve_poisson_polar(&base, 96, None).unwrap();
        let p = -1.0;
        let q0 = dual_rigidity_q(&base, &sol, 1, p);
        for lam in [0.5, 2.0] {
            let scaled = base.scale(lam).unwrap();
            let sol_s = solve_poisson_polar(&scaled, 96, None).unwrap();
            let q1 = dual_rigidity_q(&scaled, &sol_s, 1, p);
            rel_close(q1, q0 * lam.powf(p + 2.0), 1e-6);
        }
    }
}
