//! Logarithmic families of Wulff shapes, convex hulls and support
//! interpolants, a finite-difference derivative harness with Richardson
//! extrapolation, and audits comparing measured variational derivatives of
//! the rigidity functionals against their closed-form expressions.
//!
//! The audits never assert the closed-form constants for k >= 2 (and record
//! rather than assert the (p+1-k)(k+2) factor): they measure and report
//! ratios, and only scaling-forced identities are used as hard oracles.

use std::collections::BTreeMap;

use crate::body::{support_from_radial, wulff_shape, Body, RadialField, SupportField};
use crate::error::{Error, Result};
use crate::functionals::{
    dual_rigidity_q, measure_integral, mixed_dual_rigidity, mixed_measure_integral,
    mixed_measure_total, rigidity_dual_form,
};
use crate::torsion::TorsionSolution;

/// Re-solve hook used by the audit functionals on every family member.
pub type TorsionBackend<'a> = &'a dyn Fn(&Body) -> Result<TorsionSolution>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    /// h_s = h exp(s f), convexified through the Wulff shape.
    Wulff,
    /// rho_s = rho exp(s g), passed through the convex hull of the radial graph.
    Hull,
    /// rho_s = (rho_1^p + s rho_2^p)^{1/p}.
    PRadial(f64),
    /// rho_s = rho_1 rho_2^s.
    ZeroRadial,
    /// h_s = (1-s) h_1 + s h_2.
    Linear,
    /// h_s = h_1^{1-s} h_2^s, convexified through the Wulff shape.
    LogInterp,
}

/// One-parameter family of bodies with the base at s = 0 (returned exactly).
pub struct LogFamily {
    base: Body,
    kind: FamilyKind,
    pert: Option<Vec<f64>>,
    second: Option<Body>,
    s_max: f64,
}

pub fn make_family(
    base: Body,
    kind: FamilyKind,
    pert: Option<Vec<f64>>,
    second: Option<Body>,
) -> Result<LogFamily> {
    match kind {
        FamilyKind::Wulff | FamilyKind::Hull => {
            let p = pert
                .as_ref()
                .ok_or_else(|| Error::Config("this family kind needs a perturbation field".into()))?;
            if p.len() != base.grid().len() {
                return Err(Error::Config("perturbation field length mismatch".into()));
            }
        }
        FamilyKind::PRadial(_) | FamilyKind::ZeroRadial | FamilyKind::Linear | FamilyKind::LogInterp => {
            let second = second
                .as_ref()
                .ok_or_else(|| Error::Config("this family kind needs a second body".into()))?;
            if second.grid().spec() != base.grid().spec() {
                return Err(Error::Config("family bodies must share a sphere grid".into()));
            }
        }
    }
    Ok(LogFamily { base, kind, pert, second, s_max: 0.25 })
}

impl LogFamily {
    pub fn base(&self) -> &Body {
        &self.base
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// Family member at parameter s; s = 0 returns the base body exactly.
    pub fn member(&self, s: f64) -> Result<Body> {
        if s.abs() > self.s_max {
            return Err(Error::Range(format!(
                "family parameter {s} outside the positivity range (|s| <= {})",
                self.s_max
            )));
        }
        if s == 0.0 {
            return Ok(self.base.clone());
        }
        let grid = self.base.grid().clone();
        let conv = self.base.convention();
        match self.kind {
            FamilyKind::Wulff => {
                let f = self.pert.as_ref().unwrap();
                let h: Vec<f64> = self
                    .base
                    .support()
                    .values()
                    .iter()
                    .zip(f.iter())
                    .map(|(h, f)| h * (s * f).exp())
                    .collect();
                let w = wulff_shape(&grid, &h)?;
                Body::from_support(w, conv)
            }
            FamilyKind::Hull => {
                let g = self.pert.as_ref().unwrap();
                let rho: Vec<f64> = self
                    .base
                    .radial()
                    .values()
                    .iter()
                    .zip(g.iter())
                    .map(|(r, g)| r * (s * g).exp())
                    .collect();
                let hull = support_from_radial(&RadialField::from_values(grid, rho)?)?;
                Body::from_support(hull, conv)
            }
            FamilyKind::PRadial(p) => {
                let rho2 = self.second.as_ref().unwrap().radial().values();
                let mut rho = Vec::with_capacity(grid.len());
                for (r1, r2) in self.base.radial().values().iter().zip(rho2.iter()) {
                    let combo = r1.powf(p) + s * r2.powf(p);
                    if !(combo > 0.0) {
                        return Err(Error::Range(format!(
                            "p-radial combination loses positivity at s = {s}"
                        )));
                    }
                    rho.push(combo.powf(1.0 / p));
                }
                let hull = support_from_radial(&RadialField::from_values(grid, rho)?)?;
                Body::from_support(hull, conv)
            }
            FamilyKind::ZeroRadial => {
                let rho2 = self.second.as_ref().unwrap().radial().values();
                let rho: Vec<f64> = self
                    .base
                    .radial()
                    .values()
                    .iter()
                    .zip(rho2.iter())
                    .map(|(r1, r2)| r1 * r2.powf(s))
                    .collect();
                let hull = support_from_radial(&RadialField::from_values(grid, rho)?)?;
                Body::from_support(hull, conv)
            }
            FamilyKind::Linear => {
                let h2 = self.second.as_ref().unwrap().support().values();
                let h: Vec<f64> = self
                    .base
                    .support()
                    .values()
                    .iter()
                    .zip(h2.iter())
                    .map(|(a, b)| (1.0 - s) * a + s * b)
                    .collect();
                Body::from_support(SupportField::from_values(grid, h)?, conv)
            }
            FamilyKind::LogInterp => {
                let h2 = self.second.as_ref().unwrap().support().values();
                let h: Vec<f64> = self
                    .base
                    .support()
                    .values()
                    .iter()
                    .zip(h2.iter())
                    .map(|(a, b)| a.powf(1.0 - s) * b.powf(s))
                    .collect();
                let w = wulff_shape(&grid, &h)?;
                Body::from_support(w, conv)
            }
        }
    }
}

/// Result of the five-point finite-difference derivative with a step cascade
/// s in {1e-2, 5e-3, 2.5e-3} and Richardson extrapolation of the last pair.
#[derive(Debug, Clone, Copy)]
pub struct FdResult {
    pub value: f64,
    pub error_estimate: f64,
    /// False when the cascade errors fail to shrink monotonically.
    pub reliable: bool,
    pub levels: [f64; 3],
}

pub fn fd_derivative(
    family: &LogFamily,
    functional: &mut dyn FnMut(&Body) -> Result<f64>,
) -> Result<FdResult> {
    let steps = [1e-2, 5e-3, 2.5e-3];
    let mut cache: BTreeMap<u64, f64> = BTreeMap::new();
    let mut eval = |s: f64| -> Result<f64> {
        if let Some(v) = cache.get(&s.to_bits()) {
            return Ok(*v);
        }
        let v = functional(&family.member(s)?)?;
        cache.insert(s.to_bits(), v);
        Ok(v)
    };
    let mut levels = [0.0; 3];
    for (li, &s) in steps.iter().enumerate() {
        let fm2 = eval(-2.0 * s)?;
        let fm1 = eval(-s)?;
        let fp1 = eval(s)?;
        let fp2 = eval(2.0 * s)?;
        levels[li] = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * s);
    }
    let d01 = (levels[1] - levels[0]).abs();
    let d12 = (levels[2] - levels[1]).abs();
    let value = (16.0 * levels[2] - levels[1]) / 15.0;
    let error_estimate = (value - levels[2]).abs().max(d12 / 15.0);
    // Monotone cascade, or both refinements already at the noise floor.
    let scale = levels[2].abs().max(1e-300);
    let reliable = d12 <= d01 * 1.05 + 1e-14 * scale || d12 <= 1e-7 * scale;
    Ok(FdResult { value, error_estimate, reliable, levels })
}

/// One audit row: the measured derivative, the displayed closed form, the
/// scaling-forced alternative when one exists, and their ratio.
#[derive(Debug, Clone)]
pub struct AuditRecord {
    pub id: String,
    pub k: usize,
    pub p: f64,
    pub fd: f64,
    pub fd_error: f64,
    pub reliable: bool,
    pub formula_value: f64,
    pub alt_value: Option<f64>,
    pub ratio: f64,
}

impl AuditRecord {
    fn new(id: &str, k: usize, p: f64, fd: FdResult, formula: f64, alt: Option<f64>) -> Self {
        AuditRecord {
            id: id.to_string(),
            k,
            p,
            fd: fd.value,
            fd_error: fd.error_estimate,
            reliable: fd.reliable,
            formula_value: formula,
            alt_value: alt,
            ratio: fd.value / formula,
        }
    }
}

/// Hull-family derivative of the radial-form rigidity against
/// \int g rho^{n+1-k} |Du|^{k+1} dv. Ratio 1 is expected for k = 1 only.
pub fn audit_prop32(
    base: &Body,
    g_pert: &[f64],
    k: usize,
    solver: TorsionBackend,
) -> Result<AuditRecord> {
    let family = make_family(base.clone(), FamilyKind::Hull, Some(g_pert.to_vec()), None)?;
    let mut functional = |b: &Body| -> Result<f64> {
        let sol = solver(b)?;
        Ok(rigidity_dual_form(b, &sol, k))
    };
    let fd = fd_derivative(&family, &mut functional)?;

    let sol0 = solver(base)?;
    let n = base.dimension() as f64;
    let rho = base.radial().values();
    let g_du = sol0.g_on_radial_nodes(base);
    let w = base.grid().weights();
    let mut formula = 0.0;
    for j in 0..rho.len() {
        formula += g_pert[j] * rho[j].powf(n + 1.0 - k as f64) * g_du[j].powi(k as i32 + 1) * w[j];
    }
    Ok(AuditRecord::new("prop_hull_rigidity", k, f64::NAN, fd, formula, None))
}

/// Wulff-family derivative of the dual rigidity against
/// (p+1-k)(k+2) \int f dQ; also reports the scaling-forced value (p+2) Q for
/// constant f. The constant is measured, never asserted.
pub fn audit_thm310(
    base: &Body,
    f_pert: &[f64],
    k: usize,
    p: f64,
    solver: TorsionBackend,
) -> Result<AuditRecord> {
    let family = make_family(base.clone(), FamilyKind::Wulff, Some(f_pert.to_vec()), None)?;
    let mut functional = |b: &Body| -> Result<f64> {
        let sol = solver(b)?;
        Ok(dual_rigidity_q(b, &sol, k, p))
    };
    let fd = fd_derivative(&family, &mut functional)?;

    let sol0 = solver(base)?;
    let series = base.grid().trig_series(f_pert);
    let f_at = |dir: &crate::la::Vec3| -> f64 {
        match &series {
            Some(s) => s.eval(dir[1].atan2(dir[0])),
            None => base.grid().chart_interp(f_pert, dir),
        }
    };
    let int_f_dq = measure_integral(&f_at, base, &sol0, k, p)?;
    let formula = (p + 1.0 - k as f64) * (k as f64 + 2.0) * int_f_dq;

    let is_const = f_pert.iter().all(|v| (v - f_pert[0]).abs() < 1e-14);
    let alt = if is_const {
        Some((p + 2.0) * f_pert[0] * dual_rigidity_q(base, &sol0, k, p))
    } else {
        None
    };
    Ok(AuditRecord::new("wulff_dual_rigidity", k, p, fd, formula, alt))
}

/// p-radial-combination derivative of the radial-form rigidity against the
/// mixed dual rigidity (normalized-power rule).
pub fn audit_cor33(
    body1: &Body,
    body2: &Body,
    k: usize,
    p: f64,
    solver: TorsionBackend,
) -> Result<AuditRecord> {
    let kind = if p == 0.0 { FamilyKind::ZeroRadial } else { FamilyKind::PRadial(p) };
    let family = make_family(body1.clone(), kind, None, Some(body2.clone()))?;
    let mut functional = |b: &Body| -> Result<f64> {
        let sol = solver(b)?;
        Ok(rigidity_dual_form(b, &sol, k))
    };
    let fd = fd_derivative(&family, &mut functional)?;
    let sol0 = solver(body1)?;
    let formula = mixed_dual_rigidity(body1, body2, &sol0, k, p)?;
    Ok(AuditRecord::new("radial_combination_rigidity", k, p, fd, formula, None))
}

/// Linear-interpolation derivative of the dual rigidity against
/// (p+1-k)(k+2) [Q(b1, b2) - Q(b1)]; the scaling-forced value is reported for
/// b2 = lambda b1.
pub fn audit_cor311_linear(
    body1: &Body,
    body2: &Body,
    k: usize,
    p: f64,
    solver: TorsionBackend,
) -> Result<AuditRecord> {
    let family = make_family(body1.clone(), FamilyKind::Linear, None, Some(body2.clone()))?;
    let mut functional = |b: &Body| -> Result<f64> {
        let sol = solver(b)?;
        Ok(dual_rigidity_q(b, &sol, k, p))
    };
    let fd = fd_derivative(&family, &mut functional)?;
    let sol0 = solver(body1)?;
    let ratio_fn = |dir: &crate::la::Vec3| body2.support_at(dir) / body1.support_at(dir);
    let q_mix = measure_integral(&ratio_fn, body1, &sol0, k, p)?;
    let q1 = dual_rigidity_q(body1, &sol0, k, p);
    let formula = (p + 1.0 - k as f64) * (k as f64 + 2.0) * (q_mix - q1);
    Ok(AuditRecord::new("linear_interpolation_dual_rigidity", k, p, fd, formula, None))
}

/// Log-interpolation derivative of the dual rigidity against
/// (p+1-k)(k+2) \int log(h2/h1) dQ.
pub fn audit_cor311_log(
    body1: &Body,
    body2: &Body,
    k: usize,
    p: f64,
    solver: TorsionBackend,
) -> Result<AuditRecord> {
    let family = make_family(body1.clone(), FamilyKind::LogInterp, None, Some(body2.clone()))?;
    let mut functional = |b: &Body| -> Result<f64> {
        let sol = solver(b)?;
        Ok(dual_rigidity_q(b, &sol, k, p))
    };
    let fd = fd_derivative(&family, &mut functional)?;
    let sol0 = solver(body1)?;
    let log_ratio = |dir: &crate::la::Vec3| (body2.support_at(dir) / body1.support_at(dir)).ln();
    let formula =
        (p + 1.0 - k as f64) * (k as f64 + 2.0) * measure_integral(&log_ratio, body1, &sol0, k, p)?;
    Ok(AuditRecord::new("log_interpolation_dual_rigidity", k, p, fd, formula, None))
}

/// Mixed-measure variant: the first body moves along the log interpolation
/// towards body2 while body3 stays fixed inside the mixed dual measure.
pub fn audit_cor312(
    body1: &Body,
    body2: &Body,
    body3: &Body,
    k: usize,
    p: f64,
    solver: TorsionBackend,
) -> Result<AuditRecord> {
    let family = make_family(body1.clone(), FamilyKind::LogInterp, None, Some(body2.clone()))?;
    let mut functional = |b: &Body| -> Result<f64> {
        let sol = solver(b)?;
        mixed_measure_total(b, body3, &sol, k, p)
    };
    let fd = fd_derivative(&family, &mut functional)?;
    let sol0 = solver(body1)?;
    let log_ratio = |dir: &crate::la::Vec3| (body2.support_at(dir) / body1.support_at(dir)).ln();
    let formula = (p + 1.0 - k as f64)
        * (k as f64 + 2.0)
        * mixed_measure_integral(&log_ratio, body1, body3, &sol0, k, p)?;
    Ok(AuditRecord::new("mixed_measure_log_interpolation", k, p, fd, formula, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::SigmaConvention;
    use crate::functionals::{phi_of_support, rigidity_tk};
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

    fn polar_solver(layers: usize) -> impl Fn(&Body) -> crate::error::Result<TorsionSolution> {
        move |b: &Body| solve_poisson_polar(b, layers, None)
    }

    #[test]
    fn member_zero_is_base_exactly() {
        let grid = circle(64);
        let base = Body::from_support_fn(
            grid.clone(),
            |x| 1.0 + 0.2 * x[0],
            SigmaConvention::Elementary,
        )
        .unwrap();
        let second = Body::ball(grid.clone(), 2.0, SigmaConvention::Elementary).unwrap();
        let pert = vec![0.7; grid.len()];
        for kind in [
            FamilyKind::Wulff,
            FamilyKind::Hull,
            FamilyKind::PRadial(2.0),
            FamilyKind::ZeroRadial,
            FamilyKind::Linear,
            FamilyKind::LogInterp,
        ] {
            let needs_pert = matches!(kind, FamilyKind::Wulff | FamilyKind::Hull);
            let fam = make_family(
                base.clone(),
                kind,
                needs_pert.then(|| pert.clone()),
                (!needs_pert).then(|| second.clone()),
            )
            .unwrap();
            let m0 = fam.member(0.0).unwrap();
            for i in 0..grid.len() {
                assert_eq!(m0.support().values()[i], base.support().values()[i]);
            }
        }
    }

    #[test]
    fn family_range_error() {
        let grid = circle(64);
        let base = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let fam = make_family(base, FamilyKind::Wulff, Some(vec![1.0; grid.len()]), None).unwrap();
        assert!(matches!(fam.member(0.5), Err(Error::Range(_))));
    }

    #[test]
    fn wulff_family_of_ball_scales() {
        let grid = circle(128);
        let base = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let fam =
            make_family(base, FamilyKind::Wulff, Some(vec![1.0; grid.len()]), None).unwrap();
        let m = fam.member(0.02).unwrap();
        for v in m.support().values() {
            rel_close(*v, (0.02_f64).exp(), 1e-10);
        }
    }

    #[test]
    fn hull_family_zero_pert_is_constant() {
        let grid = circle(128);
        let base = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let fam = make_family(base, FamilyKind::Hull, Some(vec![0.0; grid.len()]), None).unwrap();
        let m = fam.member(0.1).unwrap();
        for v in m.support().values() {
            rel_close(*v, 1.0, 1e-9);
        }
    }

    #[test]
    fn p_radial_family_closed_form() {
        let grid = circle(128);
        let b1 = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let b2 = Body::ball(grid.clone(), 2.0, SigmaConvention::Elementary).unwrap();
        let fam = make_family(b1, FamilyKind::PRadial(2.0), None, Some(b2)).unwrap();
        let s = 0.05;
        let m = fam.member(s).unwrap();
        let expect = (1.0 + 4.0 * s).sqrt();
        for v in m.support().values() {
            rel_close(*v, expect, 1e-7);
        }
    }

    #[test]
    fn fd_harness_scaling_self_test() {
        let grid = circle(128);
        let base = Body::from_support_fn(
            grid.clone(),
            |x| {
                let t = x[1].atan2(x[0]);
                1.0 + 0.15 * t.cos() + 0.05 * (2.0 * t).sin()
            },
            SigmaConvention::Elementary,
        )
        .unwrap();
        let solver = polar_solver(64);
        let fam = make_family(base.clone(), FamilyKind::Wulff, Some(vec![1.0; grid.len()]), None)
            .unwrap();

        // Q scales with degree p + 2.
        let p = -1.0;
        let sol0 = solver(&base).unwrap();
        let q0 = dual_rigidity_q(&base, &sol0, 1, p);
        let mut fq = |b: &Body| -> crate::error::Result<f64> {
            let sol = solver(b)?;
            Ok(dual_rigidity_q(b, &sol, 1, p))
        };
        let fd = fd_derivative(&fam, &mut fq).unwrap();
        assert!(fd.reliable);
        rel_close(fd.value, (p + 2.0) * q0, 5e-3);

        // T~ scales with degree n + 2.
        let t0 = rigidity_tk(&base, &sol0, 1).unwrap().t_tilde;
        let mut ft = |b: &Body| -> crate::error::Result<f64> {
            let sol = solver(b)?;
            Ok(rigidity_tk(b, &sol, 1)?.t_tilde)
        };
        let fd = fd_derivative(&fam, &mut ft).unwrap();
        rel_close(fd.value, 4.0 * t0, 5e-3);
    }

    #[test]
    fn fd_phi_on_wulff_family() {
        // d/ds Phi([h e^{s f}]) = \int f(x) pert(x) dx, no PDE involved.
        let grid = circle(128);
        let base = Body::from_support_fn(
            grid.clone(),
            |x| 1.0 + 0.1 * x[0],
            SigmaConvention::Elementary,
        )
        .unwrap();
        let pert: Vec<f64> = grid.nodes().iter().map(|x| x[1].atan2(x[0]).cos()).collect();
        let density: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|x| 1.0 + 0.3 * x[0])
            .collect();
        let fam = make_family(base, FamilyKind::Wulff, Some(pert.clone()), None).unwrap();
        let mut f = |b: &Body| phi_of_support(b.support(), &density);
        let fd = fd_derivative(&fam, &mut f).unwrap();
        let product: Vec<f64> = pert.iter().zip(density.iter()).map(|(a, b)| a * b).collect();
        let exact = grid.integrate(&product);
        rel_close(fd.value, exact, 1e-6);
    }

    #[test]
    fn prop32_ratio_one_for_k1() {
        let grid = circle(128);
        let solver = polar_solver(64);
        let ball = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let rec = audit_prop32(&ball, &vec![1.0; grid.len()], 1, &solver).unwrap();
        rel_close(rec.fd, PI / 2.0, 1e-2);
        rel_close(rec.ratio, 1.0, 2e-2);

        // An odd perturbation of a centrally symmetric body has derivative
        // zero on both sides; use one with even content for the ratio check.
        let ell = Body::ellipse(grid.clone(), 1.4, 0.9, SigmaConvention::Elementary).unwrap();
        let pert: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|x| (2.0 * x[1].atan2(x[0])).cos())
            .collect();
        let rec = audit_prop32(&ell, &pert, 1, &solver).unwrap();
        assert!(rec.reliable);
        rel_close(rec.ratio, 1.0, 2e-2);
    }

    #[test]
    fn prop32_ratio_half_for_k2_ball() {
        let grid = Arc::new(SphereGrid::lat_lon(16, 32).unwrap());
        let ball = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let solver = |b: &Body| solve_khessian(b, 2, 28);
        let rec = audit_prop32(&ball, &vec![1.0; grid.len()], 2, &solver).unwrap();
        rel_close(rec.ratio, 0.5, 2e-2);
    }

    #[test]
    fn thm310_scaling_and_odd_perturbation() {
        let grid = circle(128);
        let solver = polar_solver(64);
        let ball = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let (k, p) = (1, -1.0);

        let rec = audit_thm310(&ball, &vec![1.0; grid.len()], k, p, &solver).unwrap();
        // fd equals the homogeneity value (p+2) Q, reported as alt; the
        // displayed constant is recorded through the ratio, not asserted.
        let alt = rec.alt_value.unwrap();
        rel_close(rec.fd, alt, 2e-2);
        rel_close(rec.formula_value / alt, -3.0, 1e-6);

        let odd: Vec<f64> = grid.nodes().iter().map(|x| x[1].atan2(x[0]).cos()).collect();
        let rec = audit_thm310(&ball, &odd, k, p, &solver).unwrap();
        close(rec.fd, 0.0, 2e-3);
        close(rec.formula_value, 0.0, 1e-10);
    }

    #[test]
    fn cor33_equality_for_k1_balls() {
        let grid = circle(128);
        let solver = polar_solver(64);
        let b1 = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let b2 = Body::ball(grid.clone(), 2.0, SigmaConvention::Elementary).unwrap();
        let rec = audit_cor33(&b1, &b2, 1, 2.0, &solver).unwrap();
        rel_close(rec.fd, PI, 2e-2);
        rel_close(rec.ratio, 1.0, 2e-2);

        // p = 0 branch with a log combination.
        let rec0 = audit_cor33(&b1, &b2, 1, 0.0, &solver).unwrap();
        assert!(rec0.reliable);
        rel_close(rec0.ratio, 1.0, 2e-2);
    }

    #[test]
    fn cor311_log_same_body_derivative_vanishes() {
        let grid = circle(128);
        let solver = polar_solver(64);
        let b = Body::from_support_fn(
            grid.clone(),
            |x| 1.0 + 0.15 * x[0],
            SigmaConvention::Elementary,
        )
        .unwrap();
        let rec = audit_cor311_log(&b, &b, 1, -1.0, &solver).unwrap();
        close(rec.fd, 0.0, 1e-8);
        close(rec.formula_value, 0.0, 1e-12);
    }

    #[test]
    fn cor311_linear_scaling_oracle() {
        let grid = circle(128);
        let solver = polar_solver(64);
        let b1 = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let b2 = Body::ball(grid.clone(), 2.0, SigmaConvention::Elementary).unwrap();
        let (k, p) = (1, -1.0);
        let rec = audit_cor311_linear(&b1, &b2, k, p, &solver).unwrap();
        // (1-s) b1 + s b2 = (1+s) b1: the derivative is forced to (p+2) Q.
        let sol0 = solver(&b1).unwrap();
        let q = dual_rigidity_q(&b1, &sol0, k, p);
        rel_close(rec.fd, (p + 2.0) * q, 2e-2);
        // Displayed right-hand side evaluates to 3p Q here; log the ratio.
        rel_close(rec.formula_value, 3.0 * p * q, 1e-3);
    }

    #[test]
    fn cor312_scaling_oracle() {
        let grid = circle(128);
        let solver = polar_solver(64);
        let b1 = Body::ball(grid.clone(), 1.0, SigmaConvention::Elementary).unwrap();
        let b2 = Body::ball(grid.clone(), 2.0, SigmaConvention::Elementary).unwrap();
        let b3 = Body::ball(grid.clone(), 1.5, SigmaConvention::Elementary).unwrap();
        let (k, p) = (1, -1.0);
        let rec = audit_cor312(&b1, &b2, &b3, k, p, &solver).unwrap();
        // Along h_s = 2^s h_1 the mixed total scales with degree (n-p)+(k+1).
        let sol0 = solver(&b1).unwrap();
        let q13 = mixed_measure_total(&b1, &b3, &sol0, k, p).unwrap();
        let degree = (2.0 - p) + (k as f64 + 1.0);
        rel_close(rec.fd, degree * 2.0_f64.ln() * q13, 2e-2);
        assert!(rec.formula_value.is_finite());
    }
}
