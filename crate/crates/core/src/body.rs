//! Support/radial representations of convex bodies, Wulff shapes, convex
//! hulls, Gauss maps and the curvature function sigma_{n-k}.
//!
//! A [`Body`] pairs a validated support field h with the radial field rho of
//! the same convex body, the boundary points X(x) = grad h + h x, and a
//! Gauss-map table alpha(v): for every radial direction v, the outer normal at
//! the point where the ray through v leaves the body.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::la::{add, dot, norm, normalize, orthonormal_complement, scale, solve_2x2, sub, sym_2x2_eigenvalues, Vec3};
use crate::sphere::{GridSpec, SphereGrid, TrigSeries};

/// Normalization of the elementary symmetric function of principal radii.
///
/// `Elementary` is the plain sum over index subsets; `Mean` divides by
/// binom(n-1, n-k) so that a ball of radius R has sigma_{n-k} = R^{n-k}.
/// The two coincide for k = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaConvention {
    Elementary,
    Mean,
}

/// Scalar field h > 0 on a sphere grid with cached covariant derivatives.
///
/// Strict convexity (omega = h_ij + h delta_ij positive definite at every
/// node) is tracked as a flag rather than enforced: hull and Wulff outputs may
/// legitimately carry flat spots.
#[derive(Debug, Clone)]
pub struct SupportField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
    grad: Vec<[f64; 2]>,
    hess: Vec<[[f64; 2]; 2]>,
    omega_min: f64,
    omega_max: f64,
    series: Option<TrigSeries>,
}

impl SupportField {
    pub fn from_values(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Validation(format!(
                "support field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Validation(format!(
                "support value must be positive, got {v} at node {i}"
            )));
        }
        let grad = grid.grad(&values);
        let hess = grid.hess(&values);
        let mut omega_min = f64::INFINITY;
        let mut omega_max = f64::NEG_INFINITY;
        for i in 0..values.len() {
            let (lo, hi) = omega_eigen_range(grid.dimension(), &hess[i], values[i]);
            omega_min = omega_min.min(lo);
            omega_max = omega_max.max(hi);
        }
        let series = grid.trig_series(&values);
        Ok(SupportField { grid, values, grad, hess, omega_min, omega_max, series })
    }

    pub fn from_fn(grid: Arc<SphereGrid>, f: impl Fn(&Vec3) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(f).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grad(&self) -> &[[f64; 2]] {
        &self.grad
    }

    pub fn hess(&self) -> &[[[f64; 2]; 2]] {
        &self.hess
    }

    /// omega_ij = h_ij + h delta_ij at node i.
    pub fn omega(&self, i: usize) -> [[f64; 2]; 2] {
        let h = self.values[i];
        let m = self.hess[i];
        [[m[0][0] + h, m[0][1]], [m[1][0], m[1][1] + h]]
    }

    pub fn omega_range(&self) -> (f64, f64) {
        (self.omega_min, self.omega_max)
    }

    /// Validated flag: all eigenvalues of omega strictly positive.
    pub fn is_strictly_convex(&self) -> bool {
        self.omega_min > 0.0
    }

    /// Boundary point X(x) = grad h + h x at node i.
    pub fn boundary_point(&self, i: usize) -> Vec3 {
        let fr = self.grid.frame(i);
        let x = self.grid.node(i);
        let g = self.grad[i];
        [
            g[0] * fr[0][0] + g[1] * fr[1][0] + self.values[i] * x[0],
            g[0] * fr[0][1] + g[1] * fr[1][1] + self.values[i] * x[1],
            g[0] * fr[0][2] + g[1] * fr[1][2] + self.values[i] * x[2],
        ]
    }

    /// rho at the node direction through the identity rho^2 = h^2 + |grad h|^2.
    pub fn rho_squared(&self, i: usize) -> f64 {
        let g = self.grad[i];
        self.values[i] * self.values[i] + g[0] * g[0] + g[1] * g[1]
    }

    pub fn series(&self) -> Option<&TrigSeries> {
        self.series.as_ref()
    }

    pub fn scale(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Validation(format!("scale factor must be positive, got {lambda}")));
        }
        Self::from_values(self.grid.clone(), self.values.iter().map(|v| v * lambda).collect())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn omega_eigen_range(dim: usize, hess: &[[f64; 2]; 2], h: f64) -> (f64, f64) {
    if dim == 2 {
        let w = hess[0][0] + h;
        (w, w)
    } else {
        sym_2x2_eigenvalues([[hess[0][0] + h, hess[0][1]], [hess[1][0], hess[1][1] + h]])
    }
}

/// Scalar field rho > 0 on a sphere grid (radial function samples).
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
    series: Option<TrigSeries>,
}

impl RadialField {
    pub fn from_values(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Validation(format!(
                "radial field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Validation(format!(
                "radial value must be positive, got {v} at node {i}"
            )));
        }
        let series = grid.trig_series(&values);
        Ok(RadialField { grid, values, series })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn series(&self) -> Option<&TrigSeries> {
        self.series.as_ref()
    }

    /// Interpolates rho at an arbitrary unit direction (spectral for n = 2,
    /// chart Lagrange for n = 3).
    pub fn eval(&self, dir: &Vec3) -> f64 {
        match self.series.as_ref() {
            Some(s) => s.eval(dir[1].atan2(dir[0])),
            None => self.grid.chart_interp(&self.values, dir),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Gauss-map sample for one radial node: the outer normal `alpha` and the
/// boundary point where the ray leaves the body.
#[derive(Debug, Clone, Copy)]
pub struct GaussSample {
    pub alpha: Vec3,
    pub point: Vec3,
}

/// Exact facet description of an n = 2 polytope body.
#[derive(Debug, Clone)]
pub struct PolygonData {
    /// Counter-clockwise vertex loop.
    pub vertices: Vec<[f64; 2]>,
    /// Outer unit normal per facet (facet f joins vertex f and f+1).
    pub facet_normals: Vec<Vec3>,
    /// Support value at each facet normal.
    pub facet_offsets: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Geometry {
    Smooth,
    Polygon(PolygonData),
}

/// Validated convex body carrying both representations plus Gauss-map data.
#[derive(Debug, Clone)]
pub struct Body {
    support: SupportField,
    radial: RadialField,
    boundary: Vec<Vec3>,
    gauss: Vec<GaussSample>,
    convention: SigmaConvention,
    geometry: Geometry,
}

impl Body {
    /// Builds a body from a strictly convex support field.
    pub fn from_support(support: SupportField, convention: SigmaConvention) -> Result<Self> {
        if !support.is_strictly_convex() {
            return Err(Error::Validation(format!(
                "support field is not strictly convex (min omega eigenvalue {:.3e})",
                support.omega_range().0
            )));
        }
        let boundary = (0..support.grid().len()).map(|i| support.boundary_point(i)).collect();
        let (radial, gauss) = radial_from_support(&support)?;
        Ok(Body { support, radial, boundary, gauss, convention, geometry: Geometry::Smooth })
    }

    pub fn from_support_fn(
        grid: Arc<SphereGrid>,
        f: impl Fn(&Vec3) -> f64,
        convention: SigmaConvention,
    ) -> Result<Self> {
        Self::from_support(SupportField::from_fn(grid, f)?, convention)
    }

    pub fn ball(grid: Arc<SphereGrid>, r: f64, convention: SigmaConvention) -> Result<Self> {
        Self::from_support_fn(grid, |_| r, convention)
    }

    /// n = 2 ellipse with semi-axes (a, b).
    pub fn ellipse(grid: Arc<SphereGrid>, a: f64, b: f64, convention: SigmaConvention) -> Result<Self> {
        Self::from_support_fn(grid, |x| (a * a * x[0] * x[0] + b * b * x[1] * x[1]).sqrt(), convention)
    }

    /// n = 3 axis-aligned ellipsoid with semi-axes (a, b, c).
    pub fn ellipsoid(
        grid: Arc<SphereGrid>,
        a: f64,
        b: f64,
        c: f64,
        convention: SigmaConvention,
    ) -> Result<Self> {
        Self::from_support_fn(
            grid,
            |x| (a * a * x[0] * x[0] + b * b * x[1] * x[1] + c * c * x[2] * x[2]).sqrt(),
            convention,
        )
    }

    /// Builds an n = 2 polytope body from a vertex loop containing the origin.
    /// The radial function, Gauss table and normal fan are exact; the support
    /// field carries the sampled h but is not strictly convex.
    pub fn polygon(
        grid: Arc<SphereGrid>,
        vertices: Vec<[f64; 2]>,
        convention: SigmaConvention,
    ) -> Result<Self> {
        if grid.dimension() != 2 {
            return Err(Error::Config("polygon bodies need an n = 2 grid".into()));
        }
        if vertices.len() < 3 {
            return Err(Error::Validation("polygon needs at least 3 vertices".into()));
        }
        let mut verts = vertices;
        let area2: f64 = polygon_area2(&verts);
        if area2 < 0.0 {
            verts.reverse();
        }
        let m = verts.len();
        let mut facet_normals = Vec::with_capacity(m);
        let mut facet_offsets = Vec::with_capacity(m);
        for f in 0..m {
            let p = verts[f];
            let q = verts[(f + 1) % m];
            let edge = [q[0] - p[0], q[1] - p[1]];
            let len = (edge[0] * edge[0] + edge[1] * edge[1]).sqrt();
            if len <= 1e-14 {
                return Err(Error::Validation("degenerate polygon edge".into()));
            }
            let nrm = [edge[1] / len, -edge[0] / len, 0.0];
            let off = nrm[0] * p[0] + nrm[1] * p[1];
            if off <= 0.0 {
                return Err(Error::Validation(
                    "polygon must contain the origin in its interior".into(),
                ));
            }
            facet_normals.push(nrm);
            facet_offsets.push(off);
        }

        let support_values: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|x| verts.iter().map(|v| v[0] * x[0] + v[1] * x[1]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let support = SupportField::from_values(grid.clone(), support_values)?;

        // Boundary samples: the vertex attaining the support value
        // (lexicographically smallest index on ties).
        let boundary: Vec<Vec3> = grid
            .nodes()
            .iter()
            .map(|x| {
                let mut best = 0usize;
                let mut bestv = f64::NEG_INFINITY;
                for (i, v) in verts.iter().enumerate() {
                    let d = v[0] * x[0] + v[1] * x[1];
                    if d > bestv + 1e-14 {
                        bestv = d;
                        best = i;
                    }
                }
                [verts[best][0], verts[best][1], 0.0]
            })
            .collect();

        let mut radial_values = Vec::with_capacity(grid.len());
        let mut gauss = Vec::with_capacity(grid.len());
        for v in grid.nodes() {
            let (rho, facet) = polygon_ray_exit(&facet_normals, &facet_offsets, v);
            radial_values.push(rho);
            gauss.push(GaussSample { alpha: facet_normals[facet], point: scale(v, rho) });
        }
        let radial = RadialField::from_values(grid.clone(), radial_values)?;

        Ok(Body {
            support,
            radial,
            boundary,
            gauss,
            convention,
            geometry: Geometry::Polygon(PolygonData {
                vertices: verts,
                facet_normals,
                facet_offsets,
            }),
        })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        self.support.grid()
    }

    pub fn dimension(&self) -> usize {
        self.grid().dimension()
    }

    pub fn support(&self) -> &SupportField {
        &self.support
    }

    pub fn radial(&self) -> &RadialField {
        &self.radial
    }

    pub fn boundary(&self) -> &[Vec3] {
        &self.boundary
    }

    pub fn gauss(&self) -> &[GaussSample] {
        &self.gauss
    }

    pub fn convention(&self) -> SigmaConvention {
        self.convention
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn is_polytope(&self) -> bool {
        matches!(self.geometry, Geometry::Polygon(_))
    }

    /// Support function at an arbitrary direction (spectral for n = 2, chart
    /// interpolation for n = 3, exact vertex maximum for polytopes).
    pub fn support_at(&self, dir: &Vec3) -> f64 {
        match &self.geometry {
            Geometry::Polygon(poly) => poly
                .vertices
                .iter()
                .map(|v| v[0] * dir[0] + v[1] * dir[1])
                .fold(f64::NEG_INFINITY, f64::max),
            Geometry::Smooth => match self.support.series() {
                Some(s) => s.eval(dir[1].atan2(dir[0])),
                None => self.grid().chart_interp(self.support.values(), dir),
            },
        }
    }

    /// Radial function at an arbitrary direction: exact for polytopes,
    /// interpolated for smooth bodies.
    pub fn radial_at(&self, dir: &Vec3) -> f64 {
        match &self.geometry {
            Geometry::Smooth => self.radial.eval(dir),
            Geometry::Polygon(poly) => {
                polygon_ray_exit(&poly.facet_normals, &poly.facet_offsets, dir).0
            }
        }
    }

    /// sigma_{n-k} of the body's support field under its own convention.
    pub fn sigma(&self, k: usize) -> Result<Vec<f64>> {
        if self.is_polytope() {
            return Err(Error::Validation(
                "curvature function is undefined for polytope bodies".into(),
            ));
        }
        curvature_sigma(&self.support, k, self.convention)
    }

    pub fn scale(&self, lambda: f64) -> Result<Body> {
        match &self.geometry {
            Geometry::Smooth => Body::from_support(self.support.scale(lambda)?, self.convention),
            Geometry::Polygon(poly) => {
                let verts = poly.vertices.iter().map(|v| [v[0] * lambda, v[1] * lambda]).collect();
                Body::polygon(self.grid().clone(), verts, self.convention)
            }
        }
    }

    pub fn snapshot(&self) -> BodySnapshot {
        BodySnapshot {
            n: self.dimension(),
            grid: self.grid().spec(),
            h: self.support.values().to_vec(),
            sigma_convention: self.convention,
            polygon: match &self.geometry {
                Geometry::Polygon(p) => Some(p.vertices.clone()),
                Geometry::Smooth => None,
            },
        }
    }

    pub fn from_snapshot(snapshot: &BodySnapshot) -> Result<Body> {
        let grid = Arc::new(SphereGrid::from_spec(snapshot.grid)?);
        if let Some(verts) = &snapshot.polygon {
            return Body::polygon(grid, verts.clone(), snapshot.sigma_convention);
        }
        Body::from_support(
            SupportField::from_values(grid, snapshot.h.clone())?,
            snapshot.sigma_convention,
        )
    }
}

/// Serializable body description used by the command-line tools.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BodySnapshot {
    pub n: usize,
    pub grid: GridSpec,
    pub h: Vec<f64>,
    pub sigma_convention: SigmaConvention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<[f64; 2]>>,
}

fn polygon_area2(verts: &[[f64; 2]]) -> f64 {
    let m = verts.len();
    let mut acc = 0.0;
    for i in 0..m {
        let p = verts[i];
        let q = verts[(i + 1) % m];
        acc += p[0] * q[1] - p[1] * q[0];
    }
    acc
}

/// Exit radius of the ray along `dir` and the index of the facet it crosses.
/// Fan-boundary ties resolve to the smallest facet index.
fn polygon_ray_exit(normals: &[Vec3], offsets: &[f64], dir: &Vec3) -> (f64, usize) {
    let mut best_t = f64::INFINITY;
    let mut best_f = 0usize;
    for (f, nrm) in normals.iter().enumerate() {
        let d = nrm[0] * dir[0] + nrm[1] * dir[1];
        if d > 1e-14 {
            let t = offsets[f] / d;
            if t < best_t - 1e-13 {
                best_t = t;
                best_f = f;
            }
        }
    }
    (best_t, best_f)
}

/// Computes the radial function and Gauss-map table of a strictly convex
/// support field by ray/boundary intersection with one Newton refinement.
pub fn radial_from_support(support: &SupportField) -> Result<(RadialField, Vec<GaussSample>)> {
    if !support.is_strictly_convex() {
        return Err(Error::Validation(format!(
            "radial_from_support needs a strictly convex field (min omega eigenvalue {:.3e})",
            support.omega_range().0
        )));
    }
    match support.grid().dimension() {
        2 => radial_from_support_2d(support),
        _ => radial_from_support_3d(support),
    }
}

fn radial_from_support_2d(support: &SupportField) -> Result<(RadialField, Vec<GaussSample>)> {
    let grid = support.grid().clone();
    let n = grid.len();
    let series = support.series().expect("n = 2 support has a trig series");
    let thetas = grid.thetas().unwrap();

    // Polar angles of the boundary polygon, unwrapped to a monotone sequence.
    let mut psi = Vec::with_capacity(n + 1);
    let first = {
        let p = support.boundary_point(0);
        p[1].atan2(p[0])
    };
    psi.push(first);
    for i in 1..=n {
        let p = support.boundary_point(i % n);
        let raw = p[1].atan2(p[0]);
        let prev = psi[i - 1];
        let mut next = raw;
        while next < prev - 1e-12 {
            next += 2.0 * PI;
        }
        psi.push(next);
    }

    let eval_boundary = |theta: f64| -> (Vec3, f64, f64, f64) {
        let h = series.eval(theta);
        let hp = series.eval_deriv(theta);
        let hpp = series.eval_second(theta);
        let (st, ct) = (theta.sin(), theta.cos());
        let x = [ct, st, 0.0];
        let e = [-st, ct, 0.0];
        let point = add(&scale(&e, hp), &scale(&x, h));
        (point, h, hp, hpp)
    };

    let mut rho_vals = Vec::with_capacity(n);
    let mut gauss = Vec::with_capacity(n);
    for j in 0..n {
        let phi = thetas[j];
        // Locate the boundary segment whose polar-angle interval contains phi.
        let mut target = phi;
        while target < psi[0] - 1e-12 {
            target += 2.0 * PI;
        }
        while target >= psi[n] - 1e-12 {
            target -= 2.0 * PI;
        }
        let mut lo = 0usize;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if psi[mid] <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let i = lo;
        let p = support.boundary_point(i);
        let q = support.boundary_point((i + 1) % n);
        let v = grid.node(j);
        // Ray/segment intersection parameter for the initial guess.
        let denom = cross2(&sub(&p, &q), &v);
        let lambda = if denom.abs() > 1e-14 { (cross2(&p, &v) / denom).clamp(0.0, 1.0) } else { 0.0 };
        let dtheta = 2.0 * PI / n as f64;
        let theta_init = thetas[i] + lambda * dtheta;

        // One Newton step on psi(theta) = phi; d psi / d theta = h omega / rho^2.
        let (point0, h0, hp0, hpp0) = eval_boundary(theta_init);
        let rho_sq = h0 * h0 + hp0 * hp0;
        let omega = hpp0 + h0;
        let psi0 = point0[1].atan2(point0[0]);
        let mut diff = psi0 - phi;
        while diff > PI {
            diff -= 2.0 * PI;
        }
        while diff < -PI {
            diff += 2.0 * PI;
        }
        let slope = h0 * omega / rho_sq;
        let theta_star = theta_init - diff / slope;

        let (point, _, _, _) = eval_boundary(theta_star);
        rho_vals.push(norm(&point));
        gauss.push(GaussSample { alpha: [theta_star.cos(), theta_star.sin(), 0.0], point });
    }
    let radial = RadialField::from_values(grid, rho_vals)?;
    Ok((radial, gauss))
}

fn cross2(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn radial_from_support_3d(support: &SupportField) -> Result<(RadialField, Vec<GaussSample>)> {
    let grid = support.grid().clone();
    let n = grid.len();
    let boundary: Vec<Vec3> = (0..n).map(|i| support.boundary_point(i)).collect();
    let boundary_dirs: Vec<Vec3> = boundary.iter().map(normalize).collect();

    let mut rho_vals = Vec::with_capacity(n);
    let mut gauss = Vec::with_capacity(n);
    for j in 0..n {
        let v = grid.node(j);
        // Nearest boundary sample in the ray-direction metric.
        let mut best = 0usize;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, d) in boundary_dirs.iter().enumerate() {
            let dd = dot(d, &v);
            if dd > best_dot {
                best_dot = dd;
                best = i;
            }
        }
        let x0 = grid.node(best);
        let fr = grid.frame(best);
        let h = support.values()[best];
        let hs = support.hess()[best];
        let omega = [[hs[0][0] + h, hs[0][1]], [hs[1][0], hs[1][1] + h]];
        let x_base = boundary[best];

        // One Newton step in the tangent chart: X(s) = X0 + s_b omega_bc e_c,
        // solve for the tangential components of X against the ray direction.
        let (q1, q2) = orthonormal_complement(&v);
        let dxs: [Vec3; 2] = [
            add(&scale(&fr[0], omega[0][0]), &scale(&fr[1], omega[0][1])),
            add(&scale(&fr[0], omega[1][0]), &scale(&fr[1], omega[1][1])),
        ];
        let f = [dot(&q1, &x_base), dot(&q2, &x_base)];
        let jac = [
            [dot(&q1, &dxs[0]), dot(&q1, &dxs[1])],
            [dot(&q2, &dxs[0]), dot(&q2, &dxs[1])],
        ];
        let s = solve_2x2(jac, [-f[0], -f[1]]).unwrap_or([0.0, 0.0]);
        let step_cap = 4.0 * (4.0 * PI / n as f64).sqrt();
        let slen = (s[0] * s[0] + s[1] * s[1]).sqrt();
        let s = if slen > step_cap { [s[0] * step_cap / slen, s[1] * step_cap / slen] } else { s };

        let alpha = normalize(&add(&x0, &add(&scale(&fr[0], s[0]), &scale(&fr[1], s[1]))));
        let point = add(&x_base, &add(&scale(&dxs[0], s[0]), &scale(&dxs[1], s[1])));
        rho_vals.push(norm(&point));
        gauss.push(GaussSample { alpha, point });
    }
    let radial = RadialField::from_values(grid, rho_vals)?;
    Ok((radial, gauss))
}

/// Support function of the convex hull of the radial graph {rho(v) v}:
/// h(x) = max_v rho(v) (v . x), sharpened by a local quadratic fit around the
/// maximizing node (clamped to half a grid spacing; spikes fall back to the
/// node value).
pub fn support_from_radial(rho: &RadialField) -> Result<SupportField> {
    let grid = rho.grid().clone();
    match grid.dimension() {
        2 => {
            let thetas = grid.thetas().unwrap();
            let n = grid.len();
            let dtheta = 2.0 * PI / n as f64;
            let vals = rho.values();
            let series = rho.series().expect("n = 2 radial field has a trig series");
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let xt = thetas[i];
                let c = |j: usize| vals[j] * (thetas[j] - xt).cos();
                let mut best = 0usize;
                let mut bestv = f64::NEG_INFINITY;
                for j in 0..n {
                    let cj = c(j);
                    if cj > bestv {
                        bestv = cj;
                        best = j;
                    }
                }
                let cm = c((best + n - 1) % n);
                let cp = c((best + 1) % n);
                out.push(smooth_peak(series, thetas[best], xt, dtheta, cm, bestv, cp));
            }
            SupportField::from_values(grid, out)
        }
        _ => {
            let (nlat, nlon) = grid.lat_lon_shape().unwrap();
            let vals = rho.values();
            let nodes = grid.nodes();
            let n = grid.len();
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let x = nodes[i];
                let mut best = 0usize;
                let mut bestv = f64::NEG_INFINITY;
                for j in 0..n {
                    let cj = vals[j] * dot(&nodes[j], &x);
                    if cj > bestv {
                        bestv = cj;
                        best = j;
                    }
                }
                out.push(latlon_quadratic_peak(&grid, vals, &x, best, nlat, nlon, bestv));
            }
            SupportField::from_values(grid, out)
        }
    }
}

/// Polishes the hull maximum of c(theta) = rho(theta) cos(theta - phi) with
/// Newton on the radial trig series. Falls back to the local parabola (and
/// ultimately the node value) when the data is not smooth at the node scale,
/// so spike graphs keep the exact point-set support.
fn smooth_peak(
    series: &TrigSeries,
    theta0: f64,
    phi: f64,
    spacing: f64,
    cm: f64,
    c0: f64,
    cp: f64,
) -> f64 {
    let denom = cm - 2.0 * c0 + cp;
    if denom >= -1e-300 || denom.abs() > 0.5 * c0.abs() {
        return quadratic_peak(cm, c0, cp, spacing);
    }
    let mut theta = theta0;
    for _ in 0..4 {
        let r = series.eval(theta);
        let rp = series.eval_deriv(theta);
        let rpp = series.eval_second(theta);
        let (sd, cd) = (theta - phi).sin_cos();
        let f1 = rp * cd - r * sd;
        let f2 = rpp * cd - 2.0 * rp * sd - r * cd;
        if f2 >= -1e-300 {
            return quadratic_peak(cm, c0, cp, spacing);
        }
        let step = f1 / f2;
        theta -= step;
        if (theta - theta0).abs() > spacing {
            return quadratic_peak(cm, c0, cp, spacing);
        }
        if step.abs() < 1e-14 {
            break;
        }
    }
    let refined = series.eval(theta) * (theta - phi).cos();
    if refined >= c0 {
        refined
    } else {
        quadratic_peak(cm, c0, cp, spacing)
    }
}

fn quadratic_peak(cm: f64, c0: f64, cp: f64, spacing: f64) -> f64 {
    let denom = cm - 2.0 * c0 + cp;
    if denom >= -1e-300 {
        return c0;
    }
    // Trust the quadratic model only when it resolves a smooth maximum;
    // spike-like triples (curvature on the 1/spacing^2 scale) keep the node
    // value, which is the exact support of the sampled point set.
    if denom.abs() > 0.5 * c0.abs() {
        return c0;
    }
    let delta = 0.5 * spacing * (cm - cp) / denom;
    let delta = delta.clamp(-0.5 * spacing, 0.5 * spacing);
    let d1 = (cp - cm) / (2.0 * spacing);
    let d2 = denom / (spacing * spacing);
    c0 + d1 * delta + 0.5 * d2 * delta * delta
}

fn latlon_quadratic_peak(
    grid: &SphereGrid,
    vals: &[f64],
    x: &Vec3,
    best: usize,
    nlat: usize,
    nlon: usize,
    c0: f64,
) -> f64 {
    let jrow = best / nlon;
    let icol = best % nlon;
    if jrow == 0 || jrow + 1 >= nlat {
        // Peak at an extreme latitude row: keep the node value. The glide
        // continuation would be needed for a full fit; the loss is O(h^2) on
        // two rows out of nlat.
        return c0;
    }
    let c_at = |j: usize, i: usize| {
        let idx = j * nlon + (i + nlon) % nlon;
        vals[idx] * dot(&grid.node(idx), x)
    };
    // Local non-uniform quadratic model in the (theta, phi) chart.
    let t = [node_theta(grid, (jrow - 1) * nlon), node_theta(grid, jrow * nlon), node_theta(grid, (jrow + 1) * nlon)];
    let dphi = 2.0 * PI / nlon as f64;
    let cmm = c_at(jrow - 1, icol);
    let cpp = c_at(jrow + 1, icol);
    let clm = c_at(jrow, icol + nlon - 1);
    let clp = c_at(jrow, icol + 1);
    let w = crate::sphere::fornberg_weights(t[1], &t, 2);
    let gt = w[1][0] * cmm + w[1][1] * c0 + w[1][2] * cpp;
    let htt = w[2][0] * cmm + w[2][1] * c0 + w[2][2] * cpp;
    let gp = (clp - clm) / (2.0 * dphi);
    let hpp = (clp - 2.0 * c0 + clm) / (dphi * dphi);
    let hc = (c_at(jrow + 1, icol + 1) - c_at(jrow + 1, icol + nlon - 1) - c_at(jrow - 1, icol + 1)
        + c_at(jrow - 1, icol + nlon - 1))
        / (4.0 * (t[2] - t[0]) / 2.0 * dphi);
    let hmat = [[htt, hc], [hc, hpp]];
    if htt >= 0.0 || htt * hpp - hc * hc <= 0.0 {
        return c0;
    }
    // Same smoothness guard as the circle path: reject spike-scale curvature.
    let dt_local = (t[2] - t[0]) / 2.0;
    if htt.abs() * dt_local * dt_local > 0.5 * c0.abs() || hpp.abs() * dphi * dphi > 0.5 * c0.abs() {
        return c0;
    }
    match solve_2x2(hmat, [-gt, -gp]) {
        Some(d) => {
            let cap_t = 0.5 * (t[2] - t[0]) / 2.0;
            let cap_p = 0.5 * dphi;
            let dt = d[0].clamp(-cap_t, cap_t);
            let dp = d[1].clamp(-cap_p, cap_p);
            c0 + gt * dt
                + gp * dp
                + 0.5 * (htt * dt * dt + 2.0 * hc * dt * dp + hpp * dp * dp)
        }
        None => c0,
    }
}

fn node_theta(grid: &SphereGrid, idx: usize) -> f64 {
    grid.node(idx)[2].clamp(-1.0, 1.0).acos()
}

/// Support function of the Wulff shape [f] (the intersection of the
/// halfspaces y . x_i <= f_i over all grid nodes).
///
/// * n = 2: exact polytope evaluation through the dual polygon, so the
///   operator is a projection to roundoff: support functions are fixed points
///   and wulff(wulff(f)) == wulff(f) at the nodes.
/// * n = 3: adjoint min/max scans between the node sets; exact idempotence by
///   residuation, pointwise accuracy O(grid spacing^2).
pub fn wulff_shape(grid: &Arc<SphereGrid>, f: &[f64]) -> Result<SupportField> {
    if f.len() != grid.len() {
        return Err(Error::Validation("wulff_shape: field length mismatch".into()));
    }
    if let Some((i, &v)) = f.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Validation(format!(
            "wulff_shape needs a positive field, got {v} at node {i}"
        )));
    }
    match grid.dimension() {
        2 => wulff_shape_2d(grid, f),
        _ => wulff_shape_3d(grid, f),
    }
}

fn wulff_shape_2d(grid: &Arc<SphereGrid>, f: &[f64]) -> Result<SupportField> {
    let n = grid.len();
    let duals: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let x = grid.node(i);
            [x[0] / f[i], x[1] / f[i]]
        })
        .collect();
    let hull = convex_hull_2d(&duals);
    // Each hull edge dualizes to a vertex of the Wulff body.
    let m = hull.len();
    let mut body_vertices = Vec::with_capacity(m);
    for e in 0..m {
        let a = duals[hull[e]];
        let b = duals[hull[(e + 1) % m]];
        let sol = solve_2x2([[a[0], a[1]], [b[0], b[1]]], [1.0, 1.0])
            .ok_or_else(|| Error::Validation("degenerate dual edge in wulff_shape".into()))?;
        body_vertices.push(sol);
    }
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|x| {
            body_vertices
                .iter()
                .map(|v| v[0] * x[0] + v[1] * x[1])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    SupportField::from_values(grid.clone(), values)
}

/// Monotone-chain convex hull; returns vertex indices in CCW order.
fn convex_hull_2d(pts: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| {
        pts[a][0]
            .partial_cmp(&pts[b][0])
            .unwrap()
            .then(pts[a][1].partial_cmp(&pts[b][1]).unwrap())
    });
    let cross = |o: usize, a: usize, b: usize| -> f64 {
        (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1])
            - (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0])
    };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= 0.0 {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= 0.0 {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn wulff_shape_3d(grid: &Arc<SphereGrid>, f: &[f64]) -> Result<SupportField> {
    let n = grid.len();
    let nodes = grid.nodes();
    let mut rho = vec![f64::INFINITY; n];
    for j in 0..n {
        let v = nodes[j];
        let mut best = f64::INFINITY;
        for i in 0..n {
            let d = dot(&nodes[i], &v);
            if d > 1e-12 {
                let t = f[i] / d;
                if t < best {
                    best = t;
                }
            }
        }
        rho[j] = best;
    }
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let x = nodes[i];
            let mut best = f64::NEG_INFINITY;
            for j in 0..n {
                let c = rho[j] * dot(&nodes[j], &x);
                if c > best {
                    best = c;
                }
            }
            best
        })
        .collect();
    SupportField::from_values(grid.clone(), values)
}

/// Polar dual: the body with radial function 1/h, support from the hull of
/// the reciprocal radial graph. An involution on smooth strictly convex
/// bodies within grid tolerance.
pub fn polar_dual(body: &Body) -> Result<Body> {
    let recip: Vec<f64> = body.support().values().iter().map(|h| 1.0 / h).collect();
    let rho_star = RadialField::from_values(body.grid().clone(), recip)?;
    let h_star = support_from_radial(&rho_star)?;
    Body::from_support(h_star, body.convention())
}

/// sigma_{n-k}: the (n-k)-th elementary symmetric function of the eigenvalues
/// of omega_ij = h_ij + h delta_ij, under the requested convention.
pub fn curvature_sigma(
    support: &SupportField,
    k: usize,
    convention: SigmaConvention,
) -> Result<Vec<f64>> {
    let n = support.grid().dimension();
    if k < 1 || k > n - 1 {
        return Err(Error::Config("k must satisfy 1\u{2264}k\u{2264}n\u{2212}1".into()));
    }
    let vals = support.values();
    let hess = support.hess();
    let out = match (n, k) {
        (2, 1) => (0..vals.len()).map(|i| hess[i][0][0] + vals[i]).collect(),
        (3, 1) => (0..vals.len())
            .map(|i| {
                let w = omega_2x2(&hess[i], vals[i]);
                w[0][0] * w[1][1] - w[0][1] * w[1][0]
            })
            .collect(),
        (3, 2) => {
            let div = match convention {
                SigmaConvention::Elementary => 1.0,
                SigmaConvention::Mean => 2.0,
            };
            (0..vals.len())
                .map(|i| {
                    let w = omega_2x2(&hess[i], vals[i]);
                    (w[0][0] + w[1][1]) / div
                })
                .collect()
        }
        _ => unreachable!(),
    };
    Ok(out)
}

fn omega_2x2(hess: &[[f64; 2]; 2], h: f64) -> [[f64; 2]; 2] {
    [[hess[0][0] + h, hess[0][1]], [hess[1][0], hess[1][1] + h]]
}

/// A region of the normal sphere used for reverse Gauss images and measure
/// partitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    All,
    /// Spherical cap { x : x . axis >= min_dot }.
    Cap { axis: Vec3, min_dot: f64 },
    /// Azimuth interval [lo, hi) in radians (n = 2); wraps when lo > hi.
    AngleRange { lo: f64, hi: f64 },
}

impl Region {
    pub fn contains(&self, dir: &Vec3) -> bool {
        match self {
            Region::All => true,
            Region::Cap { axis, min_dot } => dot(axis, dir) >= *min_dot,
            Region::AngleRange { lo, hi } => {
                let a = dir[1].atan2(dir[0]).rem_euclid(2.0 * PI);
                let lo = lo.rem_euclid(2.0 * PI);
                let hi = hi.rem_euclid(2.0 * PI);
                if lo <= hi {
                    a >= lo && a < hi
                } else {
                    a >= lo || a < hi
                }
            }
        }
    }
}

/// Ordered list of regions; directions are assigned to the first region that
/// contains them, and anything left over lands in an implicit complement, so
/// any region list induces a partition of the radial nodes.
#[derive(Debug, Clone)]
pub struct Partition {
    pub regions: Vec<Region>,
}

impl Partition {
    pub fn whole_sphere() -> Self {
        Partition { regions: vec![Region::All] }
    }

    pub fn hemispheres(axis: Vec3) -> Self {
        Partition { regions: vec![Region::Cap { axis, min_dot: 0.0 }] }
    }

    /// Uniform azimuth bins (n = 2).
    pub fn angle_bins(bins: usize) -> Self {
        let w = 2.0 * PI / bins as f64;
        Partition {
            regions: (0..bins)
                .map(|b| Region::AngleRange { lo: b as f64 * w, hi: (b as f64 + 1.0) * w })
                .collect(),
        }
    }

    /// Tight caps around each facet normal of a polytope body.
    pub fn facet_caps(body: &Body) -> Result<Self> {
        match body.geometry() {
            Geometry::Polygon(p) => Ok(Partition {
                regions: p
                    .facet_normals
                    .iter()
                    .map(|nrm| Region::Cap { axis: *nrm, min_dot: 1.0 - 1e-9 })
                    .collect(),
            }),
            Geometry::Smooth => Err(Error::Config("facet_caps needs a polytope body".into())),
        }
    }

    /// Number of parts including the implicit complement.
    pub fn part_count(&self) -> usize {
        self.regions.len() + 1
    }

    pub fn assign(&self, dir: &Vec3) -> usize {
        for (i, r) in self.regions.iter().enumerate() {
            if r.contains(dir) {
                return i;
            }
        }
        self.regions.len()
    }
}

/// Reverse radial Gauss image: the radial nodes v whose Gauss-map sample
/// alpha(v) lies in the region.
pub fn radial_gauss_reverse(body: &Body, region: &Region) -> Vec<usize> {
    body.gauss()
        .iter()
        .enumerate()
        .filter(|(_, g)| region.contains(&g.alpha))
        .map(|(i, _)| i)
        .collect()
}

/// Predicate form of the reverse radial Gauss image.
pub fn radial_gauss_reverse_pred(body: &Body, pred: impl Fn(&Vec3) -> bool) -> Vec<usize> {
    body.gauss()
        .iter()
        .enumerate()
        .filter(|(_, g)| pred(&g.alpha))
        .map(|(i, _)| i)
        .collect()
}
