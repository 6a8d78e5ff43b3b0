//! Discretization of the unit sphere in dimensions 2 and 3.
//!
//! Supplies quadrature nodes/weights, per-node orthonormal tangent frames and
//! the covariant differential operators (gradient and second covariant
//! derivative with respect to the frame) used by the body calculus, the
//! functionals and the flow engine.
//!
//! * n = 2: uniform angles on the circle. Differentiation is spectral through
//!   a discrete Fourier series, so band-limited fields are differentiated to
//!   roundoff.
//! * n = 3: latitude–longitude grid with Gauss–Legendre latitude nodes
//!   (strictly inside (0, pi), no pole nodes) and uniform longitudes.
//!   Quadrature is exact for the latitude polynomial degree of the rule;
//!   differentiation is 4th-order finite differences with pole continuation
//!   through the antipodal longitude shift.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::la::Vec3;

/// Serializable description of a grid, used in body snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Circle { nodes: usize },
    LatLon { nlat: usize, nlon: usize },
}

impl GridSpec {
    pub fn dimension(&self) -> usize {
        match self {
            GridSpec::Circle { .. } => 2,
            GridSpec::LatLon { .. } => 3,
        }
    }
}

/// How an extended (ghost) latitude row maps back onto a stored row.
#[derive(Debug, Clone, Copy)]
struct ExtRow {
    row: usize,
    /// Ghost rows across a pole read the stored row shifted by half a turn.
    antipodal_shift: bool,
    theta: f64,
}

#[derive(Debug, Clone)]
struct LatStencil {
    /// Extended row indices (length 5) feeding this latitude.
    rows: [ExtRow; 5],
    d1: [f64; 5],
    d2: [f64; 5],
}

#[derive(Debug, Clone)]
pub(crate) struct CircleTables {
    pub thetas: Vec<f64>,
    /// cos(m * theta_i) stored as m-major: index m * n + i, m = 0..=n/2.
    cos_m: Vec<f64>,
    sin_m: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LatLonData {
    nlat: usize,
    nlon: usize,
    thetas: Vec<f64>,
    dphi: f64,
    stencils: Vec<LatStencil>,
}

#[derive(Debug, Clone)]
enum GridKind {
    Circle(CircleTables),
    LatLon(LatLonData),
}

/// Quadrature and differentiation grid on S^{n-1}, n in {2, 3}.
///
/// Immutable after construction; all operations are pure functions over node
/// data with a fixed node ordering, so results are reproducible bit-for-bit.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    dim: usize,
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    frames: Vec<[Vec3; 2]>,
    kind: GridKind,
    spec: GridSpec,
}

/// Resolution request for `build_grid`.
#[derive(Debug, Clone, Copy)]
pub enum Resolution {
    Count(usize),
    LatLon(usize, usize),
}

/// Builds a sphere grid. n = 2 takes a node count (>= 16, even); n = 3 takes
/// latitude x longitude counts (>= 16 x 32, longitude even).
pub fn build_grid(n: usize, resolution: Resolution) -> Result<Arc<SphereGrid>> {
    match (n, resolution) {
        (2, Resolution::Count(count)) => SphereGrid::circle(count).map(Arc::new),
        (3, Resolution::LatLon(nlat, nlon)) => SphereGrid::lat_lon(nlat, nlon).map(Arc::new),
        (2, Resolution::LatLon(..)) => Err(Error::Config(
            "n = 2 expects a node count, not a lat-lon pair".into(),
        )),
        (3, Resolution::Count(_)) => Err(Error::Config(
            "n = 3 expects a lat-lon resolution pair".into(),
        )),
        (n, _) => Err(Error::Config(format!("dimension n = {n} not supported (need 2 or 3)"))),
    }
}

impl SphereGrid {
    pub fn circle(count: usize) -> Result<Self> {
        if count < 16 {
            return Err(Error::Config(format!(
                "circle grid needs at least 16 nodes, got {count}"
            )));
        }
        if count % 2 != 0 {
            return Err(Error::Config(format!(
                "circle grid needs an even node count, got {count}"
            )));
        }
        let dtheta = 2.0 * PI / count as f64;
        let thetas: Vec<f64> = (0..count).map(|i| i as f64 * dtheta).collect();
        let nodes: Vec<Vec3> = thetas.iter().map(|&t| [t.cos(), t.sin(), 0.0]).collect();
        let frames: Vec<[Vec3; 2]> = thetas
            .iter()
            .map(|&t| [[-t.sin(), t.cos(), 0.0], [0.0, 0.0, 0.0]])
            .collect();
        let weights = vec![dtheta; count];

        let half = count / 2;
        let mut cos_m = vec![0.0; (half + 1) * count];
        let mut sin_m = vec![0.0; (half + 1) * count];
        for m in 0..=half {
            for (i, &t) in thetas.iter().enumerate() {
                let mt = m as f64 * t;
                cos_m[m * count + i] = mt.cos();
                sin_m[m * count + i] = mt.sin();
            }
        }

        Ok(SphereGrid {
            dim: 2,
            nodes,
            weights,
            frames,
            kind: GridKind::Circle(CircleTables { thetas, cos_m, sin_m }),
            spec: GridSpec::Circle { nodes: count },
        })
    }

    pub fn lat_lon(nlat: usize, nlon: usize) -> Result<Self> {
        if nlat < 16 || nlon < 32 {
            return Err(Error::Config(format!(
                "lat-lon grid needs at least 16 x 32 nodes, got {nlat} x {nlon}"
            )));
        }
        if nlon % 2 != 0 {
            return Err(Error::Config(format!(
                "longitude count must be even for pole continuation, got {nlon}"
            )));
        }
        let (gl_x, gl_w) = gauss_legendre(nlat);
        // x = cos(theta) descending in theta; order rows by ascending theta.
        let mut thetas: Vec<f64> = gl_x.iter().map(|&x| x.acos()).collect();
        let mut lat_w = gl_w;
        let mut order: Vec<usize> = (0..nlat).collect();
        order.sort_by(|&a, &b| thetas[a].partial_cmp(&thetas[b]).unwrap());
        thetas = order.iter().map(|&i| thetas[i]).collect();
        lat_w = order.iter().map(|&i| lat_w[i]).collect();

        let dphi = 2.0 * PI / nlon as f64;
        let phis: Vec<f64> = (0..nlon).map(|i| i as f64 * dphi).collect();

        let mut nodes = Vec::with_capacity(nlat * nlon);
        let mut weights = Vec::with_capacity(nlat * nlon);
        let mut frames = Vec::with_capacity(nlat * nlon);
        for (j, &theta) in thetas.iter().enumerate() {
            let (st, ct) = (theta.sin(), theta.cos());
            for &phi in &phis {
                let (sp, cp) = (phi.sin(), phi.cos());
                nodes.push([st * cp, st * sp, ct]);
                weights.push(lat_w[j] * dphi);
                frames.push([[ct * cp, ct * sp, -st], [-sp, cp, 0.0]]);
            }
        }

        let ext = |e: isize| -> ExtRow {
            if e < 0 {
                let row = (-1 - e) as usize;
                ExtRow { row, antipodal_shift: true, theta: -thetas[row] }
            } else if (e as usize) < nlat {
                let row = e as usize;
                ExtRow { row, antipodal_shift: false, theta: thetas[row] }
            } else {
                let row = 2 * nlat - 1 - e as usize;
                ExtRow { row, antipodal_shift: true, theta: 2.0 * PI - thetas[row] }
            }
        };
        let mut stencils = Vec::with_capacity(nlat);
        for j in 0..nlat as isize {
            let rows = [ext(j - 2), ext(j - 1), ext(j), ext(j + 1), ext(j + 2)];
            let xs: Vec<f64> = rows.iter().map(|r| r.theta).collect();
            let w = fornberg_weights(thetas[j as usize], &xs, 2);
            let mut d1 = [0.0; 5];
            let mut d2 = [0.0; 5];
            for c in 0..5 {
                d1[c] = w[1][c];
                d2[c] = w[2][c];
            }
            stencils.push(LatStencil { rows, d1, d2 });
        }

        Ok(SphereGrid {
            dim: 3,
            nodes,
            weights,
            frames,
            kind: GridKind::LatLon(LatLonData { nlat, nlon, thetas, dphi, stencils }),
            spec: GridSpec::LatLon { nlat, nlon },
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        match spec {
            GridSpec::Circle { nodes } => Self::circle(nodes),
            GridSpec::LatLon { nlat, nlon } => Self::lat_lon(nlat, nlon),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Vec3 {
        self.nodes[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn frame(&self, i: usize) -> &[Vec3; 2] {
        &self.frames[i]
    }

    /// Azimuth angles for n = 2 grids.
    pub fn thetas(&self) -> Option<&[f64]> {
        match &self.kind {
            GridKind::Circle(t) => Some(&t.thetas),
            GridKind::LatLon(_) => None,
        }
    }

    pub fn lat_lon_shape(&self) -> Option<(usize, usize)> {
        match &self.kind {
            GridKind::LatLon(d) => Some((d.nlat, d.nlon)),
            GridKind::Circle(_) => None,
        }
    }

    /// Quadrature: sum of field values against the node weights, fixed order.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        assert_eq!(field.len(), self.len());
        let mut acc = 0.0;
        for (f, w) in field.iter().zip(self.weights.iter()) {
            acc += f * w;
        }
        acc
    }

    /// Covariant gradient components in the per-node tangent frame.
    pub fn grad(&self, field: &[f64]) -> Vec<[f64; 2]> {
        assert_eq!(field.len(), self.len());
        match &self.kind {
            GridKind::Circle(tables) => {
                let series = TrigSeries::analyze(tables, field);
                let d1 = series.synthesize_deriv(tables, 1);
                d1.into_iter().map(|d| [d, 0.0]).collect()
            }
            GridKind::LatLon(data) => {
                let ft = self.lat_deriv(data, field, DerivOrder::First);
                let fp = phi_deriv1(data, field);
                let mut out = Vec::with_capacity(field.len());
                for j in 0..data.nlat {
                    let st = data.thetas[j].sin();
                    for i in 0..data.nlon {
                        let idx = j * data.nlon + i;
                        out.push([ft[idx], fp[idx] / st]);
                    }
                }
                out
            }
        }
    }

    /// Second covariant derivatives with respect to the orthonormal frame.
    /// For n = 2 the single component sits in `[0][0]`.
    pub fn hess(&self, field: &[f64]) -> Vec<[[f64; 2]; 2]> {
        assert_eq!(field.len(), self.len());
        match &self.kind {
            GridKind::Circle(tables) => {
                let series = TrigSeries::analyze(tables, field);
                let d2 = series.synthesize_deriv(tables, 2);
                d2.into_iter()
                    .map(|d| [[d, 0.0], [0.0, 0.0]])
                    .collect()
            }
            GridKind::LatLon(data) => {
                let ft = self.lat_deriv(data, field, DerivOrder::First);
                let ftt = self.lat_deriv(data, field, DerivOrder::Second);
                let fp = phi_deriv1(data, field);
                let fpp = phi_deriv2(data, field);
                let ftp = self.lat_deriv(data, &fp, DerivOrder::First);
                let mut out = Vec::with_capacity(field.len());
                for j in 0..data.nlat {
                    let st = data.thetas[j].sin();
                    let ct = data.thetas[j].cos();
                    for i in 0..data.nlon {
                        let idx = j * data.nlon + i;
                        let h_tt = ftt[idx];
                        let h_tp = ftp[idx] / st - ct * fp[idx] / (st * st);
                        let h_pp = fpp[idx] / (st * st) + ct / st * ft[idx];
                        out.push([[h_tt, h_tp], [h_tp, h_pp]]);
                    }
                }
                out
            }
        }
    }

    /// Fourier representation of an n = 2 field (None for n = 3 grids).
    pub fn trig_series(&self, field: &[f64]) -> Option<TrigSeries> {
        match &self.kind {
            GridKind::Circle(tables) => Some(TrigSeries::analyze(tables, field)),
            GridKind::LatLon(_) => None,
        }
    }

    fn lat_deriv(&self, data: &LatLonData, field: &[f64], order: DerivOrder) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        let half = data.nlon / 2;
        for j in 0..data.nlat {
            let st = &data.stencils[j];
            let w = match order {
                DerivOrder::First => &st.d1,
                DerivOrder::Second => &st.d2,
            };
            for i in 0..data.nlon {
                let mut acc = 0.0;
                for (c, row) in st.rows.iter().enumerate() {
                    let col = if row.antipodal_shift { (i + half) % data.nlon } else { i };
                    acc += w[c] * field[row.row * data.nlon + col];
                }
                out[j * data.nlon + i] = acc;
            }
        }
        out
    }

    /// Interpolates a lat-lon node field at an arbitrary unit direction using
    /// 4x4 Lagrange stencils in the (theta, phi) chart with pole continuation.
    /// Panics if called on an n = 2 grid.
    pub fn chart_interp(&self, field: &[f64], dir: &Vec3) -> f64 {
        let data = match &self.kind {
            GridKind::LatLon(d) => d,
            GridKind::Circle(_) => panic!("chart_interp is for n = 3 grids"),
        };
        let theta = dir[2].clamp(-1.0, 1.0).acos();
        let phi = dir[1].atan2(dir[0]).rem_euclid(2.0 * PI);

        // Bracketing latitude index: rows j0-1 .. j0+2 around theta.
        let mut j0 = match data
            .thetas
            .binary_search_by(|t| t.partial_cmp(&theta).unwrap())
        {
            Ok(j) => j as isize,
            Err(j) => j as isize - 1,
        };
        j0 = j0.clamp(-1, data.nlat as isize - 1);

        let ext = |e: isize| -> ExtRow {
            if e < 0 {
                let row = (-1 - e) as usize;
                ExtRow { row, antipodal_shift: true, theta: -data.thetas[row] }
            } else if (e as usize) < data.nlat {
                let row = e as usize;
                ExtRow { row, antipodal_shift: false, theta: data.thetas[row] }
            } else {
                let row = 2 * data.nlat - 1 - e as usize;
                ExtRow { row, antipodal_shift: true, theta: 2.0 * PI - data.thetas[row] }
            }
        };

        let i0 = (phi / data.dphi).floor() as isize;
        let half = data.nlon as isize / 2;

        let mut row_vals = [0.0; 4];
        let mut row_thetas = [0.0; 4];
        for (r, e) in (j0 - 1..=j0 + 2).enumerate() {
            let rowinfo = ext(e);
            row_thetas[r] = rowinfo.theta;
            let mut pts = [0.0; 4];
            let mut xs = [0.0; 4];
            for (c, ii) in (i0 - 1..=i0 + 2).enumerate() {
                let mut col = ii.rem_euclid(data.nlon as isize);
                xs[c] = ii as f64 * data.dphi;
                if rowinfo.antipodal_shift {
                    col = (col + half) % data.nlon as isize;
                }
                pts[c] = field[rowinfo.row * data.nlon + col as usize];
            }
            row_vals[r] = lagrange4(&xs, &pts, phi);
        }
        lagrange4(&row_thetas, &row_vals, theta)
    }
}

#[derive(Clone, Copy)]
enum DerivOrder {
    First,
    Second,
}

fn phi_deriv1(data: &LatLonData, field: &[f64]) -> Vec<f64> {
    let n = data.nlon;
    let c = 1.0 / (12.0 * data.dphi);
    let mut out = vec![0.0; field.len()];
    for j in 0..data.nlat {
        let base = j * n;
        for i in 0..n {
            let m2 = field[base + (i + n - 2) % n];
            let m1 = field[base + (i + n - 1) % n];
            let p1 = field[base + (i + 1) % n];
            let p2 = field[base + (i + 2) % n];
            out[base + i] = c * (m2 - 8.0 * m1 + 8.0 * p1 - p2);
        }
    }
    out
}

fn phi_deriv2(data: &LatLonData, field: &[f64]) -> Vec<f64> {
    let n = data.nlon;
    let c = 1.0 / (12.0 * data.dphi * data.dphi);
    let mut out = vec![0.0; field.len()];
    for j in 0..data.nlat {
        let base = j * n;
        for i in 0..n {
            let m2 = field[base + (i + n - 2) % n];
            let m1 = field[base + (i + n - 1) % n];
            let f0 = field[base + i];
            let p1 = field[base + (i + 1) % n];
            let p2 = field[base + (i + 2) % n];
            out[base + i] = c * (-m2 + 16.0 * m1 - 30.0 * f0 + 16.0 * p1 - p2);
        }
    }
    out
}

fn lagrange4(xs: &[f64; 4], ys: &[f64; 4], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        let mut l = ys[i];
        for j in 0..4 {
            if i != j {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += l;
    }
    acc
}

/// Finite-difference weights for derivatives up to `max_order` of a function
/// sampled at `xs`, evaluated at `x0` (Fornberg's recursion).
pub fn fornberg_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for k in 0..n {
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        xs[k] = x;
        ws[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Real Fourier series of a periodic field sampled on a uniform circle grid.
///
/// Coefficient index m runs to N/2; evaluation and derivatives are available
/// at arbitrary angles, which is what the ray/Gauss-map refinements and the
/// field resampling paths rely upon.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigSeries {
    pub(crate) fn analyze(tables: &CircleTables, field: &[f64]) -> Self {
        let n = tables.thetas.len();
        let half = n / 2;
        let mut a = vec![0.0; half + 1];
        let mut b = vec![0.0; half + 1];
        for m in 0..=half {
            let mut ca = 0.0;
            let mut cb = 0.0;
            let cm = &tables.cos_m[m * n..(m + 1) * n];
            let sm = &tables.sin_m[m * n..(m + 1) * n];
            for i in 0..n {
                ca += field[i] * cm[i];
                cb += field[i] * sm[i];
            }
            let norm = if m == 0 || m == half { 1.0 / n as f64 } else { 2.0 / n as f64 };
            a[m] = ca * norm;
            b[m] = cb * norm;
        }
        b[0] = 0.0;
        if n % 2 == 0 {
            b[half] = 0.0;
        }
        TrigSeries { a, b }
    }

    /// Builds a series directly from coefficients (a0, cos terms, sin terms).
    pub fn from_coefficients(a: Vec<f64>, b: Vec<f64>) -> Self {
        assert_eq!(a.len(), b.len());
        TrigSeries { a, b }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let (c1, s1) = (theta.cos(), theta.sin());
        let mut cm = 1.0;
        let mut sm = 0.0;
        let mut acc = 0.0;
        for m in 0..self.a.len() {
            acc += self.a[m] * cm + self.b[m] * sm;
            let c_next = cm * c1 - sm * s1;
            sm = sm * c1 + cm * s1;
            cm = c_next;
        }
        acc
    }

    pub fn eval_deriv(&self, theta: f64) -> f64 {
        let (c1, s1) = (theta.cos(), theta.sin());
        let mut cm = 1.0;
        let mut sm = 0.0;
        let mut acc = 0.0;
        for m in 0..self.a.len() {
            let mf = m as f64;
            acc += mf * (-self.a[m] * sm + self.b[m] * cm);
            let c_next = cm * c1 - sm * s1;
            sm = sm * c1 + cm * s1;
            cm = c_next;
        }
        acc
    }

    pub fn eval_second(&self, theta: f64) -> f64 {
        let (c1, s1) = (theta.cos(), theta.sin());
        let mut cm = 1.0;
        let mut sm = 0.0;
        let mut acc = 0.0;
        for m in 0..self.a.len() {
            let m2 = (m * m) as f64;
            acc -= m2 * (self.a[m] * cm + self.b[m] * sm);
            let c_next = cm * c1 - sm * s1;
            sm = sm * c1 + cm * s1;
            cm = c_next;
        }
        acc
    }

    fn synthesize_deriv(&self, tables: &CircleTables, order: usize) -> Vec<f64> {
        let n = tables.thetas.len();
        let half = n / 2;
        let mut out = vec![0.0; n];
        for m in 1..=half {
            let mf = m as f64;
            let (ca, cb) = match order {
                1 => (self.b[m] * mf, -self.a[m] * mf),
                2 => (-self.a[m] * mf * mf, -self.b[m] * mf * mf),
                _ => unreachable!(),
            };
            let cm = &tables.cos_m[m * n..(m + 1) * n];
            let sm = &tables.sin_m[m * n..(m + 1) * n];
            for i in 0..n {
                out[i] += ca * cm[i] + cb * sm[i];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::la::dot;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn circle_weights_sum_to_circumference() {
        let g = SphereGrid::circle(256).unwrap();
        close(g.integrate(&vec![1.0; g.len()]), 2.0 * PI, 1e-10);
    }

    #[test]
    fn latlon_weights_sum_to_sphere_area() {
        let g = SphereGrid::lat_lon(32, 64).unwrap();
        assert_eq!(g.len(), 2048);
        close(g.integrate(&vec![1.0; g.len()]), 4.0 * PI, 1e-10);
    }

    #[test]
    fn below_minimum_resolution_is_a_config_error() {
        assert!(SphereGrid::circle(8).is_err());
        assert!(SphereGrid::lat_lon(8, 64).is_err());
        assert!(SphereGrid::lat_lon(16, 31).is_err());
    }

    #[test]
    fn nodes_are_unit_and_frames_orthonormal() {
        for g in [SphereGrid::circle(64).unwrap(), SphereGrid::lat_lon(16, 32).unwrap()] {
            for i in 0..g.len() {
                let x = g.node(i);
                close(dot(&x, &x), 1.0, 1e-12);
                let f = g.frame(i);
                close(dot(&f[0], &x), 0.0, 1e-12);
                close(dot(&f[0], &f[0]), 1.0, 1e-12);
                if g.dimension() == 3 {
                    close(dot(&f[1], &x), 0.0, 1e-12);
                    close(dot(&f[1], &f[1]), 1.0, 1e-12);
                    close(dot(&f[0], &f[1]), 0.0, 1e-12);
                }
            }
        }
    }

    #[test]
    fn integrate_cos_squared() {
        let g = SphereGrid::circle(256).unwrap();
        let f: Vec<f64> = g.thetas().unwrap().iter().map(|t| t.cos().powi(2)).collect();
        close(g.integrate(&f), PI, 1e-10);
    }

    #[test]
    fn circle_gradient_of_constant_and_modes() {
        let g = SphereGrid::circle(256).unwrap();
        let thetas = g.thetas().unwrap().to_vec();

        let grad_const = g.grad(&vec![3.5; g.len()]);
        for d in &grad_const {
            close(d[0], 0.0, 1e-10);
        }

        let f: Vec<f64> = thetas.iter().map(|t| t.cos()).collect();
        let grad = g.grad(&f);
        for (i, t) in thetas.iter().enumerate() {
            close(grad[i][0], -t.sin(), 1e-10);
        }

        let f2: Vec<f64> = thetas.iter().map(|t| (2.0 * t).cos()).collect();
        let grad2 = g.grad(&f2);
        for (i, t) in thetas.iter().enumerate() {
            close(grad2[i][0], -2.0 * (2.0 * t).sin(), 1e-10);
        }
    }

    #[test]
    fn circle_spectral_accuracy_to_quarter_resolution() {
        let g = SphereGrid::circle(256).unwrap();
        let thetas = g.thetas().unwrap().to_vec();
        for m in [1usize, 16, 64] {
            let f: Vec<f64> = thetas.iter().map(|t| (m as f64 * t).cos()).collect();
            let grad = g.grad(&f);
            for (i, t) in thetas.iter().enumerate() {
                close(grad[i][0], -(m as f64) * (m as f64 * t).sin(), 1e-8);
            }
        }
    }

    #[test]
    fn circle_hessian_point_support_gives_zero_omega() {
        // h(theta) = cos(theta) supports the point e1: h'' + h = 0.
        let g = SphereGrid::circle(128).unwrap();
        let thetas = g.thetas().unwrap().to_vec();
        let f: Vec<f64> = thetas.iter().map(|t| t.cos()).collect();
        let hess = g.hess(&f);
        for (i, h2) in hess.iter().enumerate() {
            close(h2[0][0] + f[i], 0.0, 1e-10);
        }
    }

    #[test]
    fn circle_hessian_mode_two() {
        // h = R + eps cos(2 theta): omega = h'' + h = R - 3 eps cos(2 theta).
        let g = SphereGrid::circle(128).unwrap();
        let thetas = g.thetas().unwrap().to_vec();
        let (r, eps) = (2.0, 0.25);
        let f: Vec<f64> = thetas.iter().map(|t| r + eps * (2.0 * t).cos()).collect();
        let hess = g.hess(&f);
        for (i, t) in thetas.iter().enumerate() {
            close(hess[i][0][0] + f[i], r - 3.0 * eps * (2.0 * t).cos(), 1e-9);
        }
    }

    #[test]
    fn circle_affine_field_has_constant_omega() {
        let g = SphereGrid::circle(96).unwrap();
        let thetas = g.thetas().unwrap().to_vec();
        let (a, b, c) = (1.7, 0.4, -0.3);
        let f: Vec<f64> = thetas.iter().map(|t| a + b * t.cos() + c * t.sin()).collect();
        let hess = g.hess(&f);
        for (i, h2) in hess.iter().enumerate() {
            close(h2[0][0] + f[i], a, 1e-8);
        }
    }

    #[test]
    fn closed_integral_of_gradient_component_vanishes() {
        let g = SphereGrid::circle(128).unwrap();
        let thetas = g.thetas().unwrap().to_vec();
        let f: Vec<f64> = thetas
            .iter()
            .map(|t| (t.cos() + 0.3 * (3.0 * t).sin()).exp())
            .collect();
        let grad = g.grad(&f);
        let comp: Vec<f64> = grad.iter().map(|d| d[0]).collect();
        close(g.integrate(&comp), 0.0, 1e-10);
    }

    #[test]
    fn latlon_gradient_of_low_degree_harmonics() {
        let g = SphereGrid::lat_lon(48, 96).unwrap();
        // f = x3 = cos(theta): grad = -sin(theta) e_theta.
        let f: Vec<f64> = g.nodes().iter().map(|x| x[2]).collect();
        let grad = g.grad(&f);
        let mut max_err: f64 = 0.0;
        for (i, x) in g.nodes().iter().enumerate() {
            let st = (1.0 - x[2] * x[2]).sqrt();
            max_err = max_err.max((grad[i][0] + st).abs());
            max_err = max_err.max(grad[i][1].abs());
        }
        assert!(max_err < 1e-5, "max_err = {max_err:.3e}");

        // Degree-4 longitude mode on a finer grid: 4th-order stencils need
        // roughly 144 latitudes to push a degree-4 field under 1e-5.
        let g = SphereGrid::lat_lon(144, 288).unwrap();
        let f4: Vec<f64> = g
            .nodes()
            .iter()
            .map(|x| {
                let st2 = 1.0 - x[2] * x[2];
                let phi = x[1].atan2(x[0]);
                st2 * st2 * (4.0 * phi).cos()
            })
            .collect();
        let grad4 = g.grad(&f4);
        let mut max_err4: f64 = 0.0;
        for (i, x) in g.nodes().iter().enumerate() {
            let theta = x[2].clamp(-1.0, 1.0).acos();
            let (st, ct) = (theta.sin(), theta.cos());
            let phi = x[1].atan2(x[0]);
            let exact_t = 4.0 * st.powi(3) * ct * (4.0 * phi).cos();
            let exact_p = -4.0 * st.powi(4) * (4.0 * phi).sin() / st;
            max_err4 = max_err4.max((grad4[i][0] - exact_t).abs());
            max_err4 = max_err4.max((grad4[i][1] - exact_p).abs());
        }
        assert!(max_err4 < 1e-5, "max_err4 = {max_err4:.3e}");
    }

    #[test]
    fn latlon_omega_vanishes_for_point_support() {
        // h = x . e, e fixed unit vector: omega = hess + h I = 0.
        let g = SphereGrid::lat_lon(32, 64).unwrap();
        let e = crate::la::normalize(&[0.3, -0.5, 0.81]);
        let f: Vec<f64> = g.nodes().iter().map(|x| dot(x, &e)).collect();
        let hess = g.hess(&f);
        let mut max_err: f64 = 0.0;
        for (i, h2) in hess.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    let omega = h2[a][b] + if a == b { f[i] } else { 0.0 };
                    max_err = max_err.max(omega.abs());
                }
            }
        }
        assert!(max_err < 2e-4, "max_err = {max_err:.3e}");
    }

    #[test]
    fn chart_interp_reproduces_smooth_fields() {
        let g = SphereGrid::lat_lon(32, 64).unwrap();
        let f: Vec<f64> = g
            .nodes()
            .iter()
            .map(|x| 1.0 + 0.3 * x[0] + 0.2 * x[2] * x[2])
            .collect();
        let dirs = [
            crate::la::normalize(&[0.2, 0.7, 0.6]),
            crate::la::normalize(&[-0.533, 0.2, -0.8]),
            crate::la::normalize(&[0.01, -0.02, 0.999]),
        ];
        for d in dirs {
            let exact = 1.0 + 0.3 * d[0] + 0.2 * d[2] * d[2];
            close(g.chart_interp(&f, &d), exact, 5e-5);
        }
    }

    #[test]
    fn fornberg_matches_centered_weights() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg_weights(0.0, &xs, 2);
        let expected_d1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w[1].iter().zip(expected_d1.iter()) {
            close(*a, *b, 1e-13);
        }
        let expected_d2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w[2].iter().zip(expected_d2.iter()) {
            close(*a, *b, 1e-13);
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (xs, ws) = gauss_legendre(16);
        let int_x2: f64 = xs.iter().zip(ws.iter()).map(|(x, w)| x * x * w).sum();
        close(int_x2, 2.0 / 3.0, 1e-13);
        let int_x10: f64 = xs.iter().zip(ws.iter()).map(|(x, w)| x.powi(10) * w).sum();
        close(int_x10, 2.0 / 11.0, 1e-13);
    }
}
