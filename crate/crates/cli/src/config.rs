//! JSON experiment configuration and its resolution into core objects.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use torlab_core::body::{Body, SigmaConvention};
use torlab_core::flow::TorsionBackendCfg;
use torlab_core::la::{dot, normalize, Vec3};
use torlab_core::sphere::{GridSpec, SphereGrid};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub p: Option<f64>,
    /// Required for k >= 2 where the two conventions genuinely differ.
    #[serde(default)]
    pub sigma_convention: Option<SigmaConvention>,
    pub body: BodySpec,
    #[serde(default)]
    pub body2: Option<BodySpec>,
    #[serde(default)]
    pub body3: Option<BodySpec>,
    #[serde(default)]
    pub f: Option<FieldSpec>,
    pub sphere_resolution: SphereResSpec,
    #[serde(default)]
    pub cartesian_cells: Option<usize>,
    #[serde(default)]
    pub polar_layers: Option<usize>,
    /// "polar" (n = 2 default) or "cartesian".
    #[serde(default)]
    pub torsion_backend: Option<String>,
    #[serde(default)]
    pub flow: Option<FlowParams>,
    #[serde(default)]
    pub measure: Option<MeasureParams>,
    #[serde(default)]
    pub audits: Option<Vec<AuditSpec>>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dump_u: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SphereResSpec {
    Nodes(usize),
    LatLon { nlat: usize, nlon: usize },
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Ball {
        r: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// Support function h = a0 + sum_m cos[m-1] cos(m theta) + sin[m-1] sin(m theta).
    Fourier {
        a0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { value: f64 },
    /// n = 2 Fourier coefficients.
    Fourier {
        a0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// n = 3 sum of Gaussian cap bumps on a constant base.
    CapBumps { base: f64, bumps: Vec<CapBump> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapBump {
    pub axis: [f64; 3],
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    #[serde(default = "FlowParams::default_dt0")]
    pub dt0: f64,
    #[serde(default = "FlowParams::default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "FlowParams::default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "FlowParams::default_tol")]
    pub tol: f64,
    #[serde(default = "FlowParams::default_t_max")]
    pub t_max: f64,
    #[serde(default = "FlowParams::default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "FlowParams::default_phi_guard")]
    pub phi_step_guard: f64,
    #[serde(default = "FlowParams::default_h_floor")]
    pub h_floor: f64,
    #[serde(default = "FlowParams::default_h_ceil")]
    pub h_ceil: f64,
    #[serde(default = "FlowParams::default_omega_floor")]
    pub omega_floor: f64,
    #[serde(default = "FlowParams::default_omega_ceil")]
    pub omega_ceil: f64,
    #[serde(default = "FlowParams::default_true")]
    pub convergence_mode: bool,
    #[serde(default)]
    pub snapshot_every: usize,
}

impl FlowParams {
    fn default_dt0() -> f64 {
        1e-3
    }
    fn default_dt_min() -> f64 {
        1e-10
    }
    fn default_dt_max() -> f64 {
        5e-3
    }
    fn default_tol() -> f64 {
        1e-2
    }
    fn default_t_max() -> f64 {
        30.0
    }
    fn default_max_steps() -> usize {
        200_000
    }
    fn default_phi_guard() -> f64 {
        1e-3
    }
    fn default_h_floor() -> f64 {
        1e-4
    }
    fn default_h_ceil() -> f64 {
        1e4
    }
    fn default_omega_floor() -> f64 {
        1e-8
    }
    fn default_omega_ceil() -> f64 {
        1e8
    }
    fn default_true() -> bool {
        true
    }
}

impl Default for FlowParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureParams {
    pub partition: PartitionSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    WholeSphere,
    Hemispheres { axis: [f64; 3] },
    AngleBins { bins: usize },
    /// One region per facet normal of a polygon body.
    FacetFans,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    /// prop32 | thm310 | cor33 | cor311_linear | cor311_log | cor312
    pub id: String,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub pert: Option<FieldSpec>,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> anyhow::Result<()> {
        if self.n != 2 && self.n != 3 {
            bail!("field 'n': dimension must be 2 or 3, got {}", self.n);
        }
        if self.k < 1 || self.k > self.n - 1 {
            bail!("field 'k': k must satisfy 1\u{2264}k\u{2264}n\u{2212}1");
        }
        if self.k >= 2 && self.sigma_convention.is_none() {
            bail!(
                "field 'sigma_convention': required for k >= 2 (the elementary and mean \
                 conventions genuinely differ there)"
            );
        }
        match (self.n, self.sphere_resolution) {
            (2, SphereResSpec::Nodes(_)) | (3, SphereResSpec::LatLon { .. }) => {}
            (2, _) => bail!("field 'sphere_resolution': n = 2 expects a node count"),
            (_, _) => bail!("field 'sphere_resolution': n = 3 expects {{\"nlat\": .., \"nlon\": ..}}"),
        }
        Ok(())
    }

    pub fn convention(&self) -> SigmaConvention {
        self.sigma_convention.unwrap_or(SigmaConvention::Elementary)
    }

    pub fn build_grid(&self) -> anyhow::Result<Arc<SphereGrid>> {
        let spec = match self.sphere_resolution {
            SphereResSpec::Nodes(nodes) => GridSpec::Circle { nodes },
            SphereResSpec::LatLon { nlat, nlon } => GridSpec::LatLon { nlat, nlon },
        };
        Ok(Arc::new(SphereGrid::from_spec(spec)?))
    }

    pub fn build_body(&self, grid: &Arc<SphereGrid>, spec: &BodySpec) -> anyhow::Result<Body> {
        build_body(grid, spec, self.convention())
    }

    pub fn density(&self, grid: &Arc<SphereGrid>) -> anyhow::Result<Vec<f64>> {
        match &self.f {
            None => Ok(vec![1.0; grid.len()]),
            Some(spec) => build_field(grid, spec),
        }
    }

    pub fn backend(&self) -> anyhow::Result<TorsionBackendCfg> {
        let name = match &self.torsion_backend {
            Some(s) => s.as_str(),
            None => {
                if self.n == 2 {
                    "polar"
                } else {
                    "cartesian"
                }
            }
        };
        match name {
            "polar" => {
                if self.n != 2 {
                    bail!("field 'torsion_backend': the polar backend is n = 2 only");
                }
                Ok(TorsionBackendCfg::Polar { layers: self.polar_layers.unwrap_or(64) })
            }
            "cartesian" => Ok(TorsionBackendCfg::Cartesian {
                cells: self.cartesian_cells.unwrap_or(if self.n == 2 { 256 } else { 48 }),
            }),
            other => bail!("field 'torsion_backend': unknown backend '{other}'"),
        }
    }

    pub fn cartesian_cells(&self) -> usize {
        self.cartesian_cells.unwrap_or(if self.n == 2 { 256 } else { 64 })
    }

    /// Compact one-line JSON echo embedded in every output for provenance.
    pub fn provenance(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

pub fn build_body(
    grid: &Arc<SphereGrid>,
    spec: &BodySpec,
    convention: SigmaConvention,
) -> anyhow::Result<Body> {
    let body = match spec {
        BodySpec::Ball { r, scale } => {
            let rr = r * scale;
            Body::ball(grid.clone(), rr, convention)?
        }
        BodySpec::Ellipse { a, b, scale } => {
            if grid.dimension() != 2 {
                bail!("field 'body': ellipse bodies need n = 2");
            }
            Body::ellipse(grid.clone(), a * scale, b * scale, convention)?
        }
        BodySpec::Ellipsoid { a, b, c, scale } => {
            if grid.dimension() != 3 {
                bail!("field 'body': ellipsoid bodies need n = 3");
            }
            Body::ellipsoid(grid.clone(), a * scale, b * scale, c * scale, convention)?
        }
        BodySpec::Fourier { a0, cos, sin, scale } => {
            if grid.dimension() != 2 {
                bail!("field 'body': fourier support bodies need n = 2");
            }
            let (a0, cos, sin, scale) = (*a0, cos.clone(), sin.clone(), *scale);
            Body::from_support_fn(
                grid.clone(),
                move |x| {
                    let t = x[1].atan2(x[0]);
                    let mut h = a0;
                    for (m, c) in cos.iter().enumerate() {
                        h += c * ((m as f64 + 1.0) * t).cos();
                    }
                    for (m, s) in sin.iter().enumerate() {
                        h += s * ((m as f64 + 1.0) * t).sin();
                    }
                    h * scale
                },
                convention,
            )?
        }
        BodySpec::Polygon { vertices } => {
            Body::polygon(grid.clone(), vertices.clone(), convention)?
        }
    };
    Ok(body)
}

pub fn build_field(grid: &Arc<SphereGrid>, spec: &FieldSpec) -> anyhow::Result<Vec<f64>> {
    match spec {
        FieldSpec::Constant { value } => Ok(vec![*value; grid.len()]),
        FieldSpec::Fourier { a0, cos, sin } => {
            if grid.dimension() != 2 {
                bail!("field 'f': fourier densities need n = 2");
            }
            Ok(grid
                .nodes()
                .iter()
                .map(|x| {
                    let t = x[1].atan2(x[0]);
                    let mut v = *a0;
                    for (m, c) in cos.iter().enumerate() {
                        v += c * ((m as f64 + 1.0) * t).cos();
                    }
                    for (m, s) in sin.iter().enumerate() {
                        v += s * ((m as f64 + 1.0) * t).sin();
                    }
                    v
                })
                .collect())
        }
        FieldSpec::CapBumps { base, bumps } => {
            if grid.dimension() != 3 {
                bail!("field 'f': cap-bump densities need n = 3");
            }
            let bumps: Vec<(Vec3, f64, f64)> = bumps
                .iter()
                .map(|b| (normalize(&b.axis), b.width, b.amplitude))
                .collect();
            Ok(grid
                .nodes()
                .iter()
                .map(|x| {
                    let mut v = *base;
                    for (axis, width, amp) in &bumps {
                        let ang = dot(x, axis).clamp(-1.0, 1.0).acos();
                        v += amp * (-(ang / width) * (ang / width)).exp();
                    }
                    v
                })
                .collect())
        }
    }
}
