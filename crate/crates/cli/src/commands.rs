//! Command implementations: each consumes a resolved configuration and writes
//! its artifacts (JSON summaries, CSV tables, SVG plots) into the output
//! directory. Every file starts with the full resolved configuration for
//! provenance; identical configs and seeds reproduce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde_json::json;

use torlab_core::body::{Body, Partition};
use torlab_core::flow::{self, FlowConfig, TorsionBackendCfg};
use torlab_core::functionals::{
    crofton_audit, dual_measure, dual_rigidity_q, polytope_atoms, rigidity_dual_form, rigidity_tk,
};
use torlab_core::torsion::{solve_khessian, solve_poisson_polar, TorsionSolution};
use torlab_core::variation::{
    audit_cor311_linear, audit_cor311_log, audit_cor312, audit_cor33, audit_prop32, audit_thm310,
    AuditRecord,
};

use crate::config::{build_field, ExperimentConfig, FieldSpec, PartitionSpec};

pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
}

impl Ctx {
    pub fn new(mut cfg: ExperimentConfig, out: Option<PathBuf>, seed: Option<u64>) -> anyhow::Result<Ctx> {
        if let Some(s) = seed {
            cfg.seed = Some(s);
        }
        let out = out
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("torlab-out"));
        std::fs::create_dir_all(&out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        Ok(Ctx { cfg, out })
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.out.join(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn csv_header(&self) -> String {
        format!("# config: {}\n", self.cfg.provenance())
    }

    fn solve(&self, body: &Body) -> anyhow::Result<TorsionSolution> {
        Ok(match self.cfg.backend()? {
            TorsionBackendCfg::Polar { layers } => solve_poisson_polar(body, layers, None)?,
            TorsionBackendCfg::Cartesian { cells } => solve_khessian(body, self.cfg.k, cells)?,
        })
    }
}

pub fn solve_torsion(ctx: &Ctx) -> anyhow::Result<()> {
    let grid = ctx.cfg.build_grid()?;
    let body = ctx.cfg.build_body(&grid, &ctx.cfg.body)?;
    let k = ctx.cfg.k;
    let sol = solve_khessian(&body, k, ctx.cfg.cartesian_cells())?;

    let rig = rigidity_tk(&body, &sol, k);
    let dual = rigidity_dual_form(&body, &sol, k);
    let g_min = sol.g_support.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = sol.g_support.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pohozaev_rel = rig
        .as_ref()
        .map(|r| ((r.t_tilde - sol.neg_u_integral) / sol.neg_u_integral).abs())
        .ok();

    let summary = json!({
        "config": serde_json::to_value(&ctx.cfg)?,
        "u_min": sol.u_min,
        "residual": sol.residual,
        "newton_iterations": sol.newton_iterations,
        "boundary_gradient": {"min": g_min, "max": g_max},
        "t_tilde_boundary_form": rig.as_ref().map(|r| r.t_tilde).ok(),
        "t_k": rig.as_ref().map(|r| r.t).ok(),
        "t_tilde_radial_form": dual,
        "neg_u_integral": sol.neg_u_integral,
        "pohozaev_rel_discrepancy": pohozaev_rel,
    });
    let path = ctx.write_json("torsion_summary.json", &summary)?;
    println!("wrote {}", path.display());

    if ctx.cfg.dump_u {
        if let Some(cart) = sol.cartesian() {
            let mut text = ctx.csv_header();
            text.push_str(&cart.structured_text());
            let path = ctx.write("u_grid.txt", &text)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Exit code 3 signals a run that finished without reaching the residual
/// tolerance; stiffness and validation problems surface as hard errors.
pub fn flow(ctx: &Ctx) -> anyhow::Result<i32> {
    let grid = ctx.cfg.build_grid()?;
    let body = ctx.cfg.build_body(&grid, &ctx.cfg.body)?;
    let f = ctx.cfg.density(&grid)?;
    let params = ctx.cfg.flow.clone().unwrap_or_default();
    let p = ctx
        .cfg
        .p
        .ok_or_else(|| anyhow::anyhow!("field 'p': required for flow runs"))?;
    let fcfg = FlowConfig {
        k: ctx.cfg.k,
        p,
        f: f.clone(),
        dt0: params.dt0,
        dt_min: params.dt_min,
        dt_max: params.dt_max,
        tol: params.tol,
        t_max: params.t_max,
        max_steps: params.max_steps,
        backend: ctx.cfg.backend()?,
        convergence_mode: params.convergence_mode,
        phi_step_guard: params.phi_step_guard,
        h_floor: params.h_floor,
        h_ceil: params.h_ceil,
        omega_floor: params.omega_floor,
        omega_ceil: params.omega_ceil,
        snapshot_every: if params.snapshot_every > 0 {
            params.snapshot_every
        } else {
            (params.max_steps / 8).max(1)
        },
    };
    let result = flow::run(body, &fcfg)?;

    let mut csv = ctx.csv_header();
    csv.push_str("t,dt,eta,phi,Q,residual,h_min,h_max,grad_max,kappa_min,kappa_max,dQ_sign,flags\n");
    for r in &result.records {
        let flags = format!(
            "{}{}{}",
            r.flags.phi_drift as u8, r.flags.h_bounds as u8, r.flags.curvature_pinch as u8
        );
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t, r.dt, r.eta, r.phi, r.q, r.residual, r.h_min, r.h_max, r.grad_max, r.kappa_min,
            r.kappa_max, r.dq_sign, flags
        )?;
    }
    let path = ctx.write("flow_series.csv", &csv)?;
    println!("wrote {}", path.display());

    let snapshot = result.final_state.body.snapshot();
    let body_json = json!({
        "config": serde_json::to_value(&ctx.cfg)?,
        "body": serde_json::to_value(&snapshot)?,
    });
    let path = ctx.write_json("final_body.json", &body_json)?;
    println!("wrote {}", path.display());

    let any_flag = result.records.iter().any(|r| r.flags.any());
    let summary = json!({
        "config": serde_json::to_value(&ctx.cfg)?,
        "converged": result.converged,
        "steps": result.steps,
        "t_final": result.final_state.t,
        "residual_final": result.final_state.residual,
        "eta_final": result.final_state.eta,
        "tau": result.tau,
        "phi_initial": result.records.first().map(|r| r.phi),
        "phi_final": result.records.last().map(|r| r.phi),
        "h_min_final": result.final_state.body.support().min_value(),
        "h_max_final": result.final_state.body.support().max_value(),
        "monitor_flags_raised": any_flag,
    });
    let path = ctx.write_json("flow_summary.json", &summary)?;
    println!("wrote {}", path.display());

    if grid.dimension() == 2 {
        let svg = polar_svg(&grid, &result.snapshots, &f, &ctx.cfg.provenance());
        let path = ctx.write("flow_polar.svg", &svg)?;
        println!("wrote {}", path.display());
    }

    Ok(if result.converged { 0 } else { 3 })
}

/// Hand-emitted polar plot: the support graphs r = h(theta, t) at sampled
/// times plus the density graph r = f(theta), normalized into a fixed frame.
fn polar_svg(
    grid: &torlab_core::sphere::SphereGrid,
    snapshots: &[(f64, Vec<f64>)],
    f: &[f64],
    provenance: &str,
) -> String {
    let thetas = grid.thetas().expect("n = 2 grid");
    let mut r_max: f64 = 0.0;
    for (_, h) in snapshots {
        for v in h {
            r_max = r_max.max(*v);
        }
    }
    for v in f {
        r_max = r_max.max(*v);
    }
    let size = 640.0;
    let pad = 20.0;
    let s = (size / 2.0 - pad) / r_max;
    let cx = size / 2.0;
    let cy = size / 2.0;
    let poly = |vals: &[f64]| -> String {
        let mut pts = String::new();
        for (i, &t) in thetas.iter().enumerate() {
            let r = vals[i] * s;
            let _ = write!(pts, "{:.2},{:.2} ", cx + r * t.cos(), cy - r * t.sin());
        }
        // close the loop
        let r0 = vals[0] * s;
        let _ = write!(pts, "{:.2},{:.2}", cx + r0, cy);
        pts
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {size} {size}\">"
    );
    let _ = writeln!(svg, "<!-- config: {} -->", provenance.replace("--", "- -"));
    let _ = writeln!(
        svg,
        "<rect width=\"{size}\" height=\"{size}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>",
        poly(f)
    );
    let n_snap = snapshots.len();
    for (i, (t, h)) in snapshots.iter().enumerate() {
        let shade = if n_snap > 1 {
            40 + (180 * i) / (n_snap - 1)
        } else {
            220
        };
        let color = format!("#{:02x}{:02x}{:02x}", 255 - shade, 32, shade);
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"><title>t = {t}</title></polyline>",
            poly(h)
        );
    }
    let _ = writeln!(svg, "</svg>");
    svg
}

pub fn measure(ctx: &Ctx) -> anyhow::Result<()> {
    let grid = ctx.cfg.build_grid()?;
    let body = ctx.cfg.build_body(&grid, &ctx.cfg.body)?;
    let k = ctx.cfg.k;
    let p = ctx
        .cfg
        .p
        .ok_or_else(|| anyhow::anyhow!("field 'p': required for measure runs"))?;
    let n = body.dimension() as f64;
    let sol = ctx.solve(&body)?;

    let params = ctx
        .cfg
        .measure
        .clone()
        .unwrap_or(crate::config::MeasureParams { partition: PartitionSpec::WholeSphere });

    if p == n && !matches!(params.partition, PartitionSpec::WholeSphere) {
        bail!(
            "partition masses are defined for p \u{2260} n only; at p = n request the \
             whole-sphere total (log branch) instead"
        );
    }

    let mut csv = ctx.csv_header();
    csv.push_str("region_id,solid_angle,mass\n");
    let total;
    if p == n {
        total = dual_rigidity_q(&body, &sol, k, p);
        let omega_total: f64 = grid.weights().iter().sum();
        writeln!(csv, "log_branch_total,{},{}", omega_total, total)?;
    } else {
        let partition = match &params.partition {
            PartitionSpec::WholeSphere => Partition::whole_sphere(),
            PartitionSpec::Hemispheres { axis } => {
                Partition::hemispheres(torlab_core::la::normalize(axis))
            }
            PartitionSpec::AngleBins { bins } => {
                if grid.dimension() != 2 {
                    bail!("angle-bin partitions need n = 2");
                }
                Partition::angle_bins(*bins)
            }
            PartitionSpec::FacetFans => Partition::facet_caps(&body)?,
        };
        let m = dual_measure(&body, &sol, k, p, &partition)?;
        total = m.total;
        for e in &m.entries {
            let label = if e.region < partition.regions.len() {
                format!("region_{}", e.region)
            } else {
                "complement".to_string()
            };
            writeln!(csv, "{label},{},{}", e.solid_angle, e.mass)?;
        }
    }
    let path = ctx.write("measure.csv", &csv)?;
    println!("wrote {}", path.display());

    let mut atoms_json = serde_json::Value::Null;
    if body.is_polytope() && p != n {
        let atoms = polytope_atoms(&body, &sol, k, p)?;
        atoms_json = json!(atoms
            .iter()
            .map(|(nrm, mass)| json!({"normal": nrm, "mass": mass}))
            .collect::<Vec<_>>());
    }
    let summary = json!({
        "config": serde_json::to_value(&ctx.cfg)?,
        "total_mass": total,
        "dual_rigidity": dual_rigidity_q(&body, &sol, k, p),
        "atoms": atoms_json,
    });
    let path = ctx.write_json("measure_summary.json", &summary)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn variation_audit(ctx: &Ctx) -> anyhow::Result<()> {
    let grid = ctx.cfg.build_grid()?;
    let body = ctx.cfg.build_body(&grid, &ctx.cfg.body)?;
    let k = ctx.cfg.k;
    let backend = ctx.cfg.backend()?;
    let solver = move |b: &Body| -> torlab_core::Result<TorsionSolution> {
        match backend {
            TorsionBackendCfg::Polar { layers } => solve_poisson_polar(b, layers, None),
            TorsionBackendCfg::Cartesian { cells } => solve_khessian(b, k, cells),
        }
    };
    let specs = ctx
        .cfg
        .audits
        .clone()
        .ok_or_else(|| anyhow::anyhow!("field 'audits': required for variation-audit runs"))?;

    let default_pert = FieldSpec::Constant { value: 1.0 };
    let mut records: Vec<AuditRecord> = Vec::new();
    for spec in &specs {
        let p = spec.p.or(ctx.cfg.p).unwrap_or(-1.0);
        let pert = build_field(&grid, spec.pert.as_ref().unwrap_or(&default_pert))?;
        let rec = match spec.id.as_str() {
            "prop32" => audit_prop32(&body, &pert, k, &solver)?,
            "thm310" => audit_thm310(&body, &pert, k, p, &solver)?,
            "cor33" => {
                let b2 = body2(ctx, &grid)?;
                audit_cor33(&body, &b2, k, p, &solver)?
            }
            "cor311_linear" => {
                let b2 = body2(ctx, &grid)?;
                audit_cor311_linear(&body, &b2, k, p, &solver)?
            }
            "cor311_log" => {
                let b2 = body2(ctx, &grid)?;
                audit_cor311_log(&body, &b2, k, p, &solver)?
            }
            "cor312" => {
                let b2 = body2(ctx, &grid)?;
                let b3 = ctx
                    .cfg
                    .body3
                    .as_ref()
                    .ok_or_else(|| anyhow::anyhow!("field 'body3': required for cor312"))?;
                let b3 = ctx.cfg.build_body(&grid, b3)?;
                audit_cor312(&body, &b2, &b3, k, p, &solver)?
            }
            other => bail!("field 'audits': unknown audit id '{other}'"),
        };
        records.push(rec);
    }

    let mut csv = ctx.csv_header();
    csv.push_str("audit_id,k,p,fd_value,fd_error,formula_value,alt_value,ratio,reliable\n");
    for r in &records {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.id,
            r.k,
            r.p,
            r.fd,
            r.fd_error,
            r.formula_value,
            r.alt_value.map(|v| v.to_string()).unwrap_or_default(),
            r.ratio,
            r.reliable
        )?;
    }
    let path = ctx.write("audits.csv", &csv)?;
    println!("wrote {}", path.display());

    let mut text = String::new();
    let _ = writeln!(text, "variational audits (measured derivative vs displayed formula)\n");
    for r in &records {
        let _ = writeln!(
            text,
            "{:<32} k={} p={}\n  measured d/ds        {:+.8e} (est err {:.1e}{})\n  displayed formula     {:+.8e}\n  measured/displayed    {:+.6}{}",
            r.id,
            r.k,
            r.p,
            r.fd,
            r.fd_error,
            if r.reliable { "" } else { ", cascade not monotone" },
            r.formula_value,
            r.ratio,
            match r.alt_value {
                Some(alt) => format!("\n  scaling-forced value  {alt:+.8e}"),
                None => String::new(),
            }
        );
    }
    let path = ctx.write("audits.txt", &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn body2(ctx: &Ctx, grid: &std::sync::Arc<torlab_core::sphere::SphereGrid>) -> anyhow::Result<Body> {
    let spec = ctx
        .cfg
        .body2
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("field 'body2': required for this audit"))?;
    ctx.cfg.build_body(grid, spec)
}

pub fn crofton(ctx: &Ctx) -> anyhow::Result<()> {
    let grid = ctx.cfg.build_grid()?;
    let body = ctx.cfg.build_body(&grid, &ctx.cfg.body)?;
    let audit = crofton_audit(&body, ctx.cfg.k)?;
    let mut csv = ctx.csv_header();
    csv.push_str("k,radial_integral,normal_integral_elementary,normal_integral_mean,rel_elementary,rel_mean\n");
    writeln!(
        csv,
        "{},{},{},{},{},{}",
        ctx.cfg.k,
        audit.lhs_radial,
        audit.rhs_elementary,
        audit.rhs_mean,
        audit.rel_elementary,
        audit.rel_mean
    )?;
    let path = ctx.write("crofton.csv", &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn run_command(name: &str, config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> anyhow::Result<i32> {
    let cfg = ExperimentConfig::load(config)?;
    let ctx = Ctx::new(cfg, out, seed)?;
    match name {
        "solve-torsion" => {
            solve_torsion(&ctx)?;
            Ok(0)
        }
        "flow" => flow(&ctx),
        "measure" => {
            measure(&ctx)?;
            Ok(0)
        }
        "variation-audit" => {
            variation_audit(&ctx)?;
            Ok(0)
        }
        "crofton-audit" => {
            crofton(&ctx)?;
            Ok(0)
        }
        other => bail!("unknown command {other}"),
    }
}
