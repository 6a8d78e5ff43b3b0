//! Time integration of the normalized curvature flow in support-function
//! form,
//!
//!   dh/dt = (h^2 / f) rho^{p-n} |Du|^{k+1} sigma_{n-k} - eta(t) h,
//!   eta(t) = \int rho^{p+1-k} |Du|^{k+1} dv / \int f dx,
//!
//! with a full torsion re-solve per stage (warm-started), explicit midpoint
//! stepping, convexity/positivity guards with adaptive step halving, invariant
//! monitors (h bounds, |grad h|, curvature pinching, Phi conservation, the
//! sign of the dual-rigidity increments) and a pointwise residual convergence
//! criterion for the stationary equation with tau = 1/eta.

use crate::body::{support_from_radial, Body, RadialField, SupportField};
use crate::error::{Error, Result};
use crate::functionals::{dual_rigidity_q, eta as eta_of, phi_of_support};
use crate::torsion::{solve_khessian_warm, solve_poisson_polar, TorsionSolution};

/// Which torsion discretization backs the per-stage re-solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TorsionBackendCfg {
    /// Body-fitted polar grid (n = 2 only). Exactly rotation-equivariant:
    /// round bodies are discrete fixed points to roundoff.
    Polar { layers: usize },
    /// Embedded Cartesian grid with cut-cell stencils (any supported (n, k)).
    Cartesian { cells: usize },
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub k: usize,
    pub p: f64,
    /// Density f > 0 sampled on the body's sphere grid.
    pub f: Vec<f64>,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Residual tolerance of the stationary equation.
    pub tol: f64,
    pub t_max: f64,
    pub max_steps: usize,
    pub backend: TorsionBackendCfg,
    /// Enforce p < n - 2 (the convergence regime); exploratory runs may
    /// disable this and use any p != n.
    pub convergence_mode: bool,
    /// Reject a step when |Phi(t+dt) - Phi(t)| exceeds this bound.
    pub phi_step_guard: f64,
    pub h_floor: f64,
    pub h_ceil: f64,
    pub omega_floor: f64,
    pub omega_ceil: f64,
    /// Keep a support-field snapshot every this many accepted steps (0: none).
    pub snapshot_every: usize,
}

impl FlowConfig {
    pub fn validate(&self, body: &Body) -> Result<()> {
        let n = body.dimension() as f64;
        if self.f.len() != body.grid().len() {
            return Err(Error::Config("flow density length does not match the grid".into()));
        }
        if let Some(v) = self.f.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Config(format!("flow density must be positive, got {v}")));
        }
        if !(self.dt0 > 0.0) || !(self.dt_min > 0.0) || self.dt_max < self.dt0 {
            return Err(Error::Config("flow step sizes must satisfy 0 < dt_min <= dt0 <= dt_max".into()));
        }
        if self.p == n {
            return Err(Error::Config("flow requires p \u{2260} n".into()));
        }
        if self.convergence_mode && !(self.p < n - 2.0) {
            return Err(Error::Config(format!(
                "convergence mode requires p < n - 2, got p = {}",
                self.p
            )));
        }
        if self.k < 1 || self.k > body.dimension() - 1 {
            return Err(Error::Config("k must satisfy 1\u{2264}k\u{2264}n\u{2212}1".into()));
        }
        if matches!(self.backend, TorsionBackendCfg::Polar { .. }) && body.dimension() != 2 {
            return Err(Error::Config("the polar torsion backend is n = 2 only".into()));
        }
        Ok(())
    }

    fn solve(&self, body: &Body, warm: Option<&TorsionSolution>) -> Result<TorsionSolution> {
        match self.backend {
            TorsionBackendCfg::Polar { layers } => solve_poisson_polar(body, layers, warm),
            TorsionBackendCfg::Cartesian { cells } => {
                solve_khessian_warm(body, self.k, cells, warm)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MonitorFlags {
    pub phi_drift: bool,
    pub h_bounds: bool,
    pub curvature_pinch: bool,
}

impl MonitorFlags {
    pub fn any(&self) -> bool {
        self.phi_drift || self.h_bounds || self.curvature_pinch
    }
}

/// Per-step record of the monitored quantities.
#[derive(Debug, Clone, Copy)]
pub struct MonitorRecord {
    pub t: f64,
    pub dt: f64,
    pub eta: f64,
    pub phi: f64,
    pub q: f64,
    pub residual: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub grad_max: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// Sign of the dual-rigidity increment since the previous accepted step.
    pub dq_sign: i8,
    pub flags: MonitorFlags,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub body: Body,
    pub sol: TorsionSolution,
    pub eta: f64,
    pub phi: f64,
    pub q: f64,
    pub residual: f64,
    pub dt: f64,
}

/// Unnormalized speed F and the normalization: speed = F - eta h, with
/// F = (h^2 / f) rho^{p-n} |Du|^{k+1} sigma_{n-k} and rho evaluated from the
/// support data as sqrt(h^2 + |grad h|^2).
pub fn speed_field(body: &Body, sol: &TorsionSolution, cfg: &FlowConfig) -> Result<(Vec<f64>, f64)> {
    let n = body.dimension() as f64;
    let sigma = body.sigma(cfg.k)?;
    let h = body.support().values();
    let eta_val = eta_of(body, sol, &cfg.f, cfg.k, cfg.p);
    let mut speed = Vec::with_capacity(h.len());
    for i in 0..h.len() {
        let rho = body.support().rho_squared(i).sqrt();
        let f_term = h[i] * h[i] / cfg.f[i]
            * rho.powf(cfg.p - n)
            * sol.g_support[i].powi(cfg.k as i32 + 1)
            * sigma[i];
        speed.push(f_term - eta_val * h[i]);
    }
    Ok((speed, eta_val))
}

/// Pointwise residual of the stationary equation with tau = 1/eta:
/// max_x |f - (1/eta) rho^{p-n} h |Du|^{k+1} sigma| / f.
pub fn residual(body: &Body, sol: &TorsionSolution, cfg: &FlowConfig) -> Result<f64> {
    let n = body.dimension() as f64;
    let sigma = body.sigma(cfg.k)?;
    let h = body.support().values();
    let eta_val = eta_of(body, sol, &cfg.f, cfg.k, cfg.p);
    let mut worst: f64 = 0.0;
    for i in 0..h.len() {
        let rho = body.support().rho_squared(i).sqrt();
        let lhs = rho.powf(cfg.p - n) * h[i] * sol.g_support[i].powi(cfg.k as i32 + 1) * sigma[i]
            / eta_val;
        worst = worst.max((cfg.f[i] - lhs).abs() / cfg.f[i]);
    }
    Ok(worst)
}

/// Initializes a flow state (solves the torsion problem on the initial body).
pub fn init_state(body: Body, cfg: &FlowConfig) -> Result<FlowState> {
    cfg.validate(&body)?;
    let sol = cfg.solve(&body, None)?;
    let eta_val = eta_of(&body, &sol, &cfg.f, cfg.k, cfg.p);
    let phi = phi_of_support(body.support(), &cfg.f)?;
    let q = dual_rigidity_q(&body, &sol, cfg.k, cfg.p);
    let res = residual(&body, &sol, cfg)?;
    Ok(FlowState { t: 0.0, body, sol, eta: eta_val, phi, q, residual: res, dt: cfg.dt0 })
}

/// One explicit midpoint step at exactly the requested dt; guard violations
/// surface as errors so the adaptive wrapper can halve the step.
pub fn step_once(state: &FlowState, cfg: &FlowConfig, dt: f64) -> Result<FlowState> {
    let h0 = state.body.support().values();
    let (s1, _) = speed_field(&state.body, &state.sol, cfg)?;
    let h_mid: Vec<f64> = h0.iter().zip(s1.iter()).map(|(h, s)| h + 0.5 * dt * s).collect();
    let body_mid = Body::from_support(
        SupportField::from_values(state.body.grid().clone(), h_mid)?,
        state.body.convention(),
    )?;
    let sol_mid = cfg.solve(&body_mid, Some(&state.sol))?;
    let (s2, _) = speed_field(&body_mid, &sol_mid, cfg)?;
    let h_new: Vec<f64> = h0.iter().zip(s2.iter()).map(|(h, s)| h + dt * s).collect();
    let body_new = Body::from_support(
        SupportField::from_values(state.body.grid().clone(), h_new)?,
        state.body.convention(),
    )?;
    let sol_new = cfg.solve(&body_new, Some(&sol_mid))?;

    let phi_new = phi_of_support(body_new.support(), &cfg.f)?;
    if (phi_new - state.phi).abs() > cfg.phi_step_guard {
        return Err(Error::Validation(format!(
            "phi drift {:.3e} exceeds the per-step guard {:.3e}",
            (phi_new - state.phi).abs(),
            cfg.phi_step_guard
        )));
    }
    let eta_val = eta_of(&body_new, &sol_new, &cfg.f, cfg.k, cfg.p);
    let q = dual_rigidity_q(&body_new, &sol_new, cfg.k, cfg.p);
    let res = residual(&body_new, &sol_new, cfg)?;
    Ok(FlowState {
        t: state.t + dt,
        body: body_new,
        sol: sol_new,
        eta: eta_val,
        phi: phi_new,
        q,
        residual: res,
        dt,
    })
}

/// Explicit-stability bound on dt: the stiffest term of the linearized speed
/// is the curvature factor acting on the highest grid mode, with symbol
/// about c_max m_max^2 for the spectral circle operators (and the analogous
/// finite-difference symbol on lat-lon grids).
pub fn stable_dt_cap(body: &Body, sol: &TorsionSolution, cfg: &FlowConfig, eta_val: f64) -> f64 {
    let n = body.dimension() as f64;
    let h = body.support().values();
    let mut c_max: f64 = 0.0;
    for i in 0..h.len() {
        let rho = body.support().rho_squared(i).sqrt();
        let c = h[i] * h[i] / cfg.f[i]
            * rho.powf(cfg.p - n)
            * sol.g_support[i].powi(cfg.k as i32 + 1);
        c_max = c_max.max(c);
    }
    let (_, omega_max) = body.support().omega_range();
    let curvature_gain = match (body.dimension(), cfg.k) {
        (2, 1) => 1.0,
        (3, 1) => 2.0 * omega_max,
        _ => 1.0,
    };
    let symbol = match body.grid().lat_lon_shape() {
        None => {
            let m = body.grid().len() as f64 / 2.0;
            m * m
        }
        Some((nlat, nlon)) => {
            // 4th-order second-difference symbol bound over both directions,
            // including the metric factor at the extreme latitude rows.
            let dtheta = std::f64::consts::PI / nlat as f64;
            let st_min = body
                .grid()
                .node(0)[2]
                .acos()
                .sin()
                .max(1e-3);
            let dphi_eff = 2.0 * std::f64::consts::PI / nlon as f64 * st_min;
            let d = dtheta.min(dphi_eff);
            16.0 / (3.0 * d * d)
        }
    };
    let lambda = c_max * curvature_gain * symbol + eta_val.abs();
    1.8 / lambda
}

/// Adaptive step: starts from the state's dt capped by the stability bound,
/// halves on guard violations (down to dt_min, then a stiffness error) and
/// grows by 1.2x after acceptance, capped at dt_max.
pub fn step(state: &FlowState, cfg: &FlowConfig) -> Result<FlowState> {
    let cap = stable_dt_cap(&state.body, &state.sol, cfg, state.eta);
    let mut dt = state.dt.min(cap);
    loop {
        match step_once(state, cfg, dt) {
            Ok(mut next) => {
                next.dt = (dt * 1.2).min(cfg.dt_max);
                return Ok(next);
            }
            Err(Error::Validation(_)) | Err(Error::Range(_)) => {
                dt *= 0.5;
                if dt < cfg.dt_min {
                    return Err(Error::Stiffness { t: state.t, dt });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Builds the monitor record for a state, given the previous record.
pub fn monitors(state: &FlowState, prev: Option<&MonitorRecord>, cfg: &FlowConfig) -> MonitorRecord {
    let sf = state.body.support();
    let h_min = sf.min_value();
    let h_max = sf.max_value();
    let grad_max = sf
        .grad()
        .iter()
        .map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt())
        .fold(0.0, f64::max);
    let (kappa_min, kappa_max) = sf.omega_range();
    let dq_sign = match prev {
        None => 0,
        Some(p) => {
            let dq = state.q - p.q;
            // Increments at the roundoff scale of Q count as zero.
            if dq.abs() <= 1e-12 * state.q.abs().max(1e-300) {
                0
            } else if dq > 0.0 {
                1
            } else {
                -1
            }
        }
    };
    let phi_drift = match prev {
        None => false,
        Some(p) => (state.phi - p.phi).abs() > cfg.phi_step_guard,
    };
    MonitorRecord {
        t: state.t,
        dt: state.dt,
        eta: state.eta,
        phi: state.phi,
        q: state.q,
        residual: state.residual,
        h_min,
        h_max,
        grad_max,
        kappa_min,
        kappa_max,
        dq_sign,
        flags: MonitorFlags {
            phi_drift,
            h_bounds: h_min < cfg.h_floor || h_max > cfg.h_ceil,
            curvature_pinch: kappa_min < cfg.omega_floor || kappa_max > cfg.omega_ceil,
        },
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub records: Vec<MonitorRecord>,
    /// (t, support values) snapshots for plotting.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_state: FlowState,
    pub converged: bool,
    /// tau = 1/eta at the converged state.
    pub tau: Option<f64>,
    pub steps: usize,
}

/// Integrates the flow until the residual drops below the tolerance or the
/// time/step budget runs out. Non-convergence is reported through the
/// `converged` flag rather than as an error; stiffness aborts propagate.
pub fn run(initial: Body, cfg: &FlowConfig) -> Result<RunResult> {
    let mut state = init_state(initial, cfg)?;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    records.push(monitors(&state, None, cfg));
    snapshots.push((0.0, state.body.support().values().to_vec()));
    let mut steps = 0usize;
    while state.residual >= cfg.tol && state.t < cfg.t_max && steps < cfg.max_steps {
        state = step(&state, cfg)?;
        steps += 1;
        let rec = monitors(&state, records.last(), cfg);
        records.push(rec);
        if cfg.snapshot_every > 0 && steps % cfg.snapshot_every == 0 {
            snapshots.push((state.t, state.body.support().values().to_vec()));
        }
    }
    if snapshots.last().map(|s| s.0) != Some(state.t) {
        snapshots.push((state.t, state.body.support().values().to_vec()));
    }
    let converged = state.residual < cfg.tol;
    let tau = converged.then(|| 1.0 / state.eta);
    Ok(RunResult { records, snapshots, final_state: state, converged, tau, steps })
}

/// Reference integration of the radial-form flow
/// d rho/dt = (h / f) rho^{p+1-n} |Du|^{k+1} sigma - eta rho (all the
/// normal-parameter fields composed through the Gauss map), used to check
/// consistency of the two scalar forms.
pub fn run_radial_reference(initial: &Body, cfg: &FlowConfig, t_end: f64, dt: f64) -> Result<Body> {
    cfg.validate(initial)?;
    let n = initial.dimension() as f64;
    let mut body = initial.clone();
    let mut sol = cfg.solve(&body, None)?;
    let mut t = 0.0;
    let radial_speed = |body: &Body, sol: &TorsionSolution| -> Result<Vec<f64>> {
        let sigma = body.sigma(cfg.k)?;
        let h = body.support().values();
        let eta_val = eta_of(body, sol, &cfg.f, cfg.k, cfg.p);
        // G(x) = h |Du|^{k+1} sigma / f at the support nodes.
        let g_field: Vec<f64> = (0..h.len())
            .map(|i| h[i] * sol.g_support[i].powi(cfg.k as i32 + 1) * sigma[i] / cfg.f[i])
            .collect();
        let series = body.grid().trig_series(&g_field);
        let rho = body.radial().values();
        let mut out = Vec::with_capacity(rho.len());
        for (j, gs) in body.gauss().iter().enumerate() {
            let g_at_alpha = match &series {
                Some(s) => s.eval(gs.alpha[1].atan2(gs.alpha[0])),
                None => body.grid().chart_interp(&g_field, &gs.alpha),
            };
            out.push(g_at_alpha * rho[j].powf(cfg.p + 1.0 - n) - eta_val * rho[j]);
        }
        Ok(out)
    };
    while t < t_end - 1e-12 {
        let step_dt = dt.min(t_end - t);
        let rho0 = body.radial().values().to_vec();
        let s1 = radial_speed(&body, &sol)?;
        let rho_mid: Vec<f64> = rho0.iter().zip(s1.iter()).map(|(r, s)| r + 0.5 * step_dt * s).collect();
        let body_mid = Body::from_support(
            support_from_radial(&RadialField::from_values(body.grid().clone(), rho_mid)?)?,
            body.convention(),
        )?;
        let sol_mid = cfg.solve(&body_mid, Some(&sol))?;
        let s2 = radial_speed(&body_mid, &sol_mid)?;
        let rho_new: Vec<f64> = rho0.iter().zip(s2.iter()).map(|(r, s)| r + step_dt * s).collect();
        body = Body::from_support(
            support_from_radial(&RadialField::from_values(body.grid().clone(), rho_new)?)?,
            body.convention(),
        )?;
        sol = cfg.solve(&body, Some(&sol_mid))?;
        t += step_dt;
    }
    Ok(body)
}
