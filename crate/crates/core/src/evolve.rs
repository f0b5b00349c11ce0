//! Radial time evolution of the cell density `u` and the log-chemical
//! `v = ln w`:
//!
//! ```text
//! u_t = r^{1-n} [(r^{n-1} u_r)_r - p (r^{n-1} u v_r)_r]
//! v_t = ε r^{1-n} (r^{n-1} v_r)_r + ε |v_r|² - u
//! ```
//!
//! with zero flux `u_r - p u v_r = 0` and `v = ln b` at `r = R`.
//!
//! `u` lives on node-centred control volumes whose faces sit midway between
//! nodes. Diffusion is implicit in both equations. The chemotactic face flux,
//! `ε |v_r|²` and `-u` are explicit. The face density is the logarithmic
//! mean of its neighbours, so `u = C e^{p v}` has exactly zero flux, and the
//! `v` operator reuses the steady Laplacian, so the discrete steady state is
//! a fixed point of the scheme.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::grid::{integrate_radial, RadialGrid, RadialProfile};
use crate::params::{unit_sphere_area, Params, SteadyState};
use crate::radial::{pow, RadialLaplacian};
use crate::stats::fit_line;
use crate::tridiag;

/// Sampled state of the evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub t: f64,
    pub u: RadialProfile,
    pub v: RadialProfile,
}

impl EvolutionState {
    pub fn new(t: f64, u: RadialProfile, v: RadialProfile, params: &Params) -> Result<Self> {
        if !Arc::ptr_eq(u.grid(), v.grid()) && u.grid() != v.grid() {
            return invalid("u and v must share a grid");
        }
        if let Some(i) = u.values().iter().position(|&x| !(x > 0.0)) {
            return Err(Error::Positivity { node: i, t });
        }
        let target = params.b.ln();
        if (v.boundary_value() - target).abs() > 1e-12 * target.abs().max(1.0) {
            return invalid(format!(
                "v(R) = {} must equal ln b = {target}",
                v.boundary_value()
            ));
        }
        Ok(Self { t, u, v })
    }

    /// `w = e^v`.
    pub fn w(&self) -> RadialProfile {
        self.v.map(|_, v| v.exp()).expect("finite exponential")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub dt: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    /// Steps between diagnostic samples.
    pub output_every: usize,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return invalid(format!("cfl_safety must lie in (0, 1), got {}", self.cfl_safety));
        }
        if !(self.t_end > 0.0) {
            return invalid("t_end must be positive");
        }
        if self.output_every == 0 {
            return invalid("output_every must be at least 1");
        }
        Ok(())
    }
}

/// `h_min / max_faces p |v_r|`, infinite for a flat `v`.
pub fn advective_limit(v: &RadialProfile, p: f64) -> f64 {
    let grid = v.grid();
    let vals = v.values();
    let speed = (0..grid.len() - 1)
        .map(|i| p * (vals[i + 1] - vals[i]).abs() / grid.spacing(i))
        .fold(0.0, f64::max);
    if speed == 0.0 {
        f64::INFINITY
    } else {
        grid.min_spacing() / speed
    }
}

/// Control-volume geometry and the implicit operators of one grid.
#[derive(Debug, Clone)]
pub struct Scheme {
    grid: Arc<RadialGrid>,
    /// `∫ r^{n-1} dr` over each control volume.
    volumes: Vec<f64>,
    /// `r^{n-1}` at the face between node `i` and `i + 1`.
    face_areas: Vec<f64>,
    lap: RadialLaplacian,
}

impl Scheme {
    pub fn new(grid: Arc<RadialGrid>) -> Self {
        let r = grid.nodes();
        let n = grid.len();
        let dim = grid.dim() as i32;
        let faces: Vec<f64> = (0..n - 1).map(|i| 0.5 * (r[i] + r[i + 1])).collect();
        let mut volumes = Vec::with_capacity(n);
        for i in 0..n {
            let lo = if i == 0 { 0.0 } else { faces[i - 1] };
            let hi = if i == n - 1 { r[n - 1] } else { faces[i] };
            volumes.push((hi.powi(dim) - lo.powi(dim)) / dim as f64);
        }
        let face_areas = faces.iter().map(|f| f.powi(dim - 1)).collect();
        let lap = RadialLaplacian::new(&grid);
        Self {
            grid,
            volumes,
            face_areas,
            lap,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Discrete mass `ω_n Σ V_i u_i`.
    pub fn mass(&self, u: &[f64]) -> f64 {
        unit_sphere_area(self.grid.dim())
            * self.volumes.iter().zip(u).map(|(v, u)| v * u).sum::<f64>()
    }

    /// One IMEX step of length `dt`.
    pub fn step(&self, state: &EvolutionState, params: &Params, cfg: &SchemeConfig) -> Result<EvolutionState> {
        let limit = cfg.cfl_safety * advective_limit(&state.v, params.p);
        if cfg.dt > limit {
            return Err(Error::TimeStep { dt: cfg.dt, limit });
        }
        let n = self.grid.len();
        let dt = cfg.dt;
        let u = state.u.values();
        let v = state.v.values();
        let p = params.p;
        let eps = params.epsilon;

        // Cell density: V (u' - u)/dt = D(u') - C(u, v), zero flux at both ends.
        let mut chemo = vec![0.0; n - 1];
        let mut coupling = vec![0.0; n - 1];
        for i in 0..n - 1 {
            let h = self.grid.spacing(i);
            coupling[i] = self.face_areas[i] / h;
            chemo[i] = coupling[i] * p * log_mean(u[i], u[i + 1]) * (v[i + 1] - v[i]);
        }
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            diag[i] = self.volumes[i] / dt;
            rhs[i] = self.volumes[i] / dt * u[i];
            if i + 1 < n {
                diag[i] += coupling[i];
                upper[i] = -coupling[i];
                rhs[i] -= chemo[i];
            }
            if i > 0 {
                diag[i] += coupling[i - 1];
                lower[i] = -coupling[i - 1];
                rhs[i] += chemo[i - 1];
            }
        }
        let u_next = tridiag::solve(&lower, &diag, &upper, &rhs).ok_or(Error::NoConvergence {
            solver: "cell density solve",
            iterations: 0,
            residual: f64::NAN,
        })?;
        let t_next = state.t + dt;
        if let Some(i) = u_next.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::Positivity { node: i, t: t_next });
        }

        // Log-chemical: (v' - v)/dt = ε L v' + ε (L e^v / e^v - L v) - u.
        let w: Vec<f64> = v.iter().map(|x| x.exp()).collect();
        let m = n - 1;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        let boundary = params.b.ln();
        for i in 0..m {
            let explicit = eps * (self.lap.apply_at(&w, i) / w[i] - self.lap.apply_at(v, i)) - u[i];
            lower[i] = -dt * eps * self.lap.lower[i];
            diag[i] = 1.0 - dt * eps * self.lap.diag[i];
            upper[i] = -dt * eps * self.lap.upper[i];
            rhs[i] = v[i] + dt * explicit;
        }
        rhs[m - 1] -= upper[m - 1] * boundary;
        let mut v_next = tridiag::solve(&lower, &diag, &upper, &rhs).ok_or(Error::NoConvergence {
            solver: "log-chemical solve",
            iterations: 0,
            residual: f64::NAN,
        })?;
        v_next.push(boundary);

        Ok(EvolutionState {
            t: t_next,
            u: RadialProfile::new(self.grid.clone(), u_next)?,
            v: RadialProfile::new(self.grid.clone(), v_next)?,
        })
    }

    /// `φ(r) = r^{1-n} ∫_0^r (u - U) s^{n-1} ds` at the nodes. Face values
    /// come from cumulative control-volume sums and are averaged to nodes;
    /// `φ(0) = 0` and the value at `R` uses the full sum.
    pub fn anti_derivative(&self, u: &[f64], reference: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let k = self.grid.dim() as i32 - 1;
        let r = self.grid.nodes();
        let mut cumulative = 0.0;
        let mut face = Vec::with_capacity(n);
        for i in 0..n {
            cumulative += self.volumes[i] * (u[i] - reference[i]);
            let at = if i + 1 < n { 0.5 * (r[i] + r[i + 1]) } else { r[n - 1] };
            face.push(cumulative / at.powi(k));
        }
        let mut phi = vec![0.0; n];
        for i in 1..n - 1 {
            phi[i] = 0.5 * (face[i - 1] + face[i]);
        }
        phi[n - 1] = face[n - 1];
        phi
    }
}

fn log_mean(a: f64, b: f64) -> f64 {
    let rel = (b - a) / a;
    if rel.abs() < 1e-4 {
        // Series of (b - a)/ln(b/a) about b = a.
        a * (1.0 + rel / 2.0 - rel * rel / 12.0 + rel * rel * rel / 24.0)
    } else {
        (b - a) / (b / a).ln()
    }
}

/// One step on a freshly built [`Scheme`].
pub fn step(
    state: &EvolutionState,
    steady: &SteadyState<RadialProfile>,
    params: &Params,
    cfg: &SchemeConfig,
) -> Result<EvolutionState> {
    cfg.validate()?;
    if state.u.grid() != steady.w.grid() {
        return invalid("state and steady state live on different grids");
    }
    Scheme::new(state.u.grid().clone()).step(state, params, cfg)
}

/// Steady pair `(U, V)` that the scheme holds fixed: `U = (ε/σ) W^p`,
/// `V = ln W`.
pub fn discrete_reference(steady: &SteadyState<RadialProfile>, params: &Params) -> (RadialProfile, RadialProfile) {
    let amplitude = params.epsilon / steady.sigma;
    let u = steady
        .w
        .map(|_, w| amplitude * pow(w, params.p))
        .expect("finite steady state");
    let v = steady.w.map(|_, w| w.ln()).expect("positive steady state");
    (u, v)
}

/// `E = ω_n ∫ r^{n-1} (φ² / U + p ψ²) dr` with `ψ = v - V`.
pub fn lyapunov_energy(state: &EvolutionState, steady: &SteadyState<RadialProfile>, params: &Params) -> f64 {
    let scheme = Scheme::new(state.u.grid().clone());
    let (u_ref, v_ref) = discrete_reference(steady, params);
    energy_with(&scheme, state, &u_ref, &v_ref, params.p)
}

fn energy_with(scheme: &Scheme, state: &EvolutionState, u_ref: &RadialProfile, v_ref: &RadialProfile, p: f64) -> f64 {
    let phi = scheme.anti_derivative(state.u.values(), u_ref.values());
    let density: Vec<f64> = phi
        .iter()
        .zip(u_ref.values())
        .zip(state.v.values().iter().zip(v_ref.values()))
        .map(|((f, uu), (v, vv))| f * f / uu + p * (v - vv) * (v - vv))
        .collect();
    let profile = RadialProfile::new(scheme.grid.clone(), density).expect("finite energy density");
    integrate_radial(&profile)
}

/// One row of the diagnostic series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub linf_u: f64,
    pub l2_u: f64,
    pub linf_w: f64,
    pub l2_w: f64,
    pub energy: f64,
}

impl Diagnostics {
    /// `max(‖u - U‖_∞, ‖w - W‖_∞)`.
    pub fn distance(&self) -> f64 {
        self.linf_u.max(self.linf_w)
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionRun {
    pub series: Vec<Diagnostics>,
    pub final_state: EvolutionState,
    /// Factor applied to `u0` to match the steady mass; 1 when none was needed.
    pub mass_rescale: f64,
    pub steps: usize,
}

/// Distance below which a run stops early.
pub const CONVERGED_DISTANCE: f64 = 1e-10;

/// Integrates from `(u0, w0)` up to `cfg.t_end` or until the distance to the
/// steady state drops below [`CONVERGED_DISTANCE`]. `u0` is rescaled to the
/// discrete mass of the steady density; `w0(R)` must equal `b`.
pub fn evolve(
    u0: &RadialProfile,
    w0: &RadialProfile,
    params: &Params,
    steady: &SteadyState<RadialProfile>,
    cfg: &SchemeConfig,
) -> Result<EvolutionRun> {
    params.validate()?;
    cfg.validate()?;
    let grid = steady.w.grid().clone();
    if u0.grid() != &grid || w0.grid() != &grid {
        return invalid("initial data must live on the steady-state grid");
    }
    if u0.values().iter().any(|&x| !(x > 0.0)) || w0.values().iter().any(|&x| !(x > 0.0)) {
        return invalid("initial data must be positive");
    }
    if (w0.boundary_value() - params.b).abs() > 1e-12 * params.b {
        return invalid(format!("w0(R) = {} must equal b = {}", w0.boundary_value(), params.b));
    }
    let scheme = Scheme::new(grid.clone());
    let (u_ref, v_ref) = discrete_reference(steady, params);
    let w_ref = &steady.w;
    let target_mass = scheme.mass(u_ref.values());
    let mass0 = scheme.mass(u0.values());
    let mass_rescale = if ((mass0 - target_mass) / target_mass).abs() > 1e-14 {
        target_mass / mass0
    } else {
        1.0
    };
    let u = u0.map(|_, x| x * mass_rescale)?;
    let mut v_vals: Vec<f64> = w0.values().iter().map(|w| w.ln()).collect();
    *v_vals.last_mut().unwrap() = params.b.ln();
    let v = RadialProfile::new(grid.clone(), v_vals)?;
    let mut state = EvolutionState { t: 0.0, u, v };

    let diagnostics = |s: &EvolutionState| -> Diagnostics {
        let du = s.u.values().iter().zip(u_ref.values()).map(|(a, b)| a - b);
        let dw = s.v.values().iter().zip(w_ref.values()).map(|(a, b)| a.exp() - b);
        let du: Vec<f64> = du.collect();
        let dw: Vec<f64> = dw.collect();
        let l2 = |d: &[f64]| {
            let sq = RadialProfile::new(grid.clone(), d.iter().map(|x| x * x).collect()).expect("finite");
            integrate_radial(&sq).sqrt()
        };
        let linf = |d: &[f64]| d.iter().map(|x| x.abs()).fold(0.0, f64::max);
        Diagnostics {
            t: s.t,
            mass: scheme.mass(s.u.values()),
            linf_u: linf(&du),
            l2_u: l2(&du),
            linf_w: linf(&dw),
            l2_w: l2(&dw),
            energy: energy_with(&scheme, s, &u_ref, &v_ref, params.p),
        }
    };

    let mut series = vec![diagnostics(&state)];
    let mut steps = 0;
    while state.t < cfg.t_end * (1.0 - 1e-12) {
        let dt = cfg.dt.min(cfg.t_end - state.t);
        let local = SchemeConfig { dt, ..*cfg };
        state = scheme.step(&state, params, &local)?;
        steps += 1;
        let done = state.t >= cfg.t_end * (1.0 - 1e-12);
        if steps % cfg.output_every == 0 || done {
            let d = diagnostics(&state);
            series.push(d);
            if d.distance() < CONVERGED_DISTANCE {
                break;
            }
        }
    }
    Ok(EvolutionRun {
        series,
        final_state: state,
        mass_rescale,
        steps,
    })
}

/// Exponential decay rate from `(t, distance)` samples: minus the
/// least-squares slope of `ln distance` over the second half of the window
/// that precedes any zero or rounding-floor sample.
pub fn fit_decay_rate(series: &[(f64, f64)]) -> Result<f64> {
    if series.len() < 10 {
        return invalid(format!("decay fit needs at least 10 samples, got {}", series.len()));
    }
    let peak = series.iter().map(|s| s.1).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return invalid("decay fit needs positive distances");
    }
    let floor = 1e3 * f64::EPSILON * peak;
    let usable = series
        .iter()
        .position(|&(_, d)| !(d > floor))
        .unwrap_or(series.len());
    if usable < 10 {
        return invalid("fewer than 10 samples precede the rounding floor");
    }
    let window = &series[..usable];
    let t_end = window[usable - 1].0;
    let t_start = window[0].0;
    let half = t_start + 0.5 * (t_end - t_start);
    let (ts, logs): (Vec<f64>, Vec<f64>) = window
        .iter()
        .filter(|s| s.0 >= half)
        .map(|&(t, d)| (t, d.ln()))
        .unzip();
    if ts.len() < 2 {
        return invalid("decay window holds fewer than two samples");
    }
    let (_, slope) = fit_line(&ts, &logs);
    Ok(-slope)
}

/// `U (1 + amplitude cos(π r / R))`.
pub fn perturb_density(u: &RadialProfile, amplitude: f64) -> Result<RadialProfile> {
    let radius = u.grid().radius();
    u.map(|r, x| x * (1.0 + amplitude * (std::f64::consts::PI * r / radius).cos()))
}

/// `W (1 + amplitude cos(π r / 2R))`, which keeps `W(R) = b`.
pub fn perturb_chemical(w: &RadialProfile, amplitude: f64) -> Result<RadialProfile> {
    let radius = w.grid().radius();
    w.map(|r, x| x * (1.0 + amplitude * (0.5 * std::f64::consts::PI * r / radius).cos()))
}
