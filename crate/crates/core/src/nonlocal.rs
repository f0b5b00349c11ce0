//! The nonlocal constraint `λ ∫ W_λ^p = m`, resolved by bisection on the
//! amplitude `λ` of the local problem `ε ΔW = λ W^{1+p}`.
//!
//! The local solve is abstracted behind [`LocalDomain`] so the same driver
//! serves the radial mesh and the masked Cartesian grid.

use std::sync::Arc;

use crate::asymptotics::layer_width_estimate;
use crate::error::{invalid, Error, Result};
use crate::grid::{integrate_radial, make_graded_grid, RadialGrid, RadialProfile};
use crate::params::{ball_volume, Params, SteadyState};
use crate::radial::{pow, solve_local_radial, LocalSolveConfig};

/// A discretized domain on which the local Dirichlet problem
/// `σ ΔW = W^{1+p}`, `W = b` on the boundary, can be solved.
pub trait LocalDomain {
    type Field: Clone;

    /// Volume `|Ω|` of the domain.
    fn measure(&self) -> f64;

    fn solve_local(&mut self, sigma: f64, params: &Params) -> Result<Self::Field>;

    /// Discrete `∫_Ω W^p`.
    fn integrate_power(&self, field: &Self::Field, p: f64) -> f64;

    /// Pointwise `amplitude · W^p`.
    fn scaled_power(&self, field: &Self::Field, p: f64, amplitude: f64) -> Self::Field;
}

/// Radial ball `B_R` discretized on a graded mesh.
#[derive(Debug, Clone)]
pub struct RadialDomain {
    pub grid: Arc<RadialGrid>,
    pub cfg: LocalSolveConfig,
}

/// Node count used by [`RadialDomain::resolved`] unless told otherwise.
pub const DEFAULT_RADIAL_COUNT: usize = 2000;

impl RadialDomain {
    pub fn new(grid: Arc<RadialGrid>, cfg: LocalSolveConfig) -> Self {
        Self { grid, cfg }
    }

    /// Graded mesh whose boundary spacing is a hundredth of the expected
    /// layer width `c_p² ω_n R^{n-1} ε / m`.
    pub fn resolved(params: &Params, radius: f64, count: usize) -> Result<Self> {
        let layer = layer_width_estimate(params, radius).min(radius);
        let grid = make_graded_grid(radius, params.dim, 0.1 * layer, count)?;
        Ok(Self::new(Arc::new(grid), LocalSolveConfig::default()))
    }
}

impl LocalDomain for RadialDomain {
    type Field = RadialProfile;

    fn measure(&self) -> f64 {
        ball_volume(self.grid.dim(), self.grid.radius())
    }

    fn solve_local(&mut self, sigma: f64, params: &Params) -> Result<RadialProfile> {
        if params.dim != self.grid.dim() {
            return invalid("parameter dimension does not match the grid");
        }
        solve_local_radial(sigma, params, &self.grid, &self.cfg)
    }

    fn integrate_power(&self, field: &RadialProfile, p: f64) -> f64 {
        let powered = field.map(|_, w| pow(w, p)).expect("finite power of a finite profile");
        integrate_radial(&powered)
    }

    fn scaled_power(&self, field: &RadialProfile, p: f64, amplitude: f64) -> RadialProfile {
        field
            .map(|_, w| amplitude * pow(w, p))
            .expect("finite power of a finite profile")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlocalConfig {
    /// Relative tolerance on `|λ ∫W^p - m| / m`.
    pub tol_rel: f64,
    /// Multiplies the analytic lower bracket `m / (b^p |Ω|)`.
    pub seed_factor: f64,
    pub max_doublings: usize,
    pub max_bisections: usize,
}

impl Default for NonlocalConfig {
    fn default() -> Self {
        Self {
            tol_rel: 1e-8,
            seed_factor: 1.0,
            max_doublings: 128,
            max_bisections: 200,
        }
    }
}

impl NonlocalConfig {
    pub fn with_tol(tol_rel: f64) -> Self {
        Self {
            tol_rel,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct NonlocalResult<F> {
    pub steady: SteadyState<F>,
    /// Amplitude at which the bisection stopped; `steady.sigma = ε / lambda`.
    pub lambda: f64,
    pub bisection_iters: usize,
    /// `|λ ∫W^p - m| / m` at the returned amplitude.
    pub constraint_residual: f64,
}

/// `g(λ) = λ ∫ W_λ^p` together with the local solution `W_λ`.
pub fn constraint_value<D: LocalDomain>(
    lambda: f64,
    params: &Params,
    domain: &mut D,
) -> Result<(f64, D::Field)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    let w = domain.solve_local(params.epsilon / lambda, params)?;
    let g = lambda * domain.integrate_power(&w, params.p);
    Ok((g, w))
}

/// Finds the amplitude with `λ ∫ W_λ^p = m` and assembles the steady state.
pub fn solve_nonlocal<D: LocalDomain>(
    params: &Params,
    domain: &mut D,
    cfg: &NonlocalConfig,
) -> Result<NonlocalResult<D::Field>> {
    params.validate()?;
    if !(cfg.tol_rel > 0.0) {
        return invalid("tol_rel must be positive");
    }
    if !(cfg.seed_factor > 0.0) {
        return invalid("seed_factor must be positive");
    }
    let m = params.m;
    let rel = |g: f64| (g - m).abs() / m;

    // W <= b gives g(m / (b^p |Ω|)) <= m.
    let mut lo = cfg.seed_factor * m / (params.b.powf(params.p) * domain.measure());
    let (mut g_lo, mut w_lo) = constraint_value(lo, params, domain)?;
    let mut shrinks = 0;
    while g_lo > m {
        if rel(g_lo) < cfg.tol_rel {
            return Ok(finish(params, domain, lo, w_lo, g_lo, 0));
        }
        shrinks += 1;
        if shrinks > cfg.max_doublings {
            return Err(Error::BracketFailure(shrinks));
        }
        lo *= 0.5;
        (g_lo, w_lo) = constraint_value(lo, params, domain)?;
    }
    if rel(g_lo) < cfg.tol_rel {
        return Ok(finish(params, domain, lo, w_lo, g_lo, 0));
    }

    let mut hi = 2.0 * lo;
    let mut doublings = 0;
    let (mut g_hi, mut w_hi) = constraint_value(hi, params, domain)?;
    while g_hi <= m {
        if rel(g_hi) < cfg.tol_rel {
            return Ok(finish(params, domain, hi, w_hi, g_hi, 0));
        }
        doublings += 1;
        if doublings > cfg.max_doublings {
            return Err(Error::BracketFailure(doublings));
        }
        lo = hi;
        hi *= 2.0;
        (g_hi, w_hi) = constraint_value(hi, params, domain)?;
    }
    if rel(g_hi) < cfg.tol_rel {
        return Ok(finish(params, domain, hi, w_hi, g_hi, 0));
    }

    let mut best = (f64::INFINITY, hi, w_hi, g_hi);
    for iter in 1..=cfg.max_bisections {
        let mid = 0.5 * (lo + hi);
        let (g, w) = constraint_value(mid, params, domain)?;
        if rel(g) < cfg.tol_rel {
            return Ok(finish(params, domain, mid, w, g, iter));
        }
        if rel(g) < best.0 {
            best = (rel(g), mid, w, g);
        }
        if g < m {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Err(Error::NoConvergence {
        solver: "nonlocal bisection",
        iterations: cfg.max_bisections,
        residual: best.0,
    })
}

fn finish<D: LocalDomain>(
    params: &Params,
    domain: &D,
    lambda: f64,
    w: D::Field,
    g: f64,
    iters: usize,
) -> NonlocalResult<D::Field> {
    let integral = g / lambda;
    let amplitude = params.m / integral;
    let u = domain.scaled_power(&w, params.p, amplitude);
    NonlocalResult {
        steady: SteadyState {
            w,
            u,
            amplitude,
            lambda_eps: 1.0 / amplitude,
            sigma: params.epsilon / lambda,
        },
        lambda,
        bisection_iters: iters,
        constraint_residual: (g - params.m).abs() / params.m,
    }
}

/// Radial steady state on `B_R` with the default mesh resolution.
pub fn solve_nonlocal_radial(
    params: &Params,
    radius: f64,
    tol_rel: f64,
) -> Result<NonlocalResult<RadialProfile>> {
    let mut domain = RadialDomain::resolved(params, radius, DEFAULT_RADIAL_COUNT)?;
    solve_nonlocal(params, &mut domain, &NonlocalConfig::with_tol(tol_rel))
}
