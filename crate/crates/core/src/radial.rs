//! Local radial boundary-value problem
//! `σ (W'' + (n-1)/r W') = W^{1+p}`, `W'(0) = 0`, `W(R) = b`,
//! together with the closed-form sub/super-solutions and the boundary slope.

use std::sync::Arc;

use crate::asymptotics::cp;
use crate::error::{invalid, Error, Result};
use crate::grid::{RadialGrid, RadialProfile};
use crate::params::Params;
use crate::tridiag;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSolveConfig {
    /// Max-norm threshold on the discrete residual.
    pub newton_tol: f64,
    pub max_iters: usize,
    /// Fraction of the Newton step taken, in (0, 1].
    pub damping: f64,
}

impl Default for LocalSolveConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_iters: 100,
            damping: 1.0,
        }
    }
}

impl LocalSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || self.max_iters == 0 {
            return invalid("newton_tol must be positive and max_iters at least 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return invalid(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        Ok(())
    }
}

/// `x^e` using integer powers when the exponent is integral.
#[inline]
pub(crate) fn pow(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Tridiagonal coefficients of the discrete radial Laplacian
/// `W'' + (n-1)/r W'` at every node except the last.
///
/// Row 0 uses the symmetric limit `n W''(0)`. Interior rows use the
/// three-point second-order formulas on the non-uniform mesh.
#[derive(Debug, Clone)]
pub(crate) struct RadialLaplacian {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RadialLaplacian {
    pub fn new(grid: &RadialGrid) -> Self {
        let r = grid.nodes();
        let n = r.len();
        let dim = grid.dim() as f64;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let h0 = r[1] - r[0];
        diag[0] = -2.0 * dim / (h0 * h0);
        upper[0] = 2.0 * dim / (h0 * h0);
        for i in 1..n - 1 {
            let hm = r[i] - r[i - 1];
            let hp = r[i + 1] - r[i];
            let s = hm + hp;
            let k = (dim - 1.0) / r[i];
            lower[i] = 2.0 / (hm * s) - k * hp / (hm * s);
            upper[i] = 2.0 / (hp * s) + k * hm / (hp * s);
            diag[i] = -2.0 / (hm * hp) + k * (hp - hm) / (hm * hp);
        }
        Self { lower, diag, upper }
    }

    /// `(L w)_i` for `i < n - 1`.
    #[inline]
    pub fn apply_at(&self, w: &[f64], i: usize) -> f64 {
        let mut v = self.diag[i] * w[i] + self.upper[i] * w[i + 1];
        if i > 0 {
            v += self.lower[i] * w[i - 1];
        }
        v
    }
}

/// Discrete residual `σ L W - W^{1+p}` at the interior nodes.
pub fn local_residual(sigma: f64, p: f64, w: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let lap = RadialLaplacian::new(grid);
    (0..w.len() - 1)
        .map(|i| sigma * lap.apply_at(w, i) - pow(w[i].max(0.0), 1.0 + p))
        .collect()
}

/// Solves the local radial problem with damped Newton, starting from the
/// closed-form sub-solution. On failure the solve is retried once with the
/// damping halved.
pub fn solve_local_radial(
    sigma: f64,
    params: &Params,
    grid: &Arc<RadialGrid>,
    cfg: &LocalSolveConfig,
) -> Result<RadialProfile> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    params.validate()?;
    cfg.validate()?;
    if grid.len() < 4 {
        return invalid("local solve needs at least 4 grid nodes");
    }
    match newton(sigma, params, grid, cfg) {
        Ok(w) => RadialProfile::new(grid.clone(), w),
        Err(Error::NoConvergence { .. }) => {
            let retry = LocalSolveConfig {
                damping: 0.5 * cfg.damping,
                ..*cfg
            };
            let w = newton(sigma, params, grid, &retry)?;
            RadialProfile::new(grid.clone(), w)
        }
        Err(e) => Err(e),
    }
}

fn newton(
    sigma: f64,
    params: &Params,
    grid: &RadialGrid,
    cfg: &LocalSolveConfig,
) -> Result<Vec<f64>> {
    let p = params.p;
    let b = params.b;
    let radius = grid.radius();
    let lap = RadialLaplacian::new(grid);
    let n = grid.len();
    let m = n - 1;

    let mut w: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| barrier_lower(r, sigma, params, radius))
        .collect();
    w[m] = b;

    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut residual = f64::INFINITY;

    for _ in 0..cfg.max_iters {
        residual = 0.0;
        let mut scaled = 0.0f64;
        for i in 0..m {
            let wi = w[i].max(0.0);
            let source = pow(wi, 1.0 + p);
            let f = sigma * lap.apply_at(&w, i) - source;
            rhs[i] = -f;
            residual = f64::max(residual, f.abs());
            let mut size = sigma * lap.diag[i].abs() * wi + source;
            if i > 0 {
                size += sigma * lap.lower[i].abs() * w[i - 1];
            }
            size += sigma * lap.upper[i].abs() * w[i + 1];
            scaled = scaled.max(f.abs() / size.max(f64::MIN_POSITIVE));
            lower[i] = sigma * lap.lower[i];
            upper[i] = if i + 1 < m { sigma * lap.upper[i] } else { 0.0 };
            diag[i] = sigma * lap.diag[i] - (1.0 + p) * pow(wi, p);
        }
        // The stiff rows near a fine boundary mesh cannot reach an absolute
        // tolerance below their own round-off; accept that floor.
        if residual < cfg.newton_tol || scaled < 64.0 * f64::EPSILON {
            return Ok(w);
        }
        let step = tridiag::solve(&lower, &diag, &upper, &rhs).ok_or(Error::NoConvergence {
            solver: "radial Newton",
            iterations: 0,
            residual,
        })?;
        let mut step_size = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..m {
            let next = w[i] + cfg.damping * step[i];
            // Keep iterates strictly positive; the true solution is.
            w[i] = if next > 0.0 { next } else { 0.5 * w[i] };
            step_size = step_size.max(step[i].abs());
            scale = scale.max(w[i].abs());
        }
        if !w.iter().all(|v| v.is_finite()) {
            break;
        }
        // At round-off level the residual of a very stiff operator cannot
        // drop further; a vanishing full Newton step is convergence.
        if cfg.damping == 1.0 && step_size <= 8.0 * f64::EPSILON * scale {
            return Ok(w);
        }
    }
    Err(Error::NoConvergence {
        solver: "radial Newton",
        iterations: cfg.max_iters,
        residual,
    })
}

/// Closed-form sub-solution `b (1 + b^{p/2} (R - r) / (c_p σ^{1/2}))^{-2/p}`.
///
/// It solves `σ W'' = W^{1+p}` exactly in the distance `R - r`.
pub fn barrier_lower(r: f64, sigma: f64, params: &Params, radius: f64) -> f64 {
    let p = params.p;
    let b = params.b;
    let z = (radius - r).max(0.0);
    b * (1.0 + b.powf(0.5 * p) * z / (cp(p) * sigma.sqrt())).powf(-2.0 / p)
}

/// `a_p = max(1/2, 2/p)` used by the two-dimensional super-solution.
pub fn barrier_exponent_2d(p: f64) -> f64 {
    f64::max(0.5, 2.0 / p)
}

/// Largest σ for which the two-dimensional super-solution is defined.
pub fn barrier_sigma_limit_2d(params: &Params, radius: f64) -> f64 {
    let a = barrier_exponent_2d(params.p);
    params.b.powf(params.p) * radius * radius / (a * a)
}

/// Explicit σ₀ below which the two-dimensional super-solution is proven to be
/// one, with `c_{p,1}` evaluated at the given σ.
pub fn barrier_sigma_threshold_2d(sigma: f64, params: &Params, radius: f64) -> f64 {
    let p = params.p;
    let b = params.b;
    let a = barrier_exponent_2d(p);
    let limit = barrier_sigma_limit_2d(params, radius);
    if !(sigma < limit) {
        return 0.0;
    }
    let cp1 = cp(p) / (1.0 - sigma / limit).sqrt();
    let bh = b.powf(0.5 * p);
    let first = p * a * b.powf(p) / (8.0 * a / (radius * radius) + 8.0 * a * a * bh / (cp1 * radius));
    let second = p / (2.0 + p) * b.powf(p) * radius * radius * cp1
        / (4.0 * a * a * cp1 + 8.0 * a * a * bh * radius);
    let s = first.min(second).min(1.0);
    s * s
}

/// Closed-form super-solution; the formula depends on the dimension.
pub fn barrier_upper(r: f64, sigma: f64, params: &Params, radius: f64) -> Result<f64> {
    let p = params.p;
    let b = params.b;
    if !(r >= 0.0 && r <= radius) {
        return invalid(format!("r = {r} outside [0, {radius}]"));
    }
    let z = radius - r;
    let bh = b.powf(0.5 * p);
    let c = cp(p);
    match params.dim {
        1 => {
            let base = b * (1.0 + bh * z / (c * sigma.sqrt())).powf(-2.0 / p);
            Ok(base + c.powf(2.0 / p) * sigma.powf(1.0 / p) / radius.powf(2.0 / p))
        }
        2 => {
            if r == 0.0 {
                return Err(Error::Singularity(0.0));
            }
            let limit = barrier_sigma_limit_2d(params, radius);
            if !(sigma < limit) {
                return invalid(format!(
                    "sigma = {sigma} must be below b^p R^2 / a_p^2 = {limit}"
                ));
            }
            let a = barrier_exponent_2d(p);
            let cp1 = c / (1.0 - sigma / limit).sqrt();
            Ok(b * (radius / r).powf(a) * (1.0 + bh * z / (cp1 * sigma.sqrt())).powf(-2.0 / p))
        }
        n => {
            if r == 0.0 {
                return Err(Error::Singularity(0.0));
            }
            let theta = 0.5 * (n as f64 - 1.0);
            Ok(b * (radius / r).powf(theta) * (1.0 + bh * z / (c * sigma.sqrt())).powf(-2.0 / p))
        }
    }
}

/// `W'(R)` from the quadratic through the last three nodes.
pub fn boundary_slope(w: &RadialProfile) -> Result<f64> {
    let n = w.len();
    if n < 4 {
        return invalid("boundary slope needs at least 4 nodes");
    }
    let r = w.nodes();
    let f = w.values();
    let (x0, x1, x2) = (r[n - 3], r[n - 2], r[n - 1]);
    let (f0, f1, f2) = (f[n - 3], f[n - 2], f[n - 1]);
    Ok(f0 * (x2 - x1) / ((x0 - x1) * (x0 - x2))
        + f1 * (x2 - x0) / ((x1 - x0) * (x1 - x2))
        + f2 * (2.0 * x2 - x0 - x1) / ((x2 - x0) * (x2 - x1)))
}
