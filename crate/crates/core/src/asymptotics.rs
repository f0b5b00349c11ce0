//! Leading-order coefficients of the small-ε expansions on the ball and the
//! procedures that compare them with computed steady states.

use crate::error::{invalid, Result};
use crate::grid::{integrate_radial, integrate_radial_from, interpolate_monotone, RadialProfile};
use crate::nonlocal::{solve_nonlocal_radial, NonlocalResult};
use crate::params::{ball_volume, unit_sphere_area, Params};
use crate::radial::boundary_slope;
use crate::stats::fit_line;

/// Layer-profile constant `c_p = √((2/p)(2/p + 1))`.
pub fn cp(p: f64) -> f64 {
    let a = 2.0 / p;
    (a * (a + 1.0)).sqrt()
}

/// Coefficient of `1/ε` in `W'(R)`.
pub fn slope_w_leading(params: &Params, radius: f64) -> f64 {
    let Params { p, b, m, dim, .. } = *params;
    p * m * b / ((2.0 + p) * unit_sphere_area(dim) * radius.powi(dim as i32 - 1))
}

/// Coefficient of `1/ε²` in `U'(R)`; independent of `b`.
pub fn slope_u_leading(params: &Params, radius: f64) -> f64 {
    let Params { p, m, dim, .. } = *params;
    let omega = unit_sphere_area(dim);
    p.powi(4) * m.powi(3)
        / (2.0 * (2.0 + p).powi(2) * omega.powi(3) * radius.powi(3 * (dim as i32 - 1)))
}

/// Coefficient of `ε` in `λ_ε = ∫W^p / m`.
pub fn lambda_leading(params: &Params, radius: f64) -> f64 {
    let Params { p, b, m, dim, .. } = *params;
    let omega = unit_sphere_area(dim);
    omega * omega * b.powf(p) * cp(p).powi(2) * radius.powi(2 * dim as i32 - 2) / (m * m)
}

/// Coefficient of `ε` in the thickness `R - r_ε(R, c)` of the level set `W = c`,
/// written through the ball volume `α_n(R)`.
pub fn thickness_leading(level: f64, params: &Params, radius: f64) -> Result<f64> {
    let Params { p, b, m, dim, .. } = *params;
    if !(level > 0.0 && level < b) {
        return invalid(format!("level {level} must lie in (0, b = {b})"));
    }
    let n = dim as f64;
    Ok(((b / level).powf(0.5 * p) - 1.0) * 2.0 * n * (p + 2.0) / (m * p * p)
        * ball_volume(dim, radius)
        / radius)
}

/// Expected layer width `c_p σ^{1/2} b^{-p/2}` with σ from the leading-order
/// `λ_ε`; equals `c_p² ω_n R^{n-1} ε / m`.
pub fn layer_width_estimate(params: &Params, radius: f64) -> f64 {
    cp(params.p).powi(2) * unit_sphere_area(params.dim) * radius.powi(params.dim as i32 - 1)
        * params.epsilon
        / params.m
}

/// `R - W^{-1}(c)`.
pub fn measure_thickness(w: &RadialProfile, level: f64) -> Result<f64> {
    let radius = w.grid().radius();
    Ok(radius - interpolate_monotone(w, level)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    SlopeW,
    SlopeU,
    LambdaEps,
    Thickness { level: f64 },
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::SlopeW => "slope_W",
            Quantity::SlopeU => "slope_U",
            Quantity::LambdaEps => "lambda_eps",
            Quantity::Thickness { .. } => "thickness",
        }
    }

    /// Power of ε that turns the measurement into its leading coefficient.
    pub fn eps_power(&self) -> i32 {
        match self {
            Quantity::SlopeW => 1,
            Quantity::SlopeU => 2,
            Quantity::LambdaEps | Quantity::Thickness { .. } => -1,
        }
    }

    pub fn predicted(&self, params: &Params, radius: f64) -> Result<f64> {
        Ok(match *self {
            Quantity::SlopeW => slope_w_leading(params, radius),
            Quantity::SlopeU => slope_u_leading(params, radius),
            Quantity::LambdaEps => lambda_leading(params, radius),
            Quantity::Thickness { level } => thickness_leading(level, params, radius)?,
        })
    }

    /// Raw measurement on a computed steady state.
    pub fn measure(&self, result: &NonlocalResult<RadialProfile>) -> Result<f64> {
        let st = &result.steady;
        match *self {
            Quantity::SlopeW => boundary_slope(&st.w),
            Quantity::SlopeU => boundary_slope(&st.u),
            Quantity::LambdaEps => Ok(st.lambda_eps),
            Quantity::Thickness { level } => measure_thickness(&st.w, level),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub quantity: Quantity,
    pub epsilons: Vec<f64>,
    /// Measurement times `ε^k`, one per ε.
    pub computed: Vec<f64>,
    pub predicted_leading: Vec<f64>,
    /// `C₀` of the fit `C₀ + C₁ ε log(1/ε)`.
    pub extrapolated_coefficient: f64,
    pub relative_gap: f64,
}

/// One radial steady state per ε, in the order given.
pub fn radial_sweep(
    params: &Params,
    radius: f64,
    eps_list: &[f64],
    tol_rel: f64,
) -> Result<Vec<NonlocalResult<RadialProfile>>> {
    eps_list
        .iter()
        .map(|&eps| solve_nonlocal_radial(&params.with_epsilon(eps), radius, tol_rel))
        .collect()
}

/// Builds the report for `quantity` from an existing sweep.
pub fn expansion_report(
    quantity: Quantity,
    params: &Params,
    radius: f64,
    eps_list: &[f64],
    sweep: &[NonlocalResult<RadialProfile>],
) -> Result<ExpansionReport> {
    if eps_list.len() < 3 || eps_list.len() != sweep.len() {
        return invalid("an expansion check needs at least three ε values, one solve each");
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return invalid("ε values must be strictly decreasing");
    }
    let predicted = quantity.predicted(params, radius)?;
    let mut computed = Vec::with_capacity(sweep.len());
    for (&eps, res) in eps_list.iter().zip(sweep) {
        computed.push(quantity.measure(res)? * eps.powi(quantity.eps_power()));
    }
    let xs: Vec<f64> = eps_list.iter().map(|&e| e * (1.0 / e).ln()).collect();
    let (intercept, _) = fit_line(&xs, &computed);
    Ok(ExpansionReport {
        quantity,
        epsilons: eps_list.to_vec(),
        computed,
        predicted_leading: vec![predicted; eps_list.len()],
        extrapolated_coefficient: intercept,
        relative_gap: (intercept - predicted).abs() / predicted,
    })
}

/// Solves the sweep and reports one quantity.
pub fn verify_expansion(
    quantity: Quantity,
    params: &Params,
    radius: f64,
    eps_list: &[f64],
) -> Result<ExpansionReport> {
    if eps_list.len() < 3 {
        return invalid("an expansion check needs at least three ε values");
    }
    let sweep = radial_sweep(params, radius, eps_list, 1e-8)?;
    expansion_report(quantity, params, radius, eps_list, &sweep)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PLimitRow {
    pub p: f64,
    /// `max |W - b|`.
    pub sup_deviation: f64,
    /// Share of the cell mass within `R / 10` of the boundary.
    pub boundary_mass_fraction: f64,
}

/// Steady states for increasing `p` at fixed ε.
pub fn verify_p_limit(
    params_base: &Params,
    radius: f64,
    p_list: &[f64],
    eps: f64,
) -> Result<Vec<PLimitRow>> {
    if p_list.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("p values must be strictly increasing");
    }
    p_list
        .iter()
        .map(|&p| {
            let params = params_base.with_p(p).with_epsilon(eps);
            let res = solve_nonlocal_radial(&params, radius, 1e-8)?;
            let st = &res.steady;
            let sup_deviation = st
                .w
                .values()
                .iter()
                .map(|w| (w - params.b).abs())
                .fold(0.0, f64::max);
            let near = integrate_radial_from(&st.u, 0.9 * radius);
            Ok(PLimitRow {
                p,
                sup_deviation,
                boundary_mass_fraction: near / integrate_radial(&st.u),
            })
        })
        .collect()
}

/// Two-sided constants `r₁ ≤ W / (1 + d/ε)^{-2/p} ≤ r₂` over the nodes within
/// `window` of the boundary.
pub fn profile_envelope(w: &RadialProfile, eps: f64, p: f64, window: f64) -> (f64, f64) {
    let radius = w.grid().radius();
    w.nodes()
        .iter()
        .zip(w.values())
        .filter(|(&r, _)| radius - r <= window)
        .map(|(&r, &v)| v / (1.0 + (radius - r) / eps).powf(-2.0 / p))
        .fold((f64::INFINITY, 0.0), |(lo, hi), q| (lo.min(q), hi.max(q)))
}

/// `max W` over the nodes at distance greater than `delta` from the boundary.
pub fn interior_max(w: &RadialProfile, delta: f64) -> f64 {
    let radius = w.grid().radius();
    w.nodes()
        .iter()
        .zip(w.values())
        .filter(|(&r, _)| radius - r > delta)
        .map(|(_, &v)| v)
        .fold(0.0, f64::max)
}
