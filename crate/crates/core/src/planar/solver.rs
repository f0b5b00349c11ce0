//! Local and nonlocal solves on a masked lattice.
//!
//! The Laplacian is the five-point stencil with Shortley–Weller weights on
//! rows whose neighbours fall outside: the boundary value `b` sits on the
//! zero crossing of the linearly interpolated signed distance.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::nonlocal::{solve_nonlocal, LocalDomain, NonlocalConfig, NonlocalResult};
use crate::params::Params;
use crate::radial::pow;

use super::domain::MaskedGrid;

/// Boundary fractions below this are clamped.
const MIN_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarSolveConfig {
    /// Bound on the max norm of `Δ_h W - W^{1+p}/σ`. Rows whose stencil is
    /// stiffened by a nearby boundary are scaled back to the `4/h²` diagonal.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Over-relaxation factor; `None` picks `2 / (1 + sin(π h / D))`.
    pub omega: Option<f64>,
    /// Sweeps between residual evaluations.
    pub check_every: usize,
}

impl Default for PlanarSolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 200_000,
            omega: None,
            check_every: 10,
        }
    }
}

impl PlanarSolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_sweeps == 0 || self.check_every == 0 {
            return invalid("planar solve needs tol > 0, max_sweeps > 0 and check_every > 0");
        }
        if let Some(w) = self.omega {
            if !(w > 0.0 && w < 2.0) {
                return invalid(format!("relaxation factor {w} outside (0, 2)"));
            }
        }
        Ok(())
    }
}

/// One unknown's row of `Δ_h`.
#[derive(Debug, Clone)]
struct Row {
    node: usize,
    neighbours: [(usize, f64); 4],
    count: usize,
    /// Summed weight of neighbours replaced by the boundary value.
    boundary: f64,
    diag: f64,
}

/// Rows of the masked Laplacian in row-major order of the unknowns.
#[derive(Debug, Clone)]
pub struct Stencil {
    rows: Vec<Row>,
    reference_diag: f64,
}

impl Stencil {
    pub fn new(grid: &MaskedGrid) -> Self {
        let h = grid.h();
        let nx = grid.nx();
        let phi = grid.phi();
        let mut rows = Vec::with_capacity(grid.unknown_count());
        for k in 0..grid.len() {
            if !grid.is_unknown(k) {
                continue;
            }
            let mut row = Row {
                node: k,
                neighbours: [(0, 0.0); 4],
                count: 0,
                boundary: 0.0,
                diag: 0.0,
            };
            for (minus, plus) in [(k - 1, k + 1), (k - nx, k + nx)] {
                let arm = |j: usize| {
                    if grid.is_unknown(j) {
                        h
                    } else {
                        let theta = phi[k] / (phi[k] - phi[j]);
                        theta.clamp(MIN_FRACTION, 1.0) * h
                    }
                };
                let (hm, hp) = (arm(minus), arm(plus));
                for (j, arm_len) in [(minus, hm), (plus, hp)] {
                    let a = 2.0 / (arm_len * (hm + hp));
                    row.diag += a;
                    if grid.is_unknown(j) {
                        row.neighbours[row.count] = (j, a);
                        row.count += 1;
                    } else {
                        row.boundary += a;
                    }
                }
            }
            rows.push(row);
        }
        Self {
            rows,
            reference_diag: 4.0 / (h * h),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(Δ_h W)` at unknown row `r`, boundary value `b`.
    fn apply(&self, r: usize, w: &[f64], b: f64) -> f64 {
        let row = &self.rows[r];
        let mut s = row.boundary * b;
        for &(j, a) in &row.neighbours[..row.count] {
            s += a * w[j];
        }
        s - row.diag * w[row.node]
    }

    /// Scaled max norm of `Δ_h W - W^{1+p}/σ`.
    pub fn residual(&self, w: &[f64], sigma: f64, params: &Params) -> f64 {
        (0..self.rows.len())
            .map(|r| {
                let row = &self.rows[r];
                let f = self.apply(r, w, params.b) - pow(w[row.node], 1.0 + params.p) / sigma;
                f.abs() * (self.reference_diag / row.diag).min(1.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Nodal values on the full lattice; outside nodes hold the boundary value.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarField {
    grid: Arc<MaskedGrid>,
    values: Vec<f64>,
}

impl PlanarField {
    pub fn new(grid: Arc<MaskedGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid("field length does not match the lattice");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("field values must be finite");
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<MaskedGrid>, value: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![value; n],
        }
    }

    pub fn grid(&self) -> &Arc<MaskedGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bilinear interpolation; `None` outside the lattice.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let (gx, gy) = self.grid.lattice_position(x, y);
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        if !(gx >= 0.0 && gy >= 0.0 && gx <= (nx - 1) as f64 && gy <= (ny - 1) as f64) {
            return None;
        }
        let i = (gx.floor() as usize).min(nx - 2);
        let j = (gy.floor() as usize).min(ny - 2);
        let (fx, fy) = (gx - i as f64, gy - j as f64);
        let v = |a: usize, b: usize| self.values[self.grid.index(a, b)];
        Some(
            (1.0 - fx) * (1.0 - fy) * v(i, j)
                + fx * (1.0 - fy) * v(i + 1, j)
                + (1.0 - fx) * fy * v(i, j + 1)
                + fx * fy * v(i + 1, j + 1),
        )
    }

    /// Largest absolute difference over the unknown nodes.
    pub fn max_difference(&self, other: &PlanarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(k, _)| self.grid.is_unknown(*k))
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Minimum over the unknown nodes.
    pub fn min_inside(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.grid.is_unknown(*k))
            .map(|(_, &v)| v)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Solves `σ Δ_h W = W^{1+p}` with `W = b` on the boundary by nonlinear SOR
/// (one pointwise Newton step per node, row-major order), starting from
/// `start` or from the super-solution `W ≡ b`.
pub fn solve_local_2d(
    sigma: f64,
    params: &Params,
    grid: &Arc<MaskedGrid>,
    stencil: &Stencil,
    cfg: &PlanarSolveConfig,
    start: Option<&PlanarField>,
) -> Result<PlanarField> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    params.validate()?;
    cfg.validate()?;
    if stencil.len() != grid.unknown_count() {
        return invalid("stencil was built for another lattice");
    }
    let b = params.b;
    let p = params.p;
    let mut w = match start {
        Some(f) => {
            if f.values.len() != grid.len() {
                return invalid("initial field does not match the lattice");
            }
            f.values.clone()
        }
        None => vec![b; grid.len()],
    };
    for (k, v) in w.iter_mut().enumerate() {
        if grid.is_unknown(k) {
            *v = v.clamp(f64::MIN_POSITIVE, b);
        } else {
            *v = b;
        }
    }
    let omega = cfg
        .omega
        .unwrap_or_else(|| 2.0 / (1.0 + (PI * grid.h() / grid.diameter()).sin()));
    let inv_sigma = 1.0 / sigma;

    let mut residual = stencil.residual(&w, sigma, params);
    let mut sweeps = 0;
    while residual >= cfg.tol {
        if sweeps >= cfg.max_sweeps {
            return Err(Error::NoConvergence {
                solver: "planar SOR",
                iterations: sweeps,
                residual,
            });
        }
        for _ in 0..cfg.check_every {
            for row in &stencil.rows {
                let k = row.node;
                let mut s = row.boundary * b;
                for &(j, a) in &row.neighbours[..row.count] {
                    s += a * w[j];
                }
                let old = w[k];
                let wp = pow(old, p) * inv_sigma;
                let f = s - row.diag * old - wp * old;
                let fp = row.diag + (1.0 + p) * wp;
                let next = old + omega * f / fp;
                w[k] = if next > 0.0 { next.min(b) } else { 0.5 * old };
            }
        }
        sweeps += cfg.check_every;
        residual = stencil.residual(&w, sigma, params);
        if !residual.is_finite() {
            return Err(Error::NoConvergence {
                solver: "planar SOR",
                iterations: sweeps,
                residual,
            });
        }
    }
    PlanarField::new(grid.clone(), w)
}

/// Masked lattice as a [`LocalDomain`]; each solve starts from the previous
/// solution.
#[derive(Debug, Clone)]
pub struct PlanarDomain {
    pub grid: Arc<MaskedGrid>,
    pub stencil: Arc<Stencil>,
    pub cfg: PlanarSolveConfig,
    warm: Option<PlanarField>,
}

impl PlanarDomain {
    pub fn new(grid: Arc<MaskedGrid>, cfg: PlanarSolveConfig) -> Self {
        let stencil = Arc::new(Stencil::new(&grid));
        Self {
            grid,
            stencil,
            cfg,
            warm: None,
        }
    }

    /// Forgets the warm start.
    pub fn reset(&mut self) {
        self.warm = None;
    }
}

impl LocalDomain for PlanarDomain {
    type Field = PlanarField;

    fn measure(&self) -> f64 {
        self.grid.measure()
    }

    fn solve_local(&mut self, sigma: f64, params: &Params) -> Result<PlanarField> {
        let w = solve_local_2d(
            sigma,
            params,
            &self.grid,
            &self.stencil,
            &self.cfg,
            self.warm.as_ref(),
        )?;
        self.warm = Some(w.clone());
        Ok(w)
    }

    fn integrate_power(&self, field: &PlanarField, p: f64) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&field.values)
            .filter(|(wt, _)| **wt > 0.0)
            .map(|(wt, v)| wt * pow(*v, p))
            .sum()
    }

    fn scaled_power(&self, field: &PlanarField, p: f64, amplitude: f64) -> PlanarField {
        PlanarField {
            grid: field.grid.clone(),
            values: field.values.iter().map(|&v| amplitude * pow(v, p)).collect(),
        }
    }
}

/// Discrete `∫ f` with the lattice quadrature weights.
pub fn integrate_field(field: &PlanarField) -> f64 {
    field
        .grid
        .weights()
        .iter()
        .zip(&field.values)
        .map(|(wt, v)| wt * v)
        .sum()
}

/// Nonlocal steady state on the masked lattice.
pub fn solve_nonlocal_2d(
    params: &Params,
    grid: Arc<MaskedGrid>,
    tol_rel: f64,
) -> Result<NonlocalResult<PlanarField>> {
    if params.dim != 2 {
        return invalid("planar solves need dim = 2");
    }
    let mut domain = PlanarDomain::new(grid, PlanarSolveConfig::default());
    solve_nonlocal(params, &mut domain, &NonlocalConfig::with_tol(tol_rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlocal::constraint_value;
    use crate::planar::domain::Shape;

    fn disk_grid(h: f64) -> Arc<MaskedGrid> {
        Arc::new(MaskedGrid::new(Shape::Disk { radius: 1.0 }, h).unwrap())
    }

    fn params() -> Params {
        Params::new(0.05, 2.0, 1.0, 1.0, 2).unwrap()
    }

    #[test]
    fn stencil_is_exact_on_quadratics() {
        // Δ(x² + 2y²) = 6 including Shortley–Weller rows, once the boundary
        // value is replaced by the true function at the crossing point.
        let grid = Arc::new(MaskedGrid::new(Shape::Ellipse { a: 1.0, b: 0.7 }, 0.05).unwrap());
        let st = Stencil::new(&grid);
        for row in &st.rows {
            let [x, y] = grid.coords(row.node);
            // Only interior rows; cut rows see a non-constant boundary value.
            if row.boundary == 0.0 {
                let f = |q: [f64; 2]| q[0] * q[0] + 2.0 * q[1] * q[1];
                let mut s = -row.diag * f([x, y]);
                for &(j, a) in &row.neighbours[..row.count] {
                    s += a * f(grid.coords(j));
                }
                assert!((s - 6.0).abs() < 1e-8, "{s}");
            }
        }
    }

    #[test]
    fn cut_rows_reproduce_linear_functions() {
        // With boundary data equal to a constant, a constant solves Δ_h W = 0.
        let grid = disk_grid(0.05);
        let st = Stencil::new(&grid);
        let w = vec![0.7; grid.len()];
        for r in 0..st.len() {
            assert!(st.apply(r, &w, 0.7).abs() < 1e-9);
        }
    }

    #[test]
    fn large_sigma_is_torsion_like() {
        let grid = disk_grid(0.02);
        let st = Stencil::new(&grid);
        let pr = params();
        let sigma = 1e4;
        let w = solve_local_2d(sigma, &pr, &grid, &st, &PlanarSolveConfig::default(), None).unwrap();
        let dev = w
            .values()
            .iter()
            .map(|v| (v - pr.b).abs())
            .fold(0.0, f64::max);
        // Bound b^{1+p} diam² / (8σ); the disk torsion (1 - r²)/4 gives the value.
        assert!(dev <= 4.0 / (8.0 * sigma));
        assert!((dev - 1.0 / (4.0 * sigma)).abs() < 1e-3 / (4.0 * sigma), "{dev}");
    }

    #[test]
    fn solution_bounds_and_residual() {
        let grid = disk_grid(0.02);
        let st = Stencil::new(&grid);
        let pr = params();
        let cfg = PlanarSolveConfig::default();
        let w = solve_local_2d(0.01, &pr, &grid, &st, &cfg, None).unwrap();
        assert!(st.residual(w.values(), 0.01, &pr) < cfg.tol);
        assert!(w.min_inside() > 0.0);
        assert!(w.values().iter().all(|&v| v <= pr.b));
    }

    #[test]
    fn starts_agree() {
        let grid = Arc::new(MaskedGrid::new(Shape::Ellipse { a: 1.2, b: 0.8 }, 0.03).unwrap());
        let st = Stencil::new(&grid);
        let pr = params();
        let cfg = PlanarSolveConfig::default();
        let high = solve_local_2d(0.005, &pr, &grid, &st, &cfg, None).unwrap();
        let low_start = PlanarField::constant(grid.clone(), 1e-8);
        let low = solve_local_2d(0.005, &pr, &grid, &st, &cfg, Some(&low_start)).unwrap();
        assert!(high.max_difference(&low) <= 10.0 * cfg.tol);
    }

    #[test]
    fn constraint_value_increases_on_the_lattice() {
        let mut domain = PlanarDomain::new(disk_grid(0.04), PlanarSolveConfig::default());
        let pr = params();
        let mut prev = 0.0;
        for k in 0..6 {
            let (g, _) = constraint_value(0.1 * 2f64.powi(k), &pr, &mut domain).unwrap();
            assert!(g > prev * (1.0 + 1e-9));
            prev = g;
        }
    }

    #[test]
    fn nonlocal_mass() {
        let pr = params();
        let res = solve_nonlocal_2d(&pr, disk_grid(0.04), 1e-6).unwrap();
        assert!((integrate_field(&res.steady.u) - pr.m).abs() < 1e-6 * pr.m);
        assert!(res.constraint_residual < 1e-6);
    }

    #[test]
    fn rejects_bad_sigma_and_dimension() {
        let grid = disk_grid(0.05);
        let st = Stencil::new(&grid);
        let cfg = PlanarSolveConfig::default();
        assert!(solve_local_2d(0.0, &params(), &grid, &st, &cfg, None).is_err());
        let three = Params { dim: 3, ..params() };
        assert!(solve_nonlocal_2d(&three, grid, 1e-6).is_err());
    }
}
