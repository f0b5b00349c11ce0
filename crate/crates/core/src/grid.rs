//! Graded radial meshes, profiles on them and the quadrature/interpolation
//! helpers every radial solver shares.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::params::unit_sphere_area;

/// Ratio between the layer width handed to [`make_graded_grid`] and the mesh
/// spacing at `r = R`.
pub const BOUNDARY_SPACING_FRACTION: f64 = 0.1;

/// Strictly increasing nodes on `[0, R]` with the dimension used for the
/// `r^{n-1}` measure.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    radius: f64,
    dim: usize,
    nodes: Vec<f64>,
}

impl RadialGrid {
    /// Builds a grid from explicit nodes, checking the invariants.
    pub fn from_nodes(nodes: Vec<f64>, dim: usize) -> Result<Self> {
        if nodes.len() < 2 {
            return invalid("a radial grid needs at least two nodes");
        }
        if dim == 0 {
            return invalid("dimension must be at least 1");
        }
        if nodes[0] != 0.0 {
            return invalid(format!("first node must be 0, got {}", nodes[0]));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return invalid("grid nodes must be finite and strictly increasing");
        }
        let radius = *nodes.last().unwrap();
        Ok(Self { radius, dim, nodes })
    }

    /// Uniform grid with `count` nodes.
    pub fn uniform(radius: f64, dim: usize, count: usize) -> Result<Self> {
        if count < 2 || !(radius > 0.0) {
            return invalid("uniform grid needs count >= 2 and a positive radius");
        }
        let h = radius / (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|i| i as f64 * h).collect();
        nodes[count - 1] = radius;
        Self::from_nodes(nodes, dim)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Length of interval `i`, i.e. `r_{i+1} - r_i`.
    pub fn spacing(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Trapezoid weights of `ω_n ∫ r^{n-1} f dr`, one per node.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let omega = unit_sphere_area(self.dim);
        let k = self.dim as i32 - 1;
        let n = self.nodes.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let h = self.spacing(i);
            weights[i] += 0.5 * h;
            weights[i + 1] += 0.5 * h;
        }
        for (w, &r) in weights.iter_mut().zip(&self.nodes) {
            *w *= omega * r.powi(k);
        }
        weights
    }
}

/// Geometrically graded grid on `[0, R]` with `count` nodes.
///
/// The last interval has length `layer_width / 10`; interval lengths change by
/// a constant ratio from `r = R` toward `r = 0`. When `count` is large enough
/// that a uniform mesh would already be finer than the boundary spacing, the
/// remaining intervals are uniform instead.
pub fn make_graded_grid(
    radius: f64,
    dim: usize,
    layer_width: f64,
    count: usize,
) -> Result<RadialGrid> {
    if count < 16 {
        return invalid(format!("graded grid needs at least 16 nodes, got {count}"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return invalid(format!("radius must be positive, got {radius}"));
    }
    if !(layer_width > 0.0 && layer_width < radius) {
        return invalid(format!(
            "layer width {layer_width} must lie in (0, R = {radius})"
        ));
    }
    let intervals = count - 1;
    let h_end = layer_width * BOUNDARY_SPACING_FRACTION;
    let target = radius / h_end;
    if target <= intervals as f64 {
        // Uniform spacing below h_end everywhere except the last interval.
        let h = (radius - h_end) / (intervals - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|i| i as f64 * h).collect();
        nodes[intervals - 1] = radius - h_end;
        nodes[intervals] = radius;
        return RadialGrid::from_nodes(nodes, dim);
    }
    let ratio = grading_ratio(target, intervals);

    // Distances from the boundary, accumulated from r = R inward.
    let mut depth = Vec::with_capacity(count);
    depth.push(0.0);
    let mut h = h_end;
    let mut acc = 0.0;
    for _ in 0..intervals {
        acc += h;
        depth.push(acc);
        h *= ratio;
    }
    // Rescale the interior so the centre lands exactly on 0 while keeping the
    // boundary spacing untouched.
    let total = acc;
    let mut nodes: Vec<f64> = depth.iter().rev().map(|d| radius - d).collect();
    let inner_scale = (radius - h_end) / (total - h_end);
    for (i, node) in nodes.iter_mut().enumerate().take(intervals) {
        let d = depth[intervals - i];
        *node = radius - h_end - (d - h_end) * inner_scale;
    }
    nodes[0] = 0.0;
    nodes[intervals] = radius;
    nodes[intervals - 1] = radius - h_end;
    RadialGrid::from_nodes(nodes, dim)
}

/// Solves `Σ_{k<n} q^k = target` for `q ≥ 1`, given `target > n`.
fn grading_ratio(target: f64, intervals: usize) -> f64 {
    let n = intervals as f64;
    let sum = |q: f64| -> f64 {
        if (q - 1.0).abs() < 1e-12 {
            n
        } else {
            (q.powf(n) - 1.0) / (q - 1.0)
        }
    };
    let (mut lo, mut hi) = (1.0, 2.0);
    while sum(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// A function of radius sampled on the nodes of a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "profile has {} values for {} nodes",
                values.len(),
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("profile value at node {i} is not finite"));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at `r = R`.
    pub fn boundary_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Pointwise map on the same grid.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&r, &v)| f(r, v))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Piecewise-linear evaluation at an arbitrary radius in `[0, R]`.
    pub fn eval(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        if r <= 0.0 {
            return self.values[0];
        }
        if r >= self.grid.radius() {
            return self.boundary_value();
        }
        let j = nodes.partition_point(|&x| x <= r);
        let (r0, r1) = (nodes[j - 1], nodes[j]);
        let t = (r - r0) / (r1 - r0);
        self.values[j - 1] * (1.0 - t) + self.values[j] * t
    }
}

/// `ω_n ∫_0^R r^{n-1} f(r) dr` by the trapezoid rule on the profile's grid.
pub fn integrate_radial(f: &RadialProfile) -> f64 {
    f.grid()
        .trapezoid_weights()
        .iter()
        .zip(f.values())
        .map(|(w, v)| w * v)
        .sum()
}

/// `ω_n ∫_{r_lo}^R r^{n-1} f(r) dr`, treating `r^{n-1} f` as piecewise linear.
pub fn integrate_radial_from(f: &RadialProfile, r_lo: f64) -> f64 {
    let grid = f.grid();
    let nodes = grid.nodes();
    let k = grid.dim() as i32 - 1;
    let g = |i: usize| nodes[i].powi(k) * f.values()[i];
    let r_lo = r_lo.clamp(0.0, grid.radius());
    let mut total = 0.0;
    for i in 0..nodes.len() - 1 {
        let (a, b) = (nodes[i], nodes[i + 1]);
        if b <= r_lo {
            continue;
        }
        if a >= r_lo {
            total += 0.5 * (b - a) * (g(i) + g(i + 1));
        } else {
            let t = (r_lo - a) / (b - a);
            let g_lo = g(i) * (1.0 - t) + g(i + 1) * t;
            total += 0.5 * (b - r_lo) * (g_lo + g(i + 1));
        }
    }
    unit_sphere_area(grid.dim()) * total
}

/// Radius where the piecewise-linear profile crosses `target`.
///
/// The search runs from `r = R` inward and returns the first crossing, which
/// is the unique one when the profile is monotone.
pub fn interpolate_monotone(f: &RadialProfile, target: f64) -> Result<f64> {
    let (min, max) = (f.min(), f.max());
    if !(target >= min && target <= max) {
        return Err(Error::NoCrossing { target, min, max });
    }
    let nodes = f.nodes();
    let values = f.values();
    for i in (0..values.len()).rev() {
        if values[i] == target {
            return Ok(nodes[i]);
        }
        if i == 0 {
            break;
        }
        let (lo, hi) = (values[i - 1], values[i]);
        if (lo - target) * (hi - target) < 0.0 {
            let t = (target - lo) / (hi - lo);
            return Ok(nodes[i - 1] + t * (nodes[i] - nodes[i - 1]));
        }
    }
    Err(Error::NoCrossing { target, min, max })
}
