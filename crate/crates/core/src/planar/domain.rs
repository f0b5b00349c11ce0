//! Planar shapes, their signed distance and the masked Cartesian lattice.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Smallest feature of a shape must span this many cells.
pub const MIN_CELLS_ACROSS: f64 = 8.0;

const PROJECTION_ITERS: usize = 32;
const FRACTION_SUBSAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disk { radius: f64 },
    /// Semi-axes `a` along x and `b` along y.
    Ellipse { a: f64, b: f64 },
    /// Polar radius `r0 (1 + amplitude cos(k θ))`.
    Star { r0: f64, amplitude: f64, k: u32 },
}

impl Shape {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Disk { radius } => radius > 0.0 && radius.is_finite(),
            Shape::Ellipse { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            Shape::Star { r0, amplitude, k } => {
                r0 > 0.0 && r0.is_finite() && (0.0..1.0).contains(&amplitude) && (amplitude == 0.0 || k > 0)
            }
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid shape {self:?}"))
        }
    }

    /// Width of the thinnest part of the shape.
    pub fn narrowest_width(&self) -> f64 {
        match *self {
            Shape::Disk { radius } => 2.0 * radius,
            Shape::Ellipse { a, b } => 2.0 * a.min(b),
            Shape::Star { r0, amplitude, .. } => 2.0 * r0 * (1.0 - amplitude),
        }
    }

    /// Half-width of an axis-aligned box centred at the origin containing the shape.
    pub fn extent(&self) -> (f64, f64) {
        match *self {
            Shape::Disk { radius } => (radius, radius),
            Shape::Ellipse { a, b } => (a, b),
            Shape::Star { r0, amplitude, .. } => {
                let r = r0 * (1.0 + amplitude);
                (r, r)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Disk { radius } => PI * radius * radius,
            Shape::Ellipse { a, b } => PI * a * b,
            Shape::Star { r0, amplitude, .. } => PI * r0 * r0 * (1.0 + 0.5 * amplitude * amplitude),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Disk { radius } => x.hypot(y) < radius,
            Shape::Ellipse { a, b } => (x / a).powi(2) + (y / b).powi(2) < 1.0,
            Shape::Star { .. } => x.hypot(y) < self.polar_radius(y.atan2(x)),
        }
    }

    fn polar_radius(&self, theta: f64) -> f64 {
        match *self {
            Shape::Disk { radius } => radius,
            Shape::Star { r0, amplitude, k } => r0 * (1.0 + amplitude * (k as f64 * theta).cos()),
            Shape::Ellipse { a, b } => a * b / ((b * theta.cos()).powi(2) + (a * theta.sin()).powi(2)).sqrt(),
        }
    }

    /// Boundary point at parameter `t ∈ [0, 2π)`, traversed counterclockwise.
    pub fn point(&self, t: f64) -> [f64; 2] {
        match *self {
            Shape::Disk { radius } => [radius * t.cos(), radius * t.sin()],
            Shape::Ellipse { a, b } => [a * t.cos(), b * t.sin()],
            Shape::Star { .. } => {
                let r = self.polar_radius(t);
                [r * t.cos(), r * t.sin()]
            }
        }
    }

    fn derivatives(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        match *self {
            Shape::Disk { radius } => (
                [-radius * t.sin(), radius * t.cos()],
                [-radius * t.cos(), -radius * t.sin()],
            ),
            Shape::Ellipse { a, b } => ([-a * t.sin(), b * t.cos()], [-a * t.cos(), -b * t.sin()]),
            Shape::Star { r0, amplitude, k } => {
                let kf = k as f64;
                let r = self.polar_radius(t);
                let dr = -r0 * amplitude * kf * (kf * t).sin();
                let ddr = -r0 * amplitude * kf * kf * (kf * t).cos();
                let (s, c) = t.sin_cos();
                (
                    [dr * c - r * s, dr * s + r * c],
                    [ddr * c - 2.0 * dr * s - r * c, ddr * s + 2.0 * dr * c - r * s],
                )
            }
        }
    }

    /// Curvature at parameter `t`; polar finite differences for the star.
    pub fn curvature(&self, t: f64) -> f64 {
        match *self {
            Shape::Disk { radius } => 1.0 / radius,
            Shape::Ellipse { a, b } => {
                a * b / ((a * t.sin()).powi(2) + (b * t.cos()).powi(2)).powf(1.5)
            }
            Shape::Star { .. } => {
                let d = 1e-4;
                let r = self.polar_radius(t);
                let rp = (self.polar_radius(t + d) - self.polar_radius(t - d)) / (2.0 * d);
                let rpp = (self.polar_radius(t + d) - 2.0 * r + self.polar_radius(t - d)) / (d * d);
                (r * r + 2.0 * rp * rp - r * rpp) / (r * r + rp * rp).powf(1.5)
            }
        }
    }

    /// Signed distance, negative inside.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Disk { radius } => x.hypot(y) - radius,
            _ => {
                let dist = self.projection_distance(x, y);
                if self.contains(x, y) {
                    -dist
                } else {
                    dist
                }
            }
        }
    }

    /// Distance to the boundary by damped Newton on `(γ(t) - x)·γ'(t) = 0`,
    /// started from the polar angle of the point and from evenly spread
    /// parameters so that deep points find the global minimum.
    fn projection_distance(&self, x: f64, y: f64) -> f64 {
        let natural = match *self {
            Shape::Ellipse { a, b } => (y / b).atan2(x / a),
            _ => y.atan2(x),
        };
        let spread = match *self {
            Shape::Star { k, .. } => 2 * k.max(2) as usize,
            _ => 4,
        };
        let mut best = self.project_from(x, y, natural);
        for q in 0..spread {
            best = best.min(self.project_from(x, y, 2.0 * PI * q as f64 / spread as f64));
        }
        best
    }

    fn project_from(&self, x: f64, y: f64, start: f64) -> f64 {
        let dist = |t: f64| {
            let q = self.point(t);
            (q[0] - x).hypot(q[1] - y)
        };
        let mut t = start;
        let mut best = dist(t);
        for _ in 0..PROJECTION_ITERS {
            let q = self.point(t);
            let (d1, d2) = self.derivatives(t);
            let (dx, dy) = (q[0] - x, q[1] - y);
            let f = dx * d1[0] + dy * d1[1];
            let fp = d1[0] * d1[0] + d1[1] * d1[1] + dx * d2[0] + dy * d2[1];
            let step = if fp > 0.0 {
                -f / fp
            } else {
                // Not a local minimum direction; fall back to gradient descent.
                -f / (d1[0] * d1[0] + d1[1] * d1[1])
            };
            let mut scale = 1.0;
            let mut improved = false;
            for _ in 0..20 {
                let trial = t + scale * step;
                let dt = dist(trial);
                if dt <= best {
                    t = trial;
                    best = dt;
                    improved = true;
                    break;
                }
                scale *= 0.5;
            }
            if !improved || (scale * step).abs() < 1e-15 {
                break;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Inside,
    /// Inside, with at least one lattice neighbour outside.
    Cut,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: [f64; 2],
    pub inward_normal: [f64; 2],
    pub curvature: f64,
    pub arclength: f64,
}

/// Uniform lattice `x = i h`, `y = j h` covering the shape, with each node
/// classified by the sign of the signed distance.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedGrid {
    shape: Shape,
    h: f64,
    /// Lattice index of the first column/row.
    i0: i64,
    j0: i64,
    nx: usize,
    ny: usize,
    phi: Vec<f64>,
    kinds: Vec<NodeKind>,
    /// `h²` times the inside fraction of each node's dual cell.
    weights: Vec<f64>,
}

impl MaskedGrid {
    pub fn new(shape: Shape, h: f64) -> Result<Self> {
        shape.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return invalid(format!("spacing must be positive, got {h}"));
        }
        if shape.narrowest_width() < MIN_CELLS_ACROSS * h {
            return invalid(format!(
                "spacing {h} too coarse: the narrowest width {} spans fewer than {MIN_CELLS_ACROSS} cells",
                shape.narrowest_width()
            ));
        }
        let (ex, ey) = shape.extent();
        let i0 = -((ex / h).ceil() as i64 + 2);
        let j0 = -((ey / h).ceil() as i64 + 2);
        let nx = (2 * -i0 + 1) as usize;
        let ny = (2 * -j0 + 1) as usize;

        let mut phi = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x = (i0 + i as i64) as f64 * h;
                let y = (j0 + j as i64) as f64 * h;
                phi.push(shape.signed_distance(x, y));
            }
        }
        let mut kinds = vec![NodeKind::Outside; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if phi[k] >= 0.0 {
                    continue;
                }
                let cut = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].iter().any(|&(di, dj)| {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    phi[b as usize * nx + a as usize] >= 0.0
                });
                kinds[k] = if cut { NodeKind::Cut } else { NodeKind::Inside };
            }
        }

        let mut weights = vec![0.0; nx * ny];
        let s = FRACTION_SUBSAMPLES;
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                // A dual cell is whole when its centre is at least h/√2 from the boundary.
                if phi[k] < -h * 0.75 {
                    weights[k] = h * h;
                } else if phi[k] < h * 0.75 {
                    let x = (i0 + i as i64) as f64 * h;
                    let y = (j0 + j as i64) as f64 * h;
                    let mut hits = 0;
                    for a in 0..s {
                        for b in 0..s {
                            let sx = x + h * ((a as f64 + 0.5) / s as f64 - 0.5);
                            let sy = y + h * ((b as f64 + 0.5) / s as f64 - 0.5);
                            if shape.contains(sx, sy) {
                                hits += 1;
                            }
                        }
                    }
                    weights[k] = h * h * hits as f64 / (s * s) as f64;
                }
            }
        }

        let grid = Self { shape, h, i0, j0, nx, ny, phi, kinds, weights };
        if grid.unknown_count() == 0 {
            return invalid("mask has no inside node");
        }
        Ok(grid)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        let i = (k % self.nx) as i64 + self.i0;
        let j = (k / self.nx) as i64 + self.j0;
        [i as f64 * self.h, j as f64 * self.h]
    }

    /// Lattice position of `(x, y)` in cell units from node `(0, 0)`.
    pub(crate) fn lattice_position(&self, x: f64, y: f64) -> (f64, f64) {
        (x / self.h - self.i0 as f64, y / self.h - self.j0 as f64)
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn kind(&self, k: usize) -> NodeKind {
        self.kinds[k]
    }

    pub fn is_unknown(&self, k: usize) -> bool {
        self.kinds[k] != NodeKind::Outside
    }

    pub fn unknown_count(&self) -> usize {
        self.kinds.iter().filter(|&&k| k != NodeKind::Outside).count()
    }

    /// Number of inside nodes (cut included) times `h²`.
    pub fn inside_area(&self) -> f64 {
        self.unknown_count() as f64 * self.h * self.h
    }

    /// Quadrature weights; outside nodes carry the inside part of their dual cell.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sum of the quadrature weights.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest extent of the lattice, used as the domain diameter scale.
    pub fn diameter(&self) -> f64 {
        let (ex, ey) = self.shape.extent();
        2.0 * ex.max(ey)
    }
}

/// Lattice plus `samples` boundary points equally spaced in arclength.
pub fn build_domain(shape: Shape, h: f64, samples: usize) -> Result<(MaskedGrid, Vec<BoundarySample>)> {
    let grid = MaskedGrid::new(shape, h)?;
    let samples = boundary_samples(&shape, samples)?;
    Ok((grid, samples))
}

/// Boundary samples equally spaced in arclength, starting at `t = 0`.
pub fn boundary_samples(shape: &Shape, count: usize) -> Result<Vec<BoundarySample>> {
    shape.validate()?;
    if count == 0 {
        return invalid("at least one boundary sample is required");
    }
    let fine = 4096 * count.max(16);
    let dt = 2.0 * PI / fine as f64;
    let speed = |t: f64| {
        let (d1, _) = shape.derivatives(t);
        d1[0].hypot(d1[1])
    };
    // Cumulative arclength by Simpson on each fine interval.
    let mut cumulative = Vec::with_capacity(fine + 1);
    cumulative.push(0.0);
    for q in 0..fine {
        let t = q as f64 * dt;
        let piece = dt / 6.0 * (speed(t) + 4.0 * speed(t + 0.5 * dt) + speed(t + dt));
        cumulative.push(cumulative[q] + piece);
    }
    let perimeter = cumulative[fine];
    let mut out = Vec::with_capacity(count);
    let mut q = 0;
    for s in 0..count {
        let target = perimeter * s as f64 / count as f64;
        while cumulative[q + 1] < target {
            q += 1;
        }
        let frac = (target - cumulative[q]) / (cumulative[q + 1] - cumulative[q]);
        let t = (q as f64 + frac) * dt;
        let (d1, _) = shape.derivatives(t);
        let norm = d1[0].hypot(d1[1]);
        out.push(BoundarySample {
            point: shape.point(t),
            inward_normal: [-d1[1] / norm, d1[0] / norm],
            curvature: shape.curvature(t),
            arclength: target,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_area_from_node_count() {
        let g = MaskedGrid::new(Shape::Disk { radius: 1.0 }, 0.01).unwrap();
        assert!((g.inside_area() - PI).abs() < 0.01, "{}", g.inside_area());
        assert!((g.measure() - PI).abs() < 1e-3, "{}", g.measure());
    }

    #[test]
    fn classification_matches_phi() {
        let g = MaskedGrid::new(Shape::Ellipse { a: 1.5, b: 0.7 }, 0.05).unwrap();
        for (k, &phi) in g.phi().iter().enumerate() {
            assert_eq!(g.is_unknown(k), phi < 0.0);
        }
        assert!(g.kinds().iter().any(|&k| k == NodeKind::Cut));
        assert!(g.kinds().iter().any(|&k| k == NodeKind::Inside));
    }

    #[test]
    fn degenerate_star_is_a_disk() {
        let star = MaskedGrid::new(Shape::Star { r0: 0.8, amplitude: 0.0, k: 5 }, 0.02).unwrap();
        let disk = MaskedGrid::new(Shape::Disk { radius: 0.8 }, 0.02).unwrap();
        assert_eq!(star.kinds(), disk.kinds());
        for (a, b) in star.phi().iter().zip(disk.phi()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_signed_distance() {
        let e = Shape::Ellipse { a: 2.0, b: 1.0 };
        assert!((e.signed_distance(0.0, 0.0) + 1.0).abs() < 1e-12);
        assert!((e.signed_distance(3.0, 0.0) - 1.0).abs() < 1e-12);
        assert!((e.signed_distance(0.0, -1.5) - 0.5).abs() < 1e-12);
        // Points pushed along the normal by a known amount.
        for q in 0..24 {
            let t = q as f64 * PI / 12.0 + 0.1;
            let p = e.point(t);
            let (d1, _) = e.derivatives(t);
            let n = d1[0].hypot(d1[1]);
            let out = [d1[1] / n, -d1[0] / n];
            for d in [0.05, 0.2] {
                let sd = e.signed_distance(p[0] + d * out[0], p[1] + d * out[1]);
                assert!((sd - d).abs() < 1e-9, "t {t} d {d}: {sd}");
                let sd = e.signed_distance(p[0] - d * out[0], p[1] - d * out[1]);
                assert!((sd + d).abs() < 1e-9, "t {t} d {d}: {sd}");
            }
        }
    }

    #[test]
    fn too_coarse_is_rejected() {
        assert!(MaskedGrid::new(Shape::Disk { radius: 1.0 }, 0.3).is_err());
        assert!(MaskedGrid::new(Shape::Ellipse { a: 1.0, b: 0.1 }, 0.05).is_err());
        assert!(MaskedGrid::new(Shape::Disk { radius: 1.0 }, 0.25).is_ok());
    }

    #[test]
    fn disk_samples() {
        let s = boundary_samples(&Shape::Disk { radius: 2.0 }, 40).unwrap();
        for (q, sample) in s.iter().enumerate() {
            assert!((sample.curvature - 0.5).abs() < 1e-6);
            let n = sample.inward_normal;
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-10);
            // Inward normal points at the centre.
            assert!((n[0] + sample.point[0] / 2.0).abs() < 1e-10);
            assert!((sample.arclength - 4.0 * PI * q as f64 / 40.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ellipse_samples_span_curvature_extremes() {
        let (a, b) = (2f64.sqrt(), 0.5f64.sqrt());
        let s = boundary_samples(&Shape::Ellipse { a, b }, 64).unwrap();
        let kmin = s.iter().map(|x| x.curvature).fold(f64::INFINITY, f64::min);
        let kmax = s.iter().map(|x| x.curvature).fold(0.0, f64::max);
        // Extremes b/a² at the minor-axis ends and a/b² at the major-axis ends.
        assert!((kmin - b / (a * a)).abs() < 1e-9, "{kmin}");
        assert!((kmax - a / (b * b)).abs() < 1e-9, "{kmax}");
        for x in &s {
            assert!(x.curvature >= b / (a * a) - 1e-12 && x.curvature <= a / (b * b) + 1e-12);
            let n = x.inward_normal;
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-10);
            assert!(e_contains(a, b, x.point[0] + 1e-3 * n[0], x.point[1] + 1e-3 * n[1]));
        }
        // Equal arclength gaps: chord lengths nearly equal.
        let chords: Vec<f64> = (0..64)
            .map(|q| {
                let p = s[q].point;
                let r = s[(q + 1) % 64].point;
                (p[0] - r[0]).hypot(p[1] - r[1])
            })
            .collect();
        let cmin = chords.iter().copied().fold(f64::INFINITY, f64::min);
        let cmax = chords.iter().copied().fold(0.0, f64::max);
        assert!(cmax / cmin < 1.01);
    }

    fn e_contains(a: f64, b: f64, x: f64, y: f64) -> bool {
        (x / a).powi(2) + (y / b).powi(2) < 1.0
    }

    #[test]
    fn star_curvature_matches_analytic() {
        let star = Shape::Star { r0: 1.0, amplitude: 0.2, k: 5 };
        for q in 0..20 {
            let t = q as f64 * 0.31;
            // Parametric curvature from the exact derivatives.
            let (d1, d2) = star.derivatives(t);
            let exact = (d1[0] * d2[1] - d1[1] * d2[0]) / (d1[0].hypot(d1[1])).powi(3);
            assert!((star.curvature(t) - exact).abs() < 1e-5 * exact.abs().max(1.0));
        }
    }
}
