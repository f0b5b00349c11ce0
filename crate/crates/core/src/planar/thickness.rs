//! Layer thickness along inward normals.

use crate::error::{invalid, Result};
use crate::params::Params;
use crate::stats::spearman;

use super::domain::BoundarySample;
use super::solver::PlanarField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThicknessRow {
    pub arclength: f64,
    pub curvature: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessReport {
    pub rows: Vec<ThicknessRow>,
    /// Arclengths of samples whose ray left the domain before crossing.
    pub skipped: Vec<f64>,
}

impl ThicknessReport {
    pub fn curvature_correlation(&self) -> f64 {
        let k: Vec<f64> = self.rows.iter().map(|r| r.curvature).collect();
        let t: Vec<f64> = self.rows.iter().map(|r| r.thickness).collect();
        spearman(&k, &t)
    }

    /// Standard deviation over mean of the thickness.
    pub fn coefficient_of_variation(&self) -> f64 {
        let n = self.rows.len() as f64;
        let mean = self.rows.iter().map(|r| r.thickness).sum::<f64>() / n;
        let var = self.rows.iter().map(|r| (r.thickness - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() / mean
    }
}

/// Marches from each sample along its inward normal in steps of `h/4` until
/// the interpolated field drops below `level`, then bisects the crossing.
pub fn curvature_thickness_report(
    w: &PlanarField,
    samples: &[BoundarySample],
    level: f64,
    params: &Params,
) -> Result<ThicknessReport> {
    if !(level > 0.0 && level < params.b) {
        return invalid(format!("level {level} must lie in (0, b = {})", params.b));
    }
    let grid = w.grid();
    if level <= w.min_inside() {
        return invalid(format!(
            "level {level} is below the field minimum {}",
            w.min_inside()
        ));
    }
    let shape = grid.shape();
    let step = 0.25 * grid.h();
    let max_steps = (grid.diameter() / step).ceil() as usize + 1;
    let mut rows = Vec::with_capacity(samples.len());
    let mut skipped = Vec::new();
    for s in samples {
        let at = |d: f64| [s.point[0] + d * s.inward_normal[0], s.point[1] + d * s.inward_normal[1]];
        let value = |d: f64| {
            let q = at(d);
            w.sample(q[0], q[1])
        };
        let mut crossing = None;
        let mut prev = 0.0;
        for q in 1..=max_steps {
            let d = q as f64 * step;
            let x = at(d);
            if !shape.contains(x[0], x[1]) {
                break;
            }
            match value(d) {
                Some(v) if v < level => {
                    crossing = Some((prev, d));
                    break;
                }
                Some(_) => prev = d,
                None => break,
            }
        }
        match crossing {
            Some((mut lo, mut hi)) => {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if value(mid).is_some_and(|v| v < level) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                rows.push(ThicknessRow {
                    arclength: s.arclength,
                    curvature: s.curvature,
                    thickness: 0.5 * (lo + hi),
                });
            }
            None => skipped.push(s.arclength),
        }
    }
    Ok(ThicknessReport { rows, skipped })
}
