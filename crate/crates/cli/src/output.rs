//! CSV and PNG writers.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use image::{GrayImage, Luma};
use klayer_core::planar::{NodeKind, PlanarField};
use klayer_core::RadialProfile;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

pub fn write_profile(path: &Path, w: &RadialProfile, u: &RadialProfile) -> io::Result<()> {
    let rows = w
        .nodes()
        .iter()
        .zip(w.values())
        .zip(u.values())
        .map(|((&r, &wv), &uv)| vec![num(r), num(wv), num(uv)]);
    write_csv(path, "r,W,U", rows)
}

/// Nodes that carry unknowns, in lattice order.
pub fn write_field(path: &Path, w: &PlanarField, u: &PlanarField) -> io::Result<()> {
    let grid = w.grid();
    let rows = (0..grid.len()).filter(|&k| grid.is_unknown(k)).map(|k| {
        let [x, y] = grid.coords(k);
        vec![num(x), num(y), num(w.values()[k]), num(u.values()[k])]
    });
    write_csv(path, "x,y,W,U", rows)
}

fn to_io(err: image::ImageError) -> io::Error {
    io::Error::other(err)
}

/// Grayscale heatmap, black at the field minimum, white at the maximum,
/// mid-gray outside the domain. `y` grows upward.
pub fn write_heatmap(path: &Path, field: &PlanarField) -> io::Result<()> {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let inside: Vec<f64> = (0..grid.len())
        .filter(|&k| grid.kind(k) != NodeKind::Outside)
        .map(|k| field.values()[k])
        .collect();
    let lo = inside.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut img = GrayImage::new(nx as u32, ny as u32);
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.index(i, j);
            let shade = match grid.kind(k) {
                NodeKind::Outside => 128,
                _ => (255.0 * (field.values()[k] - lo) / span).round() as u8,
            };
            img.put_pixel(i as u32, (ny - 1 - j) as u32, Luma([shade]));
        }
    }
    img.save(path).map_err(to_io)
}

/// Black polyline of `f` on white, scaled to `[0, max f]`.
pub fn write_line_plot(path: &Path, f: &RadialProfile) -> io::Result<()> {
    let (width, height) = (800u32, 400u32);
    let mut img = GrayImage::from_pixel(width, height, Luma([255]));
    let top = f.max().max(f64::MIN_POSITIVE);
    let radius = f.grid().radius();
    let pixel = |r: f64, v: f64| {
        let x = (r / radius * f64::from(width - 1)).round() as i64;
        let y = ((1.0 - v / top) * f64::from(height - 1)).round() as i64;
        (x, y)
    };
    let mut prev = None;
    for (&r, &v) in f.nodes().iter().zip(f.values()) {
        let (x1, y1) = pixel(r, v);
        let (x0, y0) = prev.unwrap_or((x1, y1));
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
        for s in 0..=steps {
            let x = x0 + (x1 - x0) * s / steps;
            let y = y0 + (y1 - y0) * s / steps;
            img.put_pixel(x.clamp(0, width as i64 - 1) as u32, y.clamp(0, height as i64 - 1) as u32, Luma([0]));
        }
        prev = Some((x1, y1));
    }
    img.save(path).map_err(to_io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300, -7.25e12] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
