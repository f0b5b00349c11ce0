use std::sync::Arc;

use klayer_core::asymptotics::measure_thickness;
use klayer_core::nonlocal::solve_nonlocal_radial;
use klayer_core::planar::{
    build_domain, curvature_thickness_report, integrate_field, solve_local_2d, solve_nonlocal_2d,
    MaskedGrid, PlanarField, PlanarSolveConfig, Shape, Stencil,
};
use klayer_core::Params;

fn disk_grid(h: f64) -> Arc<MaskedGrid> {
    Arc::new(MaskedGrid::new(Shape::Disk { radius: 1.0 }, h).unwrap())
}

fn power_integral(w: &PlanarField, p: f64) -> f64 {
    let wp = w.values().iter().map(|x| x.powf(p)).collect();
    integrate_field(&PlanarField::new(w.grid().clone(), wp).unwrap())
}

#[test]
fn density_carries_the_mass() {
    let params = Params::new(0.05, 2.0, 1.0, 1.0, 2).unwrap();
    let res = solve_nonlocal_2d(&params, disk_grid(0.025), 1e-8).unwrap();
    let mass = integrate_field(&res.steady.u);
    assert!((mass - params.m).abs() < 1e-6, "mass {mass}");
    assert!(res.constraint_residual < 1e-6);
}

#[test]
fn halving_mass_doubles_power_integral() {
    let params = Params::new(0.01, 2.0, 1.0, 1.0, 2).unwrap();
    let grid = disk_grid(0.0125);
    let full = solve_nonlocal_2d(&params, grid.clone(), 1e-8).unwrap();
    let half = solve_nonlocal_2d(&params.with_m(0.5), grid, 1e-8).unwrap();
    let ratio = power_integral(&half.steady.w, 2.0) / power_integral(&full.steady.w, 2.0);
    assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    assert!(half.steady.lambda_eps > full.steady.lambda_eps);
}

#[test]
fn disk_thickness_matches_radial() {
    let params = Params::new(0.05, 2.0, 1.0, 1.0, 2).unwrap();
    let (grid, samples) = build_domain(Shape::Disk { radius: 1.0 }, 0.02, 24).unwrap();
    let planar = solve_nonlocal_2d(&params, Arc::new(grid), 1e-7).unwrap();
    let report = curvature_thickness_report(&planar.steady.w, &samples, 0.5, &params).unwrap();
    assert!(report.skipped.is_empty());
    let radial = solve_nonlocal_radial(&params, 1.0, 1e-8).unwrap();
    let expected = measure_thickness(&radial.steady.w, 0.5).unwrap();
    for row in &report.rows {
        assert!(
            (row.thickness / expected - 1.0).abs() < 0.1,
            "{} vs {expected}",
            row.thickness
        );
    }
}

#[test]
fn local_solution_increases_with_sigma() {
    let params = Params::new(0.05, 2.0, 1.0, 1.0, 2).unwrap();
    let shape = Shape::Ellipse { a: 1.2, b: 0.8 };
    let grid = Arc::new(MaskedGrid::new(shape, 0.025).unwrap());
    let stencil = Stencil::new(&grid);
    let cfg = PlanarSolveConfig::default();
    let mut previous: Option<PlanarField> = None;
    for sigma in [0.01, 0.05, 0.25] {
        let w = solve_local_2d(sigma, &params, &grid, &stencil, &cfg, None).unwrap();
        if let Some(prev) = &previous {
            for (a, b) in prev.values().iter().zip(w.values()) {
                assert!(*b >= a - 1e-9);
            }
            assert!(w.min_inside() > prev.min_inside());
        }
        previous = Some(w);
    }
}

#[test]
fn large_sigma_respects_torsion_bound() {
    let params = Params::new(0.05, 2.0, 1.0, 1.0, 2).unwrap();
    let grid = disk_grid(0.025);
    let stencil = Stencil::new(&grid);
    let sigma = 10.0;
    let w = solve_local_2d(sigma, &params, &grid, &stencil, &PlanarSolveConfig::default(), None)
        .unwrap();
    // b - (b^{1+p}/σ)(1 - |x|²)/4 is a sub-solution, b a super-solution.
    for k in 0..grid.len() {
        if !grid.is_unknown(k) {
            continue;
        }
        let [x, y] = grid.coords(k);
        let lower = 1.0 - (1.0 - x * x - y * y) / (4.0 * sigma);
        let value = w.values()[k];
        assert!(value >= lower - 1e-6 && value <= 1.0 + 1e-12, "{value} at ({x}, {y})");
    }
}

#[test]
fn star_domain_solves() {
    let params = Params::new(0.1, 2.0, 1.0, 1.0, 2).unwrap();
    let shape = Shape::Star {
        r0: 1.0,
        amplitude: 0.15,
        k: 5,
    };
    let res = solve_nonlocal_2d(&params, Arc::new(MaskedGrid::new(shape, 0.025).unwrap()), 1e-6)
        .unwrap();
    assert!(res.steady.w.min_inside() > 0.0);
    assert!((integrate_field(&res.steady.u) - 1.0).abs() < 1e-5);
}
