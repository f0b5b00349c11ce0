//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line and then
//! asserts the same verdict.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use klayer_core::asymptotics::{
    cp, expansion_report, radial_sweep, verify_p_limit, ExpansionReport, Quantity,
};
use klayer_core::evolve::{
    advective_limit, discrete_reference, evolve, fit_decay_rate, perturb_chemical,
    perturb_density, EvolutionRun, SchemeConfig,
};
use klayer_core::nonlocal::solve_nonlocal_radial;
use klayer_core::planar::{
    build_domain, curvature_thickness_report, solve_local_2d, solve_nonlocal_2d, MaskedGrid,
    PlanarField, PlanarSolveConfig, Shape, Stencil,
};
use klayer_core::radial::{barrier_lower, barrier_upper, solve_local_radial, LocalSolveConfig};
use klayer_core::{make_graded_grid, NonlocalResult, Params, RadialGrid, RadialProfile};

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2} {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn unit_disk(eps: f64) -> Params {
    Params::new(eps, 2.0, 1.0, 1.0, 2).unwrap()
}

// Exact solution of W'' = W³ on [0, R] with W'(0) = 0, W(R) = 1, by RK4
// shooting on W(0). Kept independent of the library's solver.
fn shoot(w0: f64, nodes: &[f64]) -> Vec<f64> {
    let f = |y: [f64; 2]| [y[1], y[0] * y[0] * y[0]];
    let mut y = [w0, 0.0];
    let mut out = vec![w0];
    for k in 1..nodes.len() {
        let steps = ((nodes[k] - nodes[k - 1]) / 1e-3).ceil().max(1.0) as usize;
        let h = (nodes[k] - nodes[k - 1]) / steps as f64;
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
            y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        }
        out.push(y[0]);
    }
    out
}

fn halve(grid: &RadialGrid) -> RadialGrid {
    let r = grid.nodes();
    let mut nodes = Vec::with_capacity(2 * r.len() - 1);
    for k in 0..r.len() - 1 {
        nodes.push(r[k]);
        nodes.push(0.5 * (r[k] + r[k + 1]));
    }
    nodes.push(grid.radius());
    RadialGrid::from_nodes(nodes, grid.dim()).unwrap()
}

#[test]
fn criterion_01_exact_layer_oracle() {
    let start = Instant::now();
    let radius = 40.0;
    let params = Params::new(1.0, 2.0, 1.0, 1.0, 1).unwrap();
    let coarse = Arc::new(make_graded_grid(radius, 1, 0.1 * cp(2.0), 2000).unwrap());
    let fine = Arc::new(halve(&coarse));
    let cfg = LocalSolveConfig::default();
    let closed_form_error = |grid: &Arc<RadialGrid>| -> (RadialProfile, f64) {
        let w = solve_local_radial(1.0, &params, grid, &cfg).unwrap();
        let err = w
            .nodes()
            .iter()
            .zip(w.values())
            .map(|(&r, &v)| (v - barrier_lower(r, 1.0, &params, radius)).abs())
            .fold(0.0, f64::max);
        (w, err)
    };
    let (w_coarse, e_coarse) = closed_form_error(&coarse);
    let (w_fine, e_fine) = closed_form_error(&fine);
    let order = (e_coarse / e_fine).log2();
    let elapsed = start.elapsed();

    // Discretization error alone, against the exact finite-interval solution.
    let (mut lo, mut hi) = (1e-3, 0.5);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if *shoot(mid, &[0.0, radius]).last().unwrap() > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let w0 = 0.5 * (lo + hi);
    let oracle_error = |w: &RadialProfile| {
        shoot(w0, w.nodes())
            .iter()
            .zip(w.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (d_coarse, d_fine) = (oracle_error(&w_coarse), oracle_error(&w_fine));

    let pass = e_coarse <= 1e-5 && order >= 1.9 && elapsed < Duration::from_secs(5);
    verdict(
        1,
        "1D exact-layer oracle",
        pass,
        &format!(
            "closed-form max error {e_coarse:.3e} (need <= 1e-5), order {order:.2} (need >= 1.9), {elapsed:.2?}; \
             vs finite-interval solution: error {d_coarse:.3e}, order {:.2}",
            (d_coarse / d_fine).log2()
        ),
    );
}

const SWEEP_EPS: [f64; 3] = [4e-3, 2e-3, 1e-3];

struct Sweep {
    params: Params,
    results: Vec<NonlocalResult<RadialProfile>>,
    elapsed: Duration,
}

fn sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let params = unit_disk(SWEEP_EPS[0]);
        let start = Instant::now();
        let results = radial_sweep(&params, 1.0, &SWEEP_EPS, 1e-8).unwrap();
        Sweep {
            params,
            results,
            elapsed: start.elapsed(),
        }
    })
}

fn report(quantity: Quantity) -> ExpansionReport {
    let s = sweep();
    expansion_report(quantity, &s.params, 1.0, &SWEEP_EPS, &s.results).unwrap()
}

fn describe(r: &ExpansionReport) -> String {
    format!(
        "computed {:?}, extrapolated {:.6}, predicted {:.6}, gap {:.2}%",
        r.computed
            .iter()
            .map(|c| format!("{c:.6}"))
            .collect::<Vec<_>>(),
        r.extrapolated_coefficient,
        r.predicted_leading[0],
        100.0 * r.relative_gap
    )
}

#[test]
fn criterion_02_lambda_coefficient() {
    let r = report(Quantity::LambdaEps);
    assert!((r.predicted_leading[0] - 8.0 * PI * PI).abs() < 1e-9);
    let elapsed = sweep().elapsed;
    let pass = r.relative_gap <= 0.05 && elapsed < Duration::from_secs(120);
    verdict(2, "lambda_eps / eps -> 8 pi^2", pass, &format!("{}, sweep {elapsed:.2?}", describe(&r)));
}

#[test]
fn criterion_03_slope_w() {
    let r = report(Quantity::SlopeW);
    assert!((r.predicted_leading[0] - 1.0 / (4.0 * PI)).abs() < 1e-12);
    verdict(3, "eps W'(R) -> 1/(4 pi)", r.relative_gap <= 0.05, &describe(&r));
}

#[test]
fn criterion_04_slope_u() {
    let r = report(Quantity::SlopeU);
    assert!((r.predicted_leading[0] - 16.0 / (32.0 * (2.0 * PI).powi(3))).abs() < 1e-12);
    verdict(4, "eps^2 U'(R) -> 2.016e-3", r.relative_gap <= 0.08, &describe(&r));
}

#[test]
fn criterion_05_thickness() {
    let r = report(Quantity::Thickness { level: 0.5 });
    assert!((r.predicted_leading[0] - 4.0 * PI).abs() < 1e-9);
    verdict(5, "(R - r_eps)/eps -> 4 pi at c = 0.5", r.relative_gap <= 0.08, &describe(&r));
}

#[test]
fn criterion_06_barrier_sandwich() {
    let s = sweep();
    let tol = 1e-4 * s.params.b;
    let mut worst_low = f64::NEG_INFINITY;
    let mut worst_high = f64::NEG_INFINITY;
    let mut checked = 0;
    for (res, &eps) in s.results.iter().zip(&SWEEP_EPS) {
        let params = s.params.with_epsilon(eps);
        let sigma = res.steady.sigma;
        for (&r, &w) in res.steady.w.nodes().iter().zip(res.steady.w.values()) {
            worst_low = worst_low.max(barrier_lower(r, sigma, &params, 1.0) - w);
            // The super-solution is infinite at the centre.
            if r > 0.0 {
                let upper = barrier_upper(r, sigma, &params, 1.0).unwrap();
                worst_high = worst_high.max(w - upper);
            }
            checked += 1;
        }
    }
    let pass = worst_low <= tol && worst_high <= tol;
    verdict(
        6,
        "barrier sandwich",
        pass,
        &format!(
            "{checked} nodes, max(lower - W) = {worst_low:.3e}, max(W - upper) = {worst_high:.3e}, tol {tol:.0e}"
        ),
    );
}

#[test]
fn criterion_07_large_p_limit() {
    let start = Instant::now();
    let rows = verify_p_limit(&unit_disk(0.1), 1.0, &[5.0, 10.0, 20.0, 40.0], 0.1).unwrap();
    let elapsed = start.elapsed();
    let sup_decreasing = rows.windows(2).all(|w| w[1].sup_deviation < w[0].sup_deviation);
    let mass_increasing = rows
        .windows(2)
        .all(|w| w[1].boundary_mass_fraction > w[0].boundary_mass_fraction);
    let last = rows.last().unwrap().boundary_mass_fraction;
    let pass = sup_decreasing && mass_increasing && last > 0.9 && elapsed < Duration::from_secs(60);
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("p={} sup={:.4} frac={:.4}", r.p, r.sup_deviation, r.boundary_mass_fraction))
        .collect();
    verdict(
        7,
        "p -> infinity concentration",
        pass,
        &format!(
            "{}; sup decreasing {sup_decreasing}, fraction increasing {mass_increasing}, \
             fraction at p=40 {last:.4} (need > 0.9), {elapsed:.2?}",
            table.join(", ")
        ),
    );
}

#[test]
fn criterion_08_planar_vs_radial() {
    let start = Instant::now();
    let params = unit_disk(0.01);
    let grid = Arc::new(MaskedGrid::new(Shape::Disk { radius: 1.0 }, 0.005).unwrap());
    let planar = solve_nonlocal_2d(&params, grid.clone(), 1e-6).unwrap();
    let radial = solve_nonlocal_radial(&params, 1.0, 1e-8).unwrap();
    let elapsed = start.elapsed();
    let lambda_gap = (planar.steady.lambda_eps / radial.steady.lambda_eps - 1.0).abs();
    let mut w_err: f64 = 0.0;
    let mut samples = 0;
    for k in 0..grid.len() {
        let [x, y] = grid.coords(k);
        if y == 0.0 && x >= 0.0 && grid.is_unknown(k) {
            w_err = w_err.max((planar.steady.w.values()[k] - radial.steady.w.eval(x)).abs());
            samples += 1;
        }
    }
    let pass = lambda_gap <= 0.01 && w_err <= 5e-3 && elapsed < Duration::from_secs(300);
    verdict(
        8,
        "2D disk vs radial",
        pass,
        &format!(
            "lambda_eps gap {:.3}%, W max error {w_err:.3e} over {samples} radius nodes, {elapsed:.2?}",
            100.0 * lambda_gap
        ),
    );
}

#[test]
fn criterion_09_curvature_thickness() {
    let params = unit_disk(0.05);
    let ellipse = Shape::Ellipse {
        a: 2f64.sqrt(),
        b: 0.5f64.sqrt(),
    };
    assert!((ellipse.area() - PI).abs() < 1e-12);
    let (grid, samples) = build_domain(ellipse, 0.01, 128).unwrap();
    let res = solve_nonlocal_2d(&params, Arc::new(grid), 1e-6).unwrap();
    let rep = curvature_thickness_report(&res.steady.w, &samples, 0.5, &params).unwrap();
    let rho = rep.curvature_correlation();

    let (disk_grid, disk_samples) = build_domain(Shape::Disk { radius: 1.0 }, 0.01, 64).unwrap();
    let disk = solve_nonlocal_2d(&params, Arc::new(disk_grid), 1e-6).unwrap();
    let disk_rep = curvature_thickness_report(&disk.steady.w, &disk_samples, 0.5, &params).unwrap();
    let cv = disk_rep.coefficient_of_variation();

    let pass = rho > 0.0 && rep.rows.len() >= 32 && cv <= 0.05 && disk_rep.skipped.is_empty();
    verdict(
        9,
        "thickness increases with curvature",
        pass,
        &format!(
            "ellipse Spearman {rho:.4} over {} rays ({} skipped), disk CV {:.2e}",
            rep.rows.len(),
            rep.skipped.len(),
            cv
        ),
    );
}

struct Runs {
    pilot: EvolutionRun,
    main: EvolutionRun,
    chemical_only: EvolutionRun,
    mu_pilot: f64,
    t_end: f64,
    elapsed: Duration,
}

fn runs() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let params = unit_disk(0.05);
        let steady = solve_nonlocal_radial(&params, 1.0, 1e-8).unwrap().steady;
        let (u_ref, v_ref) = discrete_reference(&steady, &params);
        let u0 = perturb_density(&u_ref, 0.01).unwrap();
        let w0 = perturb_chemical(&steady.w, 0.01).unwrap();
        let dt = 0.5 * advective_limit(&v_ref, params.p);
        let pilot_cfg = SchemeConfig {
            dt,
            cfl_safety: 0.9,
            t_end: 5.0,
            output_every: 20,
        };
        let pilot = evolve(&u0, &w0, &params, &steady, &pilot_cfg).unwrap();
        let series: Vec<(f64, f64)> = pilot.series.iter().map(|d| (d.t, d.distance())).collect();
        let mu_pilot = fit_decay_rate(&series).unwrap();
        let t_end = 10.0 / mu_pilot;
        let cfg = SchemeConfig {
            t_end,
            output_every: ((t_end / dt) / 400.0).ceil() as usize,
            ..pilot_cfg
        };
        let main = evolve(&u0, &w0, &params, &steady, &cfg).unwrap();
        let chemical_only = evolve(&u_ref, &w0, &params, &steady, &cfg).unwrap();
        Runs {
            pilot,
            main,
            chemical_only,
            mu_pilot,
            t_end,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_10_mass_conservation() {
    let r = runs();
    let drift = |run: &EvolutionRun| {
        let m0 = run.series[0].mass;
        run.series
            .iter()
            .map(|d| ((d.mass - m0) / m0).abs())
            .fold(0.0, f64::max)
    };
    let all = [drift(&r.pilot), drift(&r.main), drift(&r.chemical_only)];
    let worst = all.iter().copied().fold(0.0, f64::max);
    verdict(
        10,
        "discrete mass conservation",
        worst <= 1e-9,
        &format!(
            "relative drift pilot {:.3e}, main {:.3e}, chemical-only {:.3e}",
            all[0], all[1], all[2]
        ),
    );
}

#[test]
fn criterion_11_nonlinear_stability() {
    let r = runs();
    let series = &r.main.series;
    let fitted: Vec<(f64, f64)> = series.iter().map(|d| (d.t, d.distance())).collect();
    let mu_hat = fit_decay_rate(&fitted).unwrap();
    let ratio = series.last().unwrap().distance() / series[0].distance();
    let after = series.iter().position(|d| d.t >= 0.05 * r.t_end).unwrap();
    let worst_rise = series[after..]
        .windows(2)
        .map(|w| (w[1].energy - w[0].energy) / w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let pass = mu_hat > 0.0
        && ratio <= 1e-3
        && worst_rise <= 1e-10
        && r.elapsed < Duration::from_secs(180);
    verdict(
        11,
        "nonlinear stability",
        pass,
        &format!(
            "pilot mu {:.4}, t_end {:.2}, mu_hat {mu_hat:.4}, final/initial distance {ratio:.3e}, \
             max relative energy rise {worst_rise:.3e}, {:.2?}",
            r.mu_pilot, r.t_end, r.elapsed
        ),
    );
}

#[test]
fn criterion_12_uniqueness_probe() {
    let params = unit_disk(0.05);
    let shape = Shape::Ellipse {
        a: 2f64.sqrt(),
        b: 0.5f64.sqrt(),
    };
    let grid = Arc::new(MaskedGrid::new(shape, 0.02).unwrap());
    let sigma = solve_nonlocal_2d(&params, grid.clone(), 1e-6).unwrap().steady.sigma;
    let stencil = Stencil::new(&grid);
    let cfg = PlanarSolveConfig::default();
    let from_above = solve_local_2d(sigma, &params, &grid, &stencil, &cfg, None).unwrap();
    let low = PlanarField::constant(grid.clone(), 1e-8 * params.b);
    let from_below = solve_local_2d(sigma, &params, &grid, &stencil, &cfg, Some(&low)).unwrap();
    let diff = from_above.max_difference(&from_below);
    verdict(
        12,
        "uniqueness probe",
        diff <= 10.0 * cfg.tol,
        &format!("sigma {sigma:.4e}, max difference {diff:.3e} (limit {:.0e})", 10.0 * cfg.tol),
    );
}
