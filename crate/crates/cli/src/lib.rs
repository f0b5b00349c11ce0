//! Command-line front end: run files, the five commands and their outputs.
//!
//! Exit codes: 0 on success, 2 when `verify` finds a gap above tolerance,
//! 1 on any other failure.

pub mod config;
pub mod output;

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use klayer_core::asymptotics::{expansion_report, layer_width_estimate, measure_thickness, Quantity};
use klayer_core::evolve::{
    advective_limit, discrete_reference, evolve, fit_decay_rate, perturb_chemical, SchemeConfig,
};
use klayer_core::nonlocal::{NonlocalResult, RadialDomain};
use klayer_core::planar::{build_domain, curvature_thickness_report, solve_nonlocal_2d};
use klayer_core::{solve_nonlocal, NonlocalConfig, Params, RadialProfile};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

pub use config::{parse_config, Command, ConfigError, Numerics, RunConfig};
use output::{num, write_csv, write_field, write_heatmap, write_line_plot, write_profile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_GAP: i32 = 2;

/// Environment variable capping the sweep worker pool.
pub const THREADS_VAR: &str = "KLAYER_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("solver failure: {0}")]
    Solver(#[from] klayer_core::Error),
    #[error("{0}")]
    Setup(String),
}

type RunResult<T> = Result<T, RunError>;

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Runs the configured command and returns the process exit code. Failures
/// are summarized on stderr.
pub fn run(cfg: &RunConfig) -> i32 {
    match dispatch(cfg) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_GAP,
        Err(err) => {
            eprintln!("klayer: {err}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cfg: &RunConfig) -> RunResult<bool> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    match cfg.command {
        Command::SteadyRadial => steady_radial(cfg).map(|_| true),
        Command::Steady2d => steady_2d(cfg).map(|_| true),
        Command::Evolve => run_evolve(cfg).map(|_| true),
        Command::Verify => verify(cfg),
        Command::Sweep => sweep(cfg).map(|_| true),
    }
}

fn pool() -> RunResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(text) = std::env::var(THREADS_VAR) {
        let n: usize = text
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| RunError::Setup(format!("{THREADS_VAR} must be a positive integer, got `{text}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| RunError::Setup(e.to_string()))
}

fn radial_solve(params: &Params, cfg: &RunConfig) -> RunResult<NonlocalResult<RadialProfile>> {
    let mut domain = RadialDomain::resolved(params, cfg.radius, cfg.numerics.grid_count)?;
    Ok(solve_nonlocal(params, &mut domain, &NonlocalConfig::with_tol(cfg.numerics.tol))?)
}

fn summary(path: &Path, rows: &[(&str, String)]) -> RunResult<()> {
    let rows = rows.iter().map(|(k, v)| vec![k.to_string(), v.clone()]);
    write_csv(path, "key,value", rows).map_err(io_at(path))
}

fn steady_radial(cfg: &RunConfig) -> RunResult<()> {
    let res = radial_solve(&cfg.params, cfg)?;
    let st = &res.steady;
    let dir = &cfg.output_dir;
    let path = dir.join("profile.csv");
    write_profile(&path, &st.w, &st.u).map_err(io_at(&path))?;
    summary(
        &dir.join("summary.csv"),
        &[
            ("lambda_eps", num(st.lambda_eps)),
            ("sigma", num(st.sigma)),
            ("amplitude", num(st.amplitude)),
            ("layer_width_estimate", num(layer_width_estimate(&cfg.params, cfg.radius))),
            ("bisection_iters", res.bisection_iters.to_string()),
            ("constraint_residual", num(res.constraint_residual)),
        ],
    )?;
    if cfg.plot {
        let path = dir.join("profile.png");
        write_line_plot(&path, &st.w).map_err(io_at(&path))?;
    }
    println!(
        "lambda_eps = {:.10e}, sigma = {:.10e}, W(0) = {:.10e}",
        st.lambda_eps,
        st.sigma,
        st.w.values()[0]
    );
    Ok(())
}

fn steady_2d(cfg: &RunConfig) -> RunResult<()> {
    let n = &cfg.numerics;
    let (grid, samples) = build_domain(cfg.shape, n.h, n.samples)?;
    let res = solve_nonlocal_2d(&cfg.params, Arc::new(grid), n.tol)?;
    let st = &res.steady;
    let dir = &cfg.output_dir;
    let path = dir.join("field.csv");
    write_field(&path, &st.w, &st.u).map_err(io_at(&path))?;

    let mut rows = vec![
        ("lambda_eps", num(st.lambda_eps)),
        ("sigma", num(st.sigma)),
        ("unknowns", st.w.grid().unknown_count().to_string()),
        ("bisection_iters", res.bisection_iters.to_string()),
        ("constraint_residual", num(res.constraint_residual)),
    ];
    // The level may lie below the whole field when the layer is wide.
    if n.level > st.w.min_inside() {
        let report = curvature_thickness_report(&st.w, &samples, n.level, &cfg.params)?;
        let path = dir.join("thickness.csv");
        let lines = report
            .rows
            .iter()
            .map(|r| vec![num(r.arclength), num(r.curvature), num(r.thickness)]);
        write_csv(&path, "arclength,curvature,thickness", lines).map_err(io_at(&path))?;
        rows.push(("thickness_rows", report.rows.len().to_string()));
        rows.push(("thickness_skipped", report.skipped.len().to_string()));
        if report.rows.len() >= 2 {
            rows.push(("curvature_spearman", num(report.curvature_correlation())));
            rows.push(("thickness_cv", num(report.coefficient_of_variation())));
        }
    } else {
        eprintln!(
            "klayer: level {} is below min W = {}; no thickness report",
            n.level,
            st.w.min_inside()
        );
    }
    summary(&dir.join("summary.csv"), &rows)?;
    if cfg.plot {
        let path = dir.join("field.png");
        write_heatmap(&path, &st.w).map_err(io_at(&path))?;
    }
    println!("lambda_eps = {:.10e}, sigma = {:.10e}", st.lambda_eps, st.sigma);
    Ok(())
}

fn density_phase(seed: u64) -> f64 {
    if seed == 0 {
        return 0.0;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    2.0 * PI * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn run_evolve(cfg: &RunConfig) -> RunResult<()> {
    let n = &cfg.numerics;
    let params = &cfg.params;
    let steady = radial_solve(params, cfg)?.steady;
    let (u_ref, v_ref) = discrete_reference(&steady, params);
    let phase = density_phase(cfg.seed);
    let u0 = u_ref.map(|r, u| u * (1.0 + n.amplitude * (PI * r / cfg.radius + phase).cos()))?;
    let w0 = perturb_chemical(&steady.w, n.amplitude)?;
    let scheme = SchemeConfig {
        dt: n.dt_fraction * advective_limit(&v_ref, params.p),
        cfl_safety: 0.9,
        t_end: n.t_end,
        output_every: n.output_every,
    };
    let run = evolve(&u0, &w0, params, &steady, &scheme)?;
    let dir = &cfg.output_dir;
    let path = dir.join("diagnostics.csv");
    let rows = run.series.iter().map(|d| {
        [d.t, d.mass, d.linf_u, d.l2_u, d.linf_w, d.l2_w, d.energy]
            .into_iter()
            .map(num)
            .collect()
    });
    write_csv(&path, "t,mass,linf_u,l2_u,linf_w,l2_w,energy", rows).map_err(io_at(&path))?;

    let m0 = run.series[0].mass;
    let drift = run
        .series
        .iter()
        .map(|d| ((d.mass - m0) / m0).abs())
        .fold(0.0, f64::max);
    let decay: Vec<(f64, f64)> = run.series.iter().map(|d| (d.t, d.distance())).collect();
    let mu = fit_decay_rate(&decay).ok();
    let mut rows = vec![
        ("steps", run.steps.to_string()),
        ("dt", num(scheme.dt)),
        ("mass_rescale", num(run.mass_rescale)),
        ("max_relative_mass_drift", num(drift)),
        ("initial_distance", num(run.series[0].distance())),
        ("final_distance", num(run.series.last().unwrap().distance())),
    ];
    if let Some(mu) = mu {
        rows.push(("mu_hat", num(mu)));
    }
    summary(&dir.join("summary.csv"), &rows)?;
    if cfg.plot {
        let path = dir.join("final_u.png");
        write_line_plot(&path, &run.final_state.u).map_err(io_at(&path))?;
    }
    match mu {
        Some(mu) => println!("mu_hat = {mu:.6e}, mass drift = {drift:.3e}"),
        None => println!("too few samples for a decay fit, mass drift = {drift:.3e}"),
    }
    Ok(())
}

fn default_gap_tolerance(q: Quantity) -> f64 {
    match q {
        Quantity::LambdaEps | Quantity::SlopeW => 0.05,
        Quantity::SlopeU | Quantity::Thickness { .. } => 0.08,
    }
}

fn verify(cfg: &RunConfig) -> RunResult<bool> {
    let n = &cfg.numerics;
    let pool = pool()?;
    let results: Vec<RunResult<NonlocalResult<RadialProfile>>> = pool.install(|| {
        n.eps_list
            .par_iter()
            .map(|&eps| radial_solve(&cfg.params.with_epsilon(eps), cfg))
            .collect()
    });
    let sweep = results.into_iter().collect::<RunResult<Vec<_>>>()?;
    let quantities = [
        Quantity::LambdaEps,
        Quantity::SlopeW,
        Quantity::SlopeU,
        Quantity::Thickness { level: n.level },
    ];
    let mut all_pass = true;
    let mut rows = Vec::new();
    for q in quantities {
        let rep = expansion_report(q, &cfg.params, cfg.radius, &n.eps_list, &sweep)?;
        let tol = n.verify_tol.unwrap_or_else(|| default_gap_tolerance(q));
        let pass = rep.relative_gap <= tol;
        all_pass &= pass;
        println!(
            "{:<10} predicted {:.6e} extrapolated {:.6e} gap {:.3}% (tol {:.1}%) {}",
            q.name(),
            rep.predicted_leading[0],
            rep.extrapolated_coefficient,
            100.0 * rep.relative_gap,
            100.0 * tol,
            if pass { "pass" } else { "FAIL" }
        );
        rows.push(vec![
            q.name().to_string(),
            num(rep.predicted_leading[0]),
            num(rep.extrapolated_coefficient),
            num(rep.relative_gap),
            pass.to_string(),
        ]);
    }
    let path = cfg.output_dir.join("report.csv");
    write_csv(&path, "quantity,predicted,extrapolated,relative_gap,pass", rows).map_err(io_at(&path))?;
    if !all_pass {
        eprintln!("klayer: verification gap above tolerance");
    }
    Ok(all_pass)
}

struct SweepRow {
    eps: f64,
    p: f64,
    values: [f64; 5],
}

fn sweep(cfg: &RunConfig) -> RunResult<()> {
    let n = &cfg.numerics;
    let jobs: Vec<(usize, f64, f64)> = n
        .eps_list
        .iter()
        .flat_map(|&e| n.p_list.iter().map(move |&p| (e, p)))
        .enumerate()
        .map(|(i, (e, p))| (i, e, p))
        .collect();
    let jobs_dir = cfg.output_dir.join("jobs");
    fs::create_dir_all(&jobs_dir).map_err(io_at(&jobs_dir))?;
    let pool = pool()?;
    let mut results: Vec<(usize, RunResult<SweepRow>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(idx, eps, p)| {
                let job = || -> RunResult<SweepRow> {
                    let params = cfg.params.with_epsilon(eps).with_p(p);
                    let res = radial_solve(&params, cfg)?;
                    let st = &res.steady;
                    let path = jobs_dir.join(format!("job_{idx:04}.csv"));
                    write_profile(&path, &st.w, &st.u).map_err(io_at(&path))?;
                    let slope_w = Quantity::SlopeW.measure(&res)?;
                    let slope_u = Quantity::SlopeU.measure(&res)?;
                    let thickness = measure_thickness(&st.w, n.level).unwrap_or(f64::NAN);
                    Ok(SweepRow {
                        eps,
                        p,
                        values: [st.lambda_eps, st.sigma, slope_w, slope_u, thickness],
                    })
                };
                (idx, job())
            })
            .collect()
    });
    results.sort_by_key(|(idx, _)| *idx);
    let mut rows = Vec::with_capacity(results.len());
    for (idx, res) in results {
        let row = res?;
        let mut line = vec![idx.to_string(), num(row.eps), num(row.p)];
        line.extend(row.values.iter().map(|&v| num(v)));
        rows.push(line);
    }
    let path = cfg.output_dir.join("sweep.csv");
    write_csv(&path, "job,epsilon,p,lambda_eps,sigma,slope_w,slope_u,thickness", rows).map_err(io_at(&path))?;
    println!("{} jobs written to {}", jobs.len(), path.display());
    Ok(())
}
