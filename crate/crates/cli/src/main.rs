use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use klayer_cli::{parse_config, run, EXIT_FAILURE};

/// Boundary-layer steady states, verification sweeps and radial evolution.
#[derive(Parser, Debug)]
#[command(name = "klayer", version)]
struct Cli {
    /// steady-radial, steady-2d, evolve, verify or sweep; overrides `command` in the file.
    command: Option<String>,
    /// Run file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    m: Option<String>,
    /// Space dimension.
    #[arg(long)]
    n: Option<String>,
    /// Ball radius.
    #[arg(long = "R")]
    radius: Option<String>,
    #[arg(long)]
    grid_count: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// Comma-separated ε values for `sweep` and `verify`.
    #[arg(long)]
    eps_list: Option<String>,
    /// Comma-separated p values for `sweep`.
    #[arg(long)]
    p_list: Option<String>,
    /// Any other key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                eprintln!("klayer: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_FAILURE as u8);
            }
        },
        None => None,
    };
    let mut overrides = Vec::new();
    for item in &cli.set {
        match item.split_once('=') {
            Some((k, v)) => overrides.push((k.trim().to_string(), v.to_string())),
            None => {
                eprintln!("klayer: --set expects KEY=VALUE, got `{item}`");
                return ExitCode::from(EXIT_FAILURE as u8);
            }
        }
    }
    let flags = [
        ("command", &cli.command),
        ("output_dir", &cli.out),
        ("epsilon", &cli.eps),
        ("p", &cli.p),
        ("b", &cli.b),
        ("m", &cli.m),
        ("n", &cli.n),
        ("R", &cli.radius),
        ("grid_count", &cli.grid_count),
        ("tol", &cli.tol),
        ("eps_list", &cli.eps_list),
        ("p_list", &cli.p_list),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            overrides.push((key.to_string(), v.clone()));
        }
    }
    match parse_config(text.as_deref(), &overrides) {
        Ok(cfg) => ExitCode::from(run(&cfg) as u8),
        Err(e) => {
            eprintln!("klayer: {e}");
            ExitCode::from(EXIT_FAILURE as u8)
        }
    }
}
