//! `key = value` run files and flag overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use klayer_core::planar::Shape;
use klayer_core::Params;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{key}` ({origin})")]
    UnknownKey { key: String, origin: Origin },
    #[error("key `{key}` given twice (lines {first} and {second})")]
    Duplicate { key: String, first: usize, second: usize },
    #[error("missing required key(s): {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("{origin}: cannot read `{value}` as {expected} for key `{key}`")]
    Type {
        key: String,
        value: String,
        expected: &'static str,
        origin: Origin,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Where a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag => write!(f, "command-line flag"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SteadyRadial,
    Steady2d,
    Evolve,
    Verify,
    Sweep,
}

impl FromStr for Command {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "steady-radial" => Command::SteadyRadial,
            "steady-2d" => Command::Steady2d,
            "evolve" => Command::Evolve,
            "verify" => Command::Verify,
            "sweep" => Command::Sweep,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    /// Radial mesh nodes.
    pub grid_count: usize,
    /// Relative tolerance of the nonlocal constraint.
    pub tol: f64,
    /// Planar lattice spacing.
    pub h: f64,
    /// Boundary samples for the planar thickness report.
    pub samples: usize,
    /// Level `c` defining the layer thickness.
    pub level: f64,
    pub t_end: f64,
    /// Time step as a fraction of the advective limit.
    pub dt_fraction: f64,
    pub output_every: usize,
    /// Multiplicative perturbation size for `evolve`.
    pub amplitude: f64,
    pub eps_list: Vec<f64>,
    pub p_list: Vec<f64>,
    /// Replaces every per-quantity gap tolerance of `verify`.
    pub verify_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
    pub radius: f64,
    pub shape: Shape,
    pub numerics: Numerics,
    pub output_dir: PathBuf,
    /// Seeds the phase of the density perturbation; 0 keeps it unshifted.
    pub seed: u64,
    pub plot: bool,
}

const REQUIRED: [&str; 7] = ["command", "epsilon", "p", "b", "m", "n", "R"];
const OPTIONAL: [&str; 21] = [
    "shape",
    "ellipse_a",
    "ellipse_b",
    "star_r0",
    "star_amplitude",
    "star_k",
    "grid_count",
    "tol",
    "h",
    "samples",
    "level",
    "t_end",
    "dt_fraction",
    "output_every",
    "amplitude",
    "eps_list",
    "p_list",
    "output_dir",
    "seed",
    "plot",
    "verify_tol",
];

type Entries = BTreeMap<String, (String, Origin)>;

fn known(key: &str) -> bool {
    REQUIRED.contains(&key) || OPTIONAL.contains(&key)
}

/// Reads the file text, applies `overrides` (later wins) and validates.
pub fn parse_config(file: Option<&str>, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut entries = Entries::new();
    for (idx, raw) in file.unwrap_or("").lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let Some((key, value)) = text.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: text.to_string() });
        };
        let key = key.trim().to_string();
        if !known(&key) {
            return Err(ConfigError::UnknownKey { key, origin: Origin::Line(line) });
        }
        if let Some((_, Origin::Line(first))) = entries.get(&key) {
            return Err(ConfigError::Duplicate { key, first: *first, second: line });
        }
        entries.insert(key, (value.trim().to_string(), Origin::Line(line)));
    }
    for (key, value) in overrides {
        if !known(key) {
            return Err(ConfigError::UnknownKey { key: key.clone(), origin: Origin::Flag });
        }
        entries.insert(key.clone(), (value.trim().to_string(), Origin::Flag));
    }
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|k| !entries.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::Missing(missing));
    }
    build(&entries)
}

fn get<T: FromStr>(e: &Entries, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
    match e.get(key) {
        None => Ok(None),
        Some((value, origin)) => value.parse().map(Some).map_err(|_| ConfigError::Type {
            key: key.to_string(),
            value: value.clone(),
            expected,
            origin: *origin,
        }),
    }
}

fn list(e: &Entries, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
    let Some((value, origin)) = e.get(key) else {
        return Ok(None);
    };
    value
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
        .map_err(|_| ConfigError::Type {
            key: key.to_string(),
            value: value.clone(),
            expected: "a comma-separated list of numbers",
            origin: *origin,
        })
}

fn build(e: &Entries) -> Result<RunConfig, ConfigError> {
    let number = "a number";
    let count = "a non-negative integer";
    let req = |key: &str| -> Result<f64, ConfigError> { Ok(get(e, key, number)?.unwrap()) };

    let (cmd, origin) = &e["command"];
    let command = cmd.parse::<Command>().map_err(|_| ConfigError::Type {
        key: "command".into(),
        value: cmd.clone(),
        expected: "one of steady-radial, steady-2d, evolve, verify, sweep",
        origin: *origin,
    })?;
    let dim: usize = get(e, "n", count)?.unwrap();
    let params = Params::new(req("epsilon")?, req("p")?, req("b")?, req("m")?, dim)
        .map_err(|err| ConfigError::Invalid(err.to_string()))?;
    let radius = req("R")?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(ConfigError::Invalid(format!("R must be positive, got {radius}")));
    }

    let shape_name: String = get(e, "shape", "a shape name")?.unwrap_or_else(|| "disk".into());
    let shape = match shape_name.as_str() {
        "disk" => Shape::Disk { radius },
        "ellipse" => Shape::Ellipse {
            a: get(e, "ellipse_a", number)?.unwrap_or(radius),
            b: get(e, "ellipse_b", number)?.unwrap_or(radius),
        },
        "star" => Shape::Star {
            r0: get(e, "star_r0", number)?.unwrap_or(radius),
            amplitude: get(e, "star_amplitude", number)?.unwrap_or(0.1),
            k: get(e, "star_k", count)?.unwrap_or(5),
        },
        other => {
            return Err(ConfigError::Invalid(format!(
                "shape must be disk, ellipse or star, got `{other}`"
            )))
        }
    };

    let numerics = Numerics {
        grid_count: get(e, "grid_count", count)?.unwrap_or(2000),
        tol: get(e, "tol", number)?.unwrap_or(1e-8),
        h: get(e, "h", number)?.unwrap_or(0.02),
        samples: get(e, "samples", count)?.unwrap_or(64),
        level: get(e, "level", number)?.unwrap_or(0.5 * params.b),
        t_end: get(e, "t_end", number)?.unwrap_or(10.0),
        dt_fraction: get(e, "dt_fraction", number)?.unwrap_or(0.5),
        output_every: get(e, "output_every", count)?.unwrap_or(20),
        amplitude: get(e, "amplitude", number)?.unwrap_or(0.01),
        eps_list: list(e, "eps_list")?.unwrap_or_else(|| vec![params.epsilon]),
        p_list: list(e, "p_list")?.unwrap_or_else(|| vec![params.p]),
        verify_tol: get(e, "verify_tol", number)?,
    };
    let n = &numerics;
    let checks = [
        (n.grid_count >= 3, "grid_count must be at least 3"),
        (n.tol > 0.0 && n.tol < 1.0, "tol must lie in (0, 1)"),
        (n.h > 0.0, "h must be positive"),
        (n.samples > 0, "samples must be positive"),
        (n.level > 0.0 && n.level < params.b, "level must lie in (0, b)"),
        (n.t_end > 0.0, "t_end must be positive"),
        (n.dt_fraction > 0.0 && n.dt_fraction < 1.0, "dt_fraction must lie in (0, 1)"),
        (n.output_every > 0, "output_every must be positive"),
        (n.amplitude.abs() < 1.0, "amplitude must lie in (-1, 1)"),
        (n.eps_list.iter().all(|&x| x > 0.0), "eps_list entries must be positive"),
        (n.p_list.iter().all(|&x| x > 0.0), "p_list entries must be positive"),
        (n.verify_tol.map_or(true, |t| t > 0.0), "verify_tol must be positive"),
    ];
    if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
        return Err(ConfigError::Invalid(msg.to_string()));
    }
    match command {
        Command::Steady2d if dim != 2 => {
            return Err(ConfigError::Invalid("steady-2d needs n = 2".into()));
        }
        Command::Verify => {
            if n.eps_list.len() < 3 || n.eps_list.windows(2).any(|w| w[1] >= w[0]) {
                return Err(ConfigError::Invalid(
                    "verify needs eps_list with at least three strictly decreasing values".into(),
                ));
            }
        }
        _ => {}
    }

    Ok(RunConfig {
        command,
        params,
        radius,
        shape,
        numerics,
        output_dir: get(e, "output_dir", "a path")?.unwrap_or_else(|| PathBuf::from(".")),
        seed: get(e, "seed", count)?.unwrap_or(0),
        plot: get(e, "plot", "true or false")?.unwrap_or(false),
    })
}
