//! Line-oriented `key = value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use cornerflow_core::experiments::DRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ConformalProbe,
    Cell,
    Rates,
    Simulate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ConformalProbe => "conformal-probe",
            Command::Cell => "cell",
            Command::Rates => "rates",
            Command::Simulate => "simulate",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "conformal-probe" => Some(Command::ConformalProbe),
            "cell" => Some(Command::Cell),
            "rates" => Some(Command::Rates),
            "simulate" => Some(Command::Simulate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Default,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, text: String },
    UnknownKey { line: usize, key: String },
    DuplicateKey { line: usize, key: String },
    TypeMismatch { key: String, value: String, expected: &'static str },
    MissingRequired { key: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected `key = value`, got {text:?}"),
            ConfigError::UnknownKey { line, key } => write!(f, "line {line}: unknown key `{key}`"),
            ConfigError::DuplicateKey { line, key } => write!(f, "line {line}: key `{key}` given twice"),
            ConfigError::TypeMismatch { key, value, expected } => write!(f, "`{key}` = {value:?}: expected {expected}"),
            ConfigError::MissingRequired { key } => write!(f, "missing required key `{key}`"),
        }
    }
}

/// All validated settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub shape: String,
    pub field: String,
    pub eps: Option<f64>,
    pub deps: Option<f64>,
    pub sweep: Sweep,
    pub d_rule: Option<DRule>,
    pub corner: usize,
    pub tol: f64,
    /// Gauss points per fiber panel.
    pub order: usize,
    pub t_end: f64,
    pub dt: f64,
    pub spacing: f64,
    /// Boundary nodes per hole in the method of reflections.
    pub nodes: usize,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Accepted `(key, value)` pairs in input order, for the manifest.
    pub entries: Vec<(String, String)>,
}

pub const KEYS: [&str; 16] = [
    "command", "shape", "field", "eps", "deps", "sweep", "d_rule", "corner", "tol", "order", "t_end", "dt", "spacing", "nodes", "out",
    "threads",
];

pub const DEFAULT_FIELD: &str = "bump:0.5,0.8,0.2";

/// Parses and validates; on failure returns every problem found.
pub fn parse_config(source: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let mut entries: Vec<(String, String)> = Vec::new();
    for (n, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(ConfigError::Syntax { line: n + 1, text: raw.to_string() });
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            errors.push(ConfigError::UnknownKey { line: n + 1, key: k.to_string() });
        } else if entries.iter().any(|(e, _)| e == k) {
            errors.push(ConfigError::DuplicateKey { line: n + 1, key: k.to_string() });
        } else {
            entries.push((k.to_string(), v.to_string()));
        }
    }
    let get = |k: &str| entries.iter().find(|(e, _)| e == k).map(|(_, v)| v.as_str());

    let command = match get("command") {
        None => Some(Command::Rates),
        Some(v) => {
            let c = Command::parse(v);
            if c.is_none() {
                errors.push(mismatch("command", v, "one of conformal-probe, cell, rates, simulate"));
            }
            c
        }
    };
    let pos = |k: &str, errors: &mut Vec<ConfigError>| -> Option<f64> {
        let v = get(k)?;
        match v.parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => Some(x),
            _ => {
                errors.push(mismatch(k, v, "a positive number"));
                None
            }
        }
    };
    let count = |k: &str, min: usize, errors: &mut Vec<ConfigError>| -> Option<usize> {
        let v = get(k)?;
        match v.parse::<usize>() {
            Ok(x) if x >= min => Some(x),
            _ => {
                errors.push(mismatch(k, v, if min == 0 { "a non-negative integer" } else { "a positive integer" }));
                None
            }
        }
    };
    let eps = pos("eps", &mut errors);
    let deps = pos("deps", &mut errors);
    let tol = pos("tol", &mut errors);
    let t_end = pos("t_end", &mut errors);
    let dt = pos("dt", &mut errors);
    let spacing = pos("spacing", &mut errors);
    let corner = count("corner", 0, &mut errors);
    let order = count("order", 4, &mut errors);
    let nodes = count("nodes", 8, &mut errors);
    let threads = count("threads", 1, &mut errors);
    let d_rule = get("d_rule").and_then(|v| match DRule::parse(v) {
        Ok(r) => Some(r),
        Err(_) => {
            errors.push(mismatch("d_rule", v, "eps, eps^P, C*eps^P or exp"));
            None
        }
    });
    let sweep = match get("sweep") {
        None | Some("default") => Sweep::Default,
        Some(p) => Sweep::File(PathBuf::from(p)),
    };
    if let Some(v) = get("field") {
        if let Err(e) = cornerflow_core::fields::VorticityField::parse(v) {
            errors.push(ConfigError::TypeMismatch { key: "field".into(), value: v.into(), expected: field_hint(&e) });
        }
    }
    if let Some(v) = get("out") {
        let parent = Path::new(v).parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            errors.push(mismatch("out", v, "a path in an existing directory"));
        }
    }

    let mut required = vec!["shape"];
    match command {
        Some(Command::Cell) | Some(Command::Simulate) => required.extend(["eps", "deps"]),
        Some(Command::Rates) if get("sweep").is_none() && get("d_rule").is_none() => required.extend(["eps", "deps"]),
        _ => {}
    }
    for k in required {
        if get(k).is_none() {
            errors.push(ConfigError::MissingRequired { key: k.into() });
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let command = command.expect("validated");
    let out = get("out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(default_out(command)));
    Ok(RunConfig {
        command,
        shape: get("shape").expect("validated").to_string(),
        field: get("field").unwrap_or(DEFAULT_FIELD).to_string(),
        eps,
        deps,
        sweep,
        d_rule,
        corner: corner.unwrap_or(0),
        tol: tol.unwrap_or(1e-10),
        order: order.unwrap_or(8),
        t_end: t_end.unwrap_or(1.0),
        dt: dt.unwrap_or(0.025),
        spacing: spacing.unwrap_or(0.02),
        nodes: nodes.unwrap_or(256),
        out,
        threads,
        entries,
    })
}

fn mismatch(key: &str, value: &str, expected: &'static str) -> ConfigError {
    ConfigError::TypeMismatch { key: key.into(), value: value.into(), expected }
}

fn field_hint(_e: &cornerflow_core::fields::FieldError) -> &'static str {
    "bump:cx,cy,r, mollified-disk:cx,cy,r, dipole:cx1,cy1,cx2,cy2,r or zero"
}

fn default_out(c: Command) -> &'static str {
    match c {
        Command::ConformalProbe => "probe.csv",
        Command::Cell => "cell.csv",
        Command::Rates => "rates.csv",
        Command::Simulate => "traj.csv",
    }
}

/// Replaces or appends `key = value` lines; used to layer CLI flags over a
/// config file so both go through the same validation.
pub fn apply_overrides(source: &str, overrides: &[(&str, String)]) -> String {
    let mut out = String::new();
    for line in source.lines() {
        let key = line.split('#').next().unwrap_or("").split_once('=').map(|(k, _)| k.trim());
        if key.is_some_and(|k| overrides.iter().any(|(o, _)| *o == k)) {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    for (k, v) in overrides {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

impl RunConfig {
    /// `key = value` echo of the accepted input.
    pub fn echo(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
